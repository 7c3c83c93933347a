#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deformreg/types.hpp"

namespace deformreg::eval {

// |A n B| / |A u B|; 1.0 when both masks are empty.
double jaccard(const SegMask& a, const SegMask& b);

// Mean Euclidean distance between index-aligned landmark sets, in px.
double landmark_distance(const LandmarkSet& warped, const LandmarkSet& fixed);

struct MetricReport {
  std::string pair_id;
  std::optional<double> dist_before, dist_after;
  std::optional<double> jacc_before, jacc_after;
  double runtime_s = 0.0;
};

struct PairAnnotations {
  const SegMask* fixed_mask = nullptr;
  const SegMask* moving_mask = nullptr;
  const LandmarkSet* fixed_landmarks = nullptr;
  const LandmarkSet* moving_landmarks = nullptr;
};

// Jaccard of the fixed mask against the warped moving mask and the landmark
// distance after mapping moving landmarks through the field, each next to its
// zero-field value. Throws ConfigError when neither masks nor landmarks are
// given.
MetricReport evaluate_pair(const std::string& pair_id, const DeformationField& field, const PairAnnotations& notes,
                           double runtime_s = 0.0);

// Header: pair_id,dist_before,dist_after,jacc_before,jacc_after,runtime_s.
// Missing metrics are written as empty cells.
void write_metric_csv(const std::string& path, const std::vector<MetricReport>& rows);
std::string metric_csv(const std::vector<MetricReport>& rows);

}  // namespace deformreg::eval
