#include "deformreg/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "deformreg/error.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::eval {

double jaccard(const SegMask& a, const SegMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("jaccard: masks differ in size");
  std::size_t inter = 0, uni = 0;
  auto ba = a.bits();
  auto bb = b.bits();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    inter += (ba[i] & bb[i]);
    uni += (ba[i] | bb[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double landmark_distance(const LandmarkSet& warped, const LandmarkSet& fixed) {
  if (warped.size() != fixed.size()) {
    throw ShapeError("landmark_distance: " + std::to_string(warped.size()) + " vs " + std::to_string(fixed.size()) +
                     " landmarks");
  }
  if (warped.size() == 0) throw ShapeError("landmark_distance: empty landmark sets");
  double sum = 0.0;
  for (std::size_t i = 0; i < warped.size(); ++i) {
    sum += std::hypot(warped.points[i].x - fixed.points[i].x, warped.points[i].y - fixed.points[i].y);
  }
  return sum / static_cast<double>(warped.size());
}

MetricReport evaluate_pair(const std::string& pair_id, const DeformationField& field, const PairAnnotations& notes,
                           double runtime_s) {
  const bool masks = notes.fixed_mask && notes.moving_mask;
  const bool marks = notes.fixed_landmarks && notes.moving_landmarks;
  if (!masks && !marks) throw ConfigError("evaluate_pair: need masks or landmarks to evaluate '" + pair_id + "'");
  MetricReport r;
  r.pair_id = pair_id;
  r.runtime_s = runtime_s;
  if (masks) {
    const auto& fm = *notes.fixed_mask;
    if (fm.height() != field.height() || fm.width() != field.width()) {
      throw ShapeError("evaluate_pair: mask size does not match the field");
    }
    r.jacc_before = jaccard(fm, *notes.moving_mask);
    r.jacc_after = jaccard(fm, warp::warp_mask(*notes.moving_mask, field));
  }
  if (marks) {
    notes.fixed_landmarks->check_bounds(field.height(), field.width());
    r.dist_before = landmark_distance(*notes.moving_landmarks, *notes.fixed_landmarks);
    r.dist_after = landmark_distance(warp::apply_to_landmarks(*notes.moving_landmarks, field), *notes.fixed_landmarks);
  }
  return r;
}

std::string metric_csv(const std::vector<MetricReport>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "pair_id,dist_before,dist_after,jacc_before,jacc_after,runtime_s\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& r : rows) {
    os << r.pair_id << ',';
    cell(r.dist_before);
    os << ',';
    cell(r.dist_after);
    os << ',';
    cell(r.jacc_before);
    os << ',';
    cell(r.jacc_after);
    os << ',' << r.runtime_s << '\n';
  }
  return os.str();
}

void write_metric_csv(const std::string& path, const std::vector<MetricReport>& rows) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << metric_csv(rows);
  if (!f) throw Error("write to '" + path + "' failed");
}

}  // namespace deformreg::eval
