#include "deformreg/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"

namespace deformreg {
namespace fs = std::filesystem;

namespace {

std::string dims(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

void check_same(const std::string& id, const char* what, int h, int w, int eh, int ew) {
  if (h != eh || w != ew) {
    throw ShapeError(id + ": " + what + " is " + dims(h, w) + ", fixed image is " + dims(eh, ew));
  }
}

}  // namespace

bool PairDataset::has_masks() const {
  return !pairs.empty() && std::all_of(pairs.begin(), pairs.end(),
                                       [](const ImagePair& p) { return p.fixed_mask && p.moving_mask; });
}

void PairDataset::validate(bool require_truth) const {
  for (const auto& p : pairs) {
    const int h = p.fixed.height(), w = p.fixed.width();
    check_same(p.id, "fixed image", h, w, height(), width());
    check_same(p.id, "moving image", p.moving.height(), p.moving.width(), h, w);
    if (p.fixed_mask) check_same(p.id, "fixed mask", p.fixed_mask->height(), p.fixed_mask->width(), h, w);
    if (p.moving_mask) check_same(p.id, "moving mask", p.moving_mask->height(), p.moving_mask->width(), h, w);
    if (p.truth) check_same(p.id, "ground-truth field", p.truth->height(), p.truth->width(), h, w);
    if (require_truth && !p.truth) throw ConfigError(p.id + ": ground-truth field required but missing");
    if (p.fixed_landmarks) p.fixed_landmarks->check_bounds(h, w);
    if (p.moving_landmarks) p.moving_landmarks->check_bounds(h, w);
    if (p.fixed_landmarks && p.moving_landmarks && p.fixed_landmarks->size() != p.moving_landmarks->size()) {
      throw ShapeError(p.id + ": fixed and moving landmark counts differ");
    }
  }
}

PairDataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory '" + dir + "' does not exist");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "fixed.pgm")) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  PairDataset data;
  for (const auto& d : subdirs) {
    ImagePair p;
    p.id = d.filename().string();
    p.fixed = io::read_image((d / "fixed.pgm").string());
    p.moving = io::read_image((d / "moving.pgm").string());
    const io::ImageBounds bounds{p.fixed.height(), p.fixed.width()};
    if (fs::exists(d / "truth.dff")) p.truth = io::read_field((d / "truth.dff").string());
    if (fs::exists(d / "fixed_mask.pgm")) p.fixed_mask = io::read_mask((d / "fixed_mask.pgm").string());
    if (fs::exists(d / "moving_mask.pgm")) p.moving_mask = io::read_mask((d / "moving_mask.pgm").string());
    if (fs::exists(d / "fixed_landmarks.csv")) {
      p.fixed_landmarks = io::read_landmarks((d / "fixed_landmarks.csv").string(), bounds);
    }
    if (fs::exists(d / "moving_landmarks.csv")) {
      p.moving_landmarks = io::read_landmarks((d / "moving_landmarks.csv").string(), bounds);
    }
    data.pairs.push_back(std::move(p));
  }
  if (data.empty()) throw Error("dataset directory '" + dir + "' holds no pair subdirectories");
  data.validate(false);
  return data;
}

void save_pair(const std::string& dir, const ImagePair& pair) {
  const fs::path d = fs::path(dir) / pair.id;
  fs::create_directories(d);
  io::write_image((d / "fixed.pgm").string(), pair.fixed);
  io::write_image((d / "moving.pgm").string(), pair.moving);
  if (pair.truth) io::write_field((d / "truth.dff").string(), *pair.truth);
  if (pair.fixed_mask) io::write_mask((d / "fixed_mask.pgm").string(), *pair.fixed_mask);
  if (pair.moving_mask) io::write_mask((d / "moving_mask.pgm").string(), *pair.moving_mask);
  if (pair.fixed_landmarks) io::write_landmarks((d / "fixed_landmarks.csv").string(), *pair.fixed_landmarks);
  if (pair.moving_landmarks) io::write_landmarks((d / "moving_landmarks.csv").string(), *pair.moving_landmarks);
}

}  // namespace deformreg
