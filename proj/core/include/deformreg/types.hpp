#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deformreg/nd/tensor.hpp"

namespace deformreg {

// H x W grayscale image with intensities in [0,1], row-major.
class Image2D {
 public:
  Image2D() = default;
  Image2D(int height, int width, float fill = 0.0f);
  // Takes ownership of the pixels; non-finite or out-of-range values are
  // clamped into [0,1] and counted (see ingest_clamp_count()).
  Image2D(int height, int width, std::vector<float> pixels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  float at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float& at(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<float> pixels() noexcept { return pixels_; }

  bool operator==(const Image2D&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

// Number of pixels clamped on ingest since process start.
std::uint64_t ingest_clamp_count();

// Binary H x W mask.
class SegMask {
 public:
  SegMask() = default;
  SegMask(int height, int width, std::uint8_t fill = 0);
  SegMask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::uint8_t at(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int y, int x, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count() const;

  Image2D to_image() const;
  static SegMask threshold(const Image2D& image, float level = 0.5f);

  bool operator==(const SegMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Per-pixel displacement (dx, dy) in pixel units of the field's own grid,
// stored interleaved row-major. The warped image samples the moving image at
// x + u(x).
class DeformationField {
 public:
  DeformationField() = default;
  DeformationField(int height, int width);
  DeformationField(int height, int width, std::vector<float> interleaved);
  static DeformationField constant(int height, int width, float dx, float dy);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  float dx(int y, int x) const { return disp_[2 * (static_cast<std::size_t>(y) * width_ + x)]; }
  float dy(int y, int x) const { return disp_[2 * (static_cast<std::size_t>(y) * width_ + x) + 1]; }
  void set(int y, int x, float dx, float dy) {
    const auto i = 2 * (static_cast<std::size_t>(y) * width_ + x);
    disp_[i] = dx;
    disp_[i + 1] = dy;
  }
  std::span<const float> interleaved() const noexcept { return disp_; }
  std::span<float> interleaved() noexcept { return disp_; }

  // Clamp-to-edge bilinear sample at a continuous position.
  Vec2 sample(double x, double y) const;
  double max_magnitude() const;
  bool all_finite() const;

  bool operator==(const DeformationField&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> disp_;
};

struct Landmark {
  int index = 0;
  double x = 0.0;  // column, rightward
  double y = 0.0;  // row, downward
};

// Index-aligned point set; origin at the top-left pixel centre.
struct LandmarkSet {
  std::vector<Landmark> points;

  std::size_t size() const noexcept { return points.size(); }
  // Throws ShapeError naming every landmark outside [0,w-1] x [0,h-1].
  void check_bounds(int height, int width) const;
};

// Tensor views: images as [1,1,H,W], fields as [1,2,H,W] (dx plane, dy plane).
nd::Tensor to_tensor(const Image2D& image);
nd::Tensor to_tensor(const DeformationField& field);
nd::Tensor stack_images(std::span<const Image2D* const> images);
nd::Tensor stack_fields(std::span<const DeformationField* const> fields);
Image2D image_from_tensor(const nd::Tensor& t, std::int64_t batch_index = 0);
DeformationField field_from_tensor(const nd::Tensor& t, std::int64_t batch_index = 0);

}  // namespace deformreg
