#include "deformreg/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "deformreg/error.hpp"

namespace deformreg {
namespace {

std::atomic<std::uint64_t> g_clamped{0};

void check_dims(int height, int width, std::size_t expected, std::size_t actual, const char* what) {
  if (height < 0 || width < 0) throw ShapeError(std::string(what) + ": negative dimensions");
  if (expected != actual) {
    throw ShapeError(std::string(what) + ": " + std::to_string(actual) + " values for " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
}

}  // namespace

Image2D::Image2D(int height, int width, float fill)
    : Image2D(height, width, std::vector<float>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), fill)) {}

Image2D::Image2D(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  check_dims(height, width, static_cast<std::size_t>(height) * width, pixels_.size(), "Image2D");
  std::uint64_t clamped = 0;
  for (float& v : pixels_) {
    if (!std::isfinite(v)) {
      v = 0.0f;
      ++clamped;
    } else if (v < 0.0f || v > 1.0f) {
      v = std::clamp(v, 0.0f, 1.0f);
      ++clamped;
    }
  }
  if (clamped) g_clamped += clamped;
}

std::uint64_t ingest_clamp_count() { return g_clamped.load(); }

SegMask::SegMask(int height, int width, std::uint8_t fill)
    : SegMask(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), fill)) {}

SegMask::SegMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  check_dims(height, width, static_cast<std::size_t>(height) * width, bits_.size(), "SegMask");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t SegMask::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

Image2D SegMask::to_image() const {
  std::vector<float> px(bits_.begin(), bits_.end());
  return Image2D(height_, width_, std::move(px));
}

SegMask SegMask::threshold(const Image2D& image, float level) {
  std::vector<std::uint8_t> bits(image.size());
  auto px = image.pixels();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = px[i] >= level ? 1 : 0;
  return SegMask(image.height(), image.width(), std::move(bits));
}

DeformationField::DeformationField(int height, int width)
    : DeformationField(height, width, std::vector<float>(2 * static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), 0.0f)) {}

DeformationField::DeformationField(int height, int width, std::vector<float> interleaved)
    : height_(height), width_(width), disp_(std::move(interleaved)) {
  check_dims(height, width, 2 * static_cast<std::size_t>(height) * width, disp_.size(), "DeformationField");
}

DeformationField DeformationField::constant(int height, int width, float dx, float dy) {
  DeformationField f(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) f.set(y, x, dx, dy);
  return f;
}

Vec2 DeformationField::sample(double x, double y) const {
  const double px = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  const double py = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(std::floor(px));
  const int y0 = static_cast<int>(std::floor(py));
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double wx = px - x0, wy = py - y0;
  auto lerp2 = [&](auto get) {
    return (1.0 - wy) * ((1.0 - wx) * get(y0, x0) + wx * get(y0, x1)) + wy * ((1.0 - wx) * get(y1, x0) + wx * get(y1, x1));
  };
  return {lerp2([&](int r, int c) { return static_cast<double>(dx(r, c)); }),
          lerp2([&](int r, int c) { return static_cast<double>(dy(r, c)); })};
}

double DeformationField::max_magnitude() const {
  double m = 0.0;
  for (std::size_t i = 0; i < disp_.size(); i += 2) m = std::max(m, std::hypot(double(disp_[i]), double(disp_[i + 1])));
  return m;
}

bool DeformationField::all_finite() const {
  return std::all_of(disp_.begin(), disp_.end(), [](float v) { return std::isfinite(v); });
}

void LandmarkSet::check_bounds(int height, int width) const {
  std::ostringstream bad;
  bool any = false;
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.x <= width - 1 && p.y >= 0.0 && p.y <= height - 1)) {
      bad << (any ? ", " : "") << "#" << p.index << " (" << p.x << "," << p.y << ")";
      any = true;
    }
  }
  if (any) {
    throw ShapeError("landmarks outside " + std::to_string(width) + "x" + std::to_string(height) +
                     " image: " + bad.str());
  }
}

nd::Tensor to_tensor(const Image2D& image) {
  const Image2D* p = &image;
  return stack_images(std::span<const Image2D* const>(&p, 1));
}

nd::Tensor to_tensor(const DeformationField& field) {
  const DeformationField* p = &field;
  return stack_fields(std::span<const DeformationField* const>(&p, 1));
}

nd::Tensor stack_images(std::span<const Image2D* const> images) {
  if (images.empty()) throw ShapeError("stack_images: empty batch");
  const int h = images[0]->height(), w = images[0]->width();
  std::vector<float> data;
  data.reserve(images.size() * h * w);
  for (const Image2D* img : images) {
    if (img->height() != h || img->width() != w) throw ShapeError("stack_images: images differ in size");
    data.insert(data.end(), img->pixels().begin(), img->pixels().end());
  }
  return nd::Tensor::from_data({static_cast<std::int64_t>(images.size()), 1, h, w}, std::move(data));
}

nd::Tensor stack_fields(std::span<const DeformationField* const> fields) {
  if (fields.empty()) throw ShapeError("stack_fields: empty batch");
  const int h = fields[0]->height(), w = fields[0]->width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<float> data(fields.size() * 2 * plane);
  for (std::size_t n = 0; n < fields.size(); ++n) {
    const auto* f = fields[n];
    if (f->height() != h || f->width() != w) throw ShapeError("stack_fields: fields differ in size");
    auto src = f->interleaved();
    float* dx = data.data() + n * 2 * plane;
    float* dy = dx + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dx[i] = src[2 * i];
      dy[i] = src[2 * i + 1];
    }
  }
  return nd::Tensor::from_data({static_cast<std::int64_t>(fields.size()), 2, h, w}, std::move(data));
}

Image2D image_from_tensor(const nd::Tensor& t, std::int64_t batch_index) {
  if (t.rank() != 4 || t.dim(1) != 1) throw ShapeError("image_from_tensor expects [N,1,H,W], got " + nd::shape_str(t.shape()));
  const auto h = t.dim(2), w = t.dim(3);
  auto src = t.data().subspan(static_cast<std::size_t>(batch_index * h * w), static_cast<std::size_t>(h * w));
  return Image2D(static_cast<int>(h), static_cast<int>(w), std::vector<float>(src.begin(), src.end()));
}

DeformationField field_from_tensor(const nd::Tensor& t, std::int64_t batch_index) {
  if (t.rank() != 4 || t.dim(1) != 2) throw ShapeError("field_from_tensor expects [N,2,H,W], got " + nd::shape_str(t.shape()));
  const auto h = t.dim(2), w = t.dim(3);
  const auto plane = static_cast<std::size_t>(h * w);
  const float* dx = t.data().data() + batch_index * 2 * plane;
  const float* dy = dx + plane;
  std::vector<float> inter(2 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    inter[2 * i] = dx[i];
    inter[2 * i + 1] = dy[i];
  }
  return DeformationField(static_cast<int>(h), static_cast<int>(w), std::move(inter));
}

}  // namespace deformreg
