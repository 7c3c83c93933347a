#include "deformreg/pyramid.hpp"

#include <cstdlib>

#include "deformreg/error.hpp"

namespace deformreg::pyramid {
namespace {

// Reflection without edge repeat (…c b | a b c | b a…), valid for any offset.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = std::abs(i) % period;
  return m < n ? m : period - m;
}

}  // namespace

int padded_extent(int extent, int scale_count) {
  const int unit = 1 << (scale_count - 1);
  return (extent + unit - 1) / unit * unit;
}

ImagePyramid build_pyramid(const Image2D& image, int scale_count) {
  if (scale_count < 1) throw ShapeError("build_pyramid: scale_count must be >= 1");
  const int unit = 1 << (scale_count - 1);
  if (image.height() % unit != 0 || image.width() % unit != 0) {
    throw ShapeError("build_pyramid: " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     " is not divisible by " + std::to_string(unit) + "; pad to " +
                     std::to_string(padded_extent(image.height(), scale_count)) + "x" +
                     std::to_string(padded_extent(image.width(), scale_count)) + " (pad_to_pyramid)");
  }
  ImagePyramid p;
  p.levels.push_back(image);
  for (int s = 1; s < scale_count; ++s) p.levels.push_back(average_pool2(p.levels.back()));
  return p;
}

Image2D average_pool2(const Image2D& image) {
  return image_from_tensor(average_pool2(to_tensor(image)));
}

nd::Tensor average_pool2(const nd::Tensor& t) {
  if (t.rank() != 4 || t.dim(2) % 2 != 0 || t.dim(3) % 2 != 0) {
    throw ShapeError("average_pool2 expects [N,C,H,W] with even H,W, got " + nd::shape_str(t.shape()));
  }
  const auto planes = t.dim(0) * t.dim(1), h = t.dim(2), w = t.dim(3);
  const auto oh = h / 2, ow = w / 2;
  auto src = t.data();
  std::vector<float> out(static_cast<std::size_t>(planes * oh * ow));
  for (std::int64_t p = 0; p < planes; ++p) {
    const float* s = src.data() + p * h * w;
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x) {
        const double sum = double(s[2 * y * w + 2 * x]) + s[2 * y * w + 2 * x + 1] + s[(2 * y + 1) * w + 2 * x] +
                           s[(2 * y + 1) * w + 2 * x + 1];
        out[static_cast<std::size_t>(p * oh * ow + y * ow + x)] = static_cast<float>(sum * 0.25);
      }
  }
  return nd::Tensor::from_data({t.dim(0), t.dim(1), oh, ow}, std::move(out));
}

std::vector<nd::Tensor> tensor_pyramid(const nd::Tensor& t, int scale_count) {
  std::vector<nd::Tensor> levels{t};
  for (int s = 1; s < scale_count; ++s) levels.push_back(average_pool2(levels.back()));
  return levels;
}

PaddedImage pad_to_pyramid(const Image2D& image, int scale_count) {
  if (scale_count < 1) throw ShapeError("pad_to_pyramid: scale_count must be >= 1");
  const int h = image.height(), w = image.width();
  const int ph = padded_extent(h, scale_count), pw = padded_extent(w, scale_count);
  PaddedImage out{image, CropRecord{h, w, ph - h, pw - w}};
  if (out.crop.empty()) return out;
  Image2D padded(ph, pw);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) padded.at(y, x) = image.at(reflect_index(y, h), reflect_index(x, w));
  out.image = std::move(padded);
  return out;
}

SegMask pad_mask(const SegMask& mask, const CropRecord& crop) {
  if (crop.empty()) return mask;
  const int h = mask.height(), w = mask.width();
  SegMask out(h + crop.pad_bottom, w + crop.pad_right);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(y, x, mask.at(reflect_index(y, h), reflect_index(x, w)));
  return out;
}

Image2D crop(const Image2D& image, const CropRecord& record) {
  if (record.empty()) return image;
  Image2D out(record.original_height, record.original_width);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.at(y, x) = image.at(y, x);
  return out;
}

DeformationField crop(const DeformationField& field, const CropRecord& record) {
  if (record.empty()) return field;
  DeformationField out(record.original_height, record.original_width);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(y, x, field.dx(y, x), field.dy(y, x));
  return out;
}

}  // namespace deformreg::pyramid
