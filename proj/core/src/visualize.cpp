#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"

namespace deformreg::io {
namespace {

// h in [0,1), s in [0,1], v = 1.
void hsv_to_rgb(double h, double s, std::uint8_t* out) {
  const double h6 = h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = 1.0 - s, q = 1.0 - s * f, t = 1.0 - s * (1.0 - f);
  double r = 1, g = 1, b = 1;
  switch (sector) {
    case 0: r = 1; g = t; b = p; break;
    case 1: r = q; g = 1; b = p; break;
    case 2: r = p; g = 1; b = t; break;
    case 3: r = p; g = q; b = 1; break;
    case 4: r = t; g = p; b = 1; break;
    default: r = 1; g = p; b = q; break;
  }
  out[0] = static_cast<std::uint8_t>(std::lround(255.0 * r));
  out[1] = static_cast<std::uint8_t>(std::lround(255.0 * g));
  out[2] = static_cast<std::uint8_t>(std::lround(255.0 * b));
}

}  // namespace

RgbImage colorize_field(const DeformationField& field) {
  RgbImage img;
  img.height = field.height();
  img.width = field.width();
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  img.rgb.assign(3 * n, 255);
  if (n == 0) return img;

  std::vector<double> mag(n);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) mag[static_cast<std::size_t>(y) * img.width + x] = std::hypot(field.dx(y, x), field.dy(y, x));
  std::vector<double> sorted = mag;
  const std::size_t k = std::min(n - 1, static_cast<std::size_t>(std::ceil(0.98 * static_cast<double>(n))) - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  img.magnitude_scale = sorted[k];

  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      double hue = std::atan2(field.dy(y, x), field.dx(y, x)) / (2.0 * std::numbers::pi);
      if (hue < 0) hue += 1.0;
      const double sat = img.magnitude_scale > 0 ? std::min(1.0, mag[i] / img.magnitude_scale) : 0.0;
      hsv_to_rgb(hue, std::isfinite(sat) ? sat : 0.0, &img.rgb[3 * i]);
    }
  }
  return img;
}

void write_ppm(const std::string& path, const RgbImage& image, const std::string& comment) {
  if (image.rgb.size() != 3 * static_cast<std::size_t>(image.height) * image.width) {
    throw ShapeError("write_ppm: pixel buffer does not match " + std::to_string(image.width) + "x" +
                     std::to_string(image.height));
  }
  std::string header = "P6\n";
  std::size_t start = 0;
  while (start < comment.size()) {
    auto nl = comment.find('\n', start);
    if (nl == std::string::npos) nl = comment.size();
    header += "# " + comment.substr(start, nl - start) + "\n";
    start = nl + 1;
  }
  header += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.rgb.begin(), image.rgb.end());
  write_file(path, bytes);
}

}  // namespace deformreg::io
