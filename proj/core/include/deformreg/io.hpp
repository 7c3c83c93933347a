#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deformreg/types.hpp"

namespace deformreg::io {

// Binary PGM (P5). maxval < 256 uses one byte per sample, otherwise two bytes
// big-endian. Intensities are sample / maxval.
Image2D decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const Image2D& image, int maxval = 65535);
Image2D read_image(const std::string& path);
void write_image(const std::string& path, const Image2D& image, int maxval = 65535);

// Masks are PGMs thresholded at maxval/2; written as 8-bit 0/255.
SegMask read_mask(const std::string& path);
void write_mask(const std::string& path, const SegMask& mask);

// "DFF1", u32 LE width, u32 LE height, then H*W*(dx,dy) f32 LE row-major.
DeformationField decode_field(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_field(const DeformationField& field);
DeformationField read_field(const std::string& path);
void write_field(const std::string& path, const DeformationField& field);

// CSV with header "index,x,y". Duplicate indices and, when bounds are given,
// points outside [0,w-1] x [0,h-1] are rejected with the line number.
struct ImageBounds {
  int height;
  int width;
};
LandmarkSet parse_landmarks(const std::string& text, std::optional<ImageBounds> bounds = std::nullopt);
LandmarkSet read_landmarks(const std::string& path, std::optional<ImageBounds> bounds = std::nullopt);
void write_landmarks(const std::string& path, const LandmarkSet& points);

// Colour coding of a field: hue = displacement direction, saturation =
// magnitude / 98th-percentile magnitude (clamped to 1), value = 1.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;
  double magnitude_scale = 0.0;  // the 98th-percentile magnitude used, px
};
RgbImage colorize_field(const DeformationField& field);
// Binary PPM (P6); `comment` lines go into the header.
void write_ppm(const std::string& path, const RgbImage& image, const std::string& comment = {});

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace deformreg::io
