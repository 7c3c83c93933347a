#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"

namespace deformreg::io {
namespace {

class HeaderScanner {
 public:
  HeaderScanner(std::span<const std::uint8_t> b, std::size_t start) : b_(b), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000'000) throw FormatError(std::string("PGM ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PGM header: expected ") + what, start);
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("PGM header: missing raster separator", pos_);
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_;
};

}  // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write to '" + path + "' failed");
}

namespace {

struct RawPgm {
  int height, width, maxval;
  std::vector<std::uint16_t> samples;
};

RawPgm decode_raw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a PGM file", 0);
  if (bytes[1] != '5') {
    throw FormatError(std::string("unsupported PNM variant P") + static_cast<char>(bytes[1]) + " (only binary P5)", 1);
  }
  HeaderScanner hs(bytes, 2);
  const long w = hs.number("width");
  const long h = hs.number("height");
  const std::size_t maxval_at = hs.pos();
  const long maxval = hs.number("maxval");
  if (w < 1 || h < 1) throw FormatError("PGM dimensions must be positive", 2);
  if (maxval < 1 || maxval > 65535) throw FormatError("PGM maxval out of range", maxval_at);
  hs.single_space();
  const std::size_t pos = hs.pos();

  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos < n * bps) {
    throw FormatError("PGM raster truncated: need " + std::to_string(n * bps) + " bytes, have " +
                          std::to_string(bytes.size() - pos),
                      bytes.size());
  }
  RawPgm raw{static_cast<int>(h), static_cast<int>(w), static_cast<int>(maxval), std::vector<std::uint16_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    raw.samples[i] = bps == 1 ? bytes[pos + i]
                              : static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
    if (raw.samples[i] > maxval) throw FormatError("PGM sample exceeds maxval", pos + i * bps);
  }
  return raw;
}

}  // namespace

Image2D decode_pgm(std::span<const std::uint8_t> bytes) {
  RawPgm raw = decode_raw(bytes);
  std::vector<float> px(raw.samples.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(raw.samples[i]) / static_cast<float>(raw.maxval);
  return Image2D(raw.height, raw.width, std::move(px));
}

std::vector<std::uint8_t> encode_pgm(const Image2D& image, int maxval) {
  if (maxval < 1 || maxval > 65535) throw ConfigError("PGM maxval must be in [1,65535]");
  const std::string header =
      "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const bool wide = maxval >= 256;
  out.reserve(out.size() + image.size() * (wide ? 2 : 1));
  for (float v : image.pixels()) {
    const auto q = static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * static_cast<float>(maxval)));
    if (wide) {
      out.push_back(static_cast<std::uint8_t>(q >> 8));
      out.push_back(static_cast<std::uint8_t>(q & 0xff));
    } else {
      out.push_back(static_cast<std::uint8_t>(q));
    }
  }
  return out;
}

Image2D read_image(const std::string& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.offset());
  }
}

void write_image(const std::string& path, const Image2D& image, int maxval) {
  write_file(path, encode_pgm(image, maxval));
}

SegMask read_mask(const std::string& path) {
  RawPgm raw;
  try {
    raw = decode_raw(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.offset());
  }
  std::vector<std::uint8_t> bits(raw.samples.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = 2 * static_cast<int>(raw.samples[i]) > raw.maxval ? 1 : 0;
  return SegMask(raw.height, raw.width, std::move(bits));
}

void write_mask(const std::string& path, const SegMask& mask) {
  std::vector<float> px(mask.bits().begin(), mask.bits().end());
  write_file(path, encode_pgm(Image2D(mask.height(), mask.width(), std::move(px)), 255));
}

}  // namespace deformreg::io
