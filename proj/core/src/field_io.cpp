#include <bit>
#include <cstring>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"

namespace deformreg::io {
namespace {

constexpr char kFieldMagic[4] = {'D', 'F', 'F', '1'};
constexpr std::size_t kFieldHeader = 12;

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

DeformationField decode_field(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFieldHeader) throw FormatError("field file shorter than its 12-byte header", bytes.size());
  if (std::memcmp(bytes.data(), kFieldMagic, 4) != 0) throw FormatError("not a field file (bad magic)", 0);
  const std::uint64_t w = load_u32(bytes.data() + 4);
  const std::uint64_t h = load_u32(bytes.data() + 8);
  const std::uint64_t expected = kFieldHeader + w * h * 8;
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) throw FormatError("field dimensions out of range", 4);
  if (bytes.size() != expected) {
    throw FormatError("field " + std::to_string(w) + "x" + std::to_string(h) + " needs " + std::to_string(expected) +
                          " bytes, file has " + std::to_string(bytes.size()),
                      std::min<std::uint64_t>(bytes.size(), expected));
  }
  std::vector<float> disp(static_cast<std::size_t>(2 * w * h));
  for (std::size_t i = 0; i < disp.size(); ++i) disp[i] = std::bit_cast<float>(load_u32(bytes.data() + kFieldHeader + 4 * i));
  return DeformationField(static_cast<int>(h), static_cast<int>(w), std::move(disp));
}

std::vector<std::uint8_t> encode_field(const DeformationField& field) {
  std::vector<std::uint8_t> out(kFieldMagic, kFieldMagic + 4);
  out.reserve(kFieldHeader + field.interleaved().size() * 4);
  store_u32(out, static_cast<std::uint32_t>(field.width()));
  store_u32(out, static_cast<std::uint32_t>(field.height()));
  for (float v : field.interleaved()) store_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

DeformationField read_field(const std::string& path) {
  try {
    return decode_field(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.offset());
  }
}

void write_field(const std::string& path, const DeformationField& field) { write_file(path, encode_field(field)); }

}  // namespace deformreg::io
