#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "deformreg/error.hpp"
#include "deformreg/regnet.hpp"

namespace deformreg::regnet {
namespace {

constexpr char kMagic[4] = {'D', 'R', 'G', '1'};
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLength = 4096;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void block(const NamedTensor& t) {
    u32(static_cast<std::uint32_t>(t.name.size()));
    bytes(t.name.data(), t.name.size());
    u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) u32(static_cast<std::uint32_t>(d));
    for (float v : t.value.data()) f32(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::size_t offset() const { return pos_; }
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("model file truncated while reading ") + what, pos_);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  NamedTensor block() {
    const std::size_t start = pos_;
    const auto len = u32("block name length");
    if (len == 0 || len > kMaxNameLength) throw FormatError("invalid block name length", start);
    std::string name = str(len, "block name");
    const auto rank = u32("block rank");
    if (rank > kMaxRank) throw FormatError("block '" + name + "' has rank " + std::to_string(rank), pos_ - 4);
    nd::Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(u32("block dims"));
      count *= static_cast<std::uint64_t>(shape.back());
    }
    if (count > (in_.size() - pos_) / 4) throw FormatError("model file truncated in block '" + name + "'", pos_);
    std::vector<float> data(static_cast<std::size_t>(count));
    for (auto& v : data) v = f32("block payload");
    return {std::move(name), nd::Tensor::from_data(std::move(shape), std::move(data))};
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const RegModel& model, std::span<const NamedTensor> extra) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.arch.levels));
  w.u32(static_cast<std::uint32_t>(model.arch.base_channels));
  w.u32(static_cast<std::uint32_t>(model.arch.height));
  w.u32(static_cast<std::uint32_t>(model.arch.width));
  w.f32(model.arch.leaky_slope);
  w.u32(static_cast<std::uint32_t>(model.params.size() + extra.size()));
  for (const auto& p : model.params) w.block(p);
  for (const auto& e : extra) w.block(e);
  return w.take();
}

LoadedModel deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != std::string(kMagic, 4)) throw FormatError("not a model file (bad magic)", 0);
  const auto version = r.u32("version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version), 4);
  }
  ArchConfig arch;
  arch.levels = static_cast<int>(r.u32("arch.levels"));
  arch.base_channels = static_cast<int>(r.u32("arch.base_channels"));
  arch.height = static_cast<int>(r.u32("arch.height"));
  arch.width = static_cast<int>(r.u32("arch.width"));
  arch.leaky_slope = r.f32("arch.leaky_slope");
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid architecture header: ") + e.what(), 8);
  }

  LoadedModel out{init_model(arch, 0), {}};
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < out.model.params.size(); ++i) index[out.model.params[i].name] = i;
  std::vector<bool> seen(out.model.params.size(), false);

  const auto count = r.u32("block count");
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::size_t start = r.offset();
    NamedTensor t = r.block();
    auto it = index.find(t.name);
    if (it == index.end()) {
      out.extra.push_back(std::move(t));
      continue;
    }
    auto& slot = out.model.params[it->second];
    if (seen[it->second]) throw FormatError("duplicate parameter block '" + t.name + "'", start);
    if (slot.value.shape() != t.value.shape()) {
      throw FormatError("parameter '" + t.name + "' has shape " + nd::shape_str(t.value.shape()) + ", expected " +
                            nd::shape_str(slot.value.shape()),
                        start);
    }
    t.value.set_requires_grad(true);
    slot.value = t.value;
    seen[it->second] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw FormatError("missing parameter block '" + out.model.params[i].name + "'", r.offset());
  }
  if (r.offset() != bytes.size()) throw FormatError("trailing bytes after last block", r.offset());
  return out;
}

void save_model(const std::string& path, const RegModel& model, std::span<const NamedTensor> extra) {
  const auto bytes = serialize(model, extra);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write to '" + path + "' failed");
}

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open model '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace deformreg::regnet
