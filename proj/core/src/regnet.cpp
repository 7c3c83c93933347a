#include "deformreg/regnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "deformreg/error.hpp"
#include "deformreg/nd/ops.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::regnet {
namespace {

constexpr int kHeadKernel = 3;
constexpr int kConvKernel = 3;
constexpr int kDownKernel = 4;
constexpr int kUpKernel = 4;

std::string lvl(const char* prefix, int l, const char* suffix) {
  return std::string(prefix) + std::to_string(l) + suffix;
}

// Input channels of the feature map at level l (the one the flow head sees).
int feature_channels(const ArchConfig& a, int l) {
  if (l == a.levels - 1) return a.channels(l);
  return 2 * a.channels(l) + 2;
}

class Builder {
 public:
  Builder(RegModel& m, std::uint64_t seed) : model_(m), rng_(seed) {}

  void conv(const std::string& name, std::int64_t out_c, std::int64_t in_c, int k, bool zero) {
    nd::Tensor w = nd::Tensor::zeros({out_c, in_c, k, k}, true);
    if (!zero) fill(w, static_cast<double>(in_c) * k * k);
    model_.params.push_back({name + ".w", w});
    model_.params.push_back({name + ".b", nd::Tensor::zeros({out_c}, true)});
  }

  void deconv(const std::string& name, std::int64_t in_c, std::int64_t out_c, int k, int stride) {
    nd::Tensor w = nd::Tensor::zeros({in_c, out_c, k, k}, true);
    // Each output pixel receives in_c * (k/stride)^2 contributions.
    fill(w, static_cast<double>(in_c) * (k / stride) * (k / stride));
    model_.params.push_back({name + ".w", w});
    model_.params.push_back({name + ".b", nd::Tensor::zeros({out_c}, true)});
  }

 private:
  void fill(nd::Tensor& w, double fan_in) {
    const double slope = model_.arch.leaky_slope;
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (float& v : w.mutable_data()) v = static_cast<float>(dist(rng_));
  }

  RegModel& model_;
  std::mt19937_64 rng_;
};

nd::Tensor conv_act(nd::Tape& tape, const RegModel& m, const std::string& name, const nd::Tensor& x, int stride,
                    int pad) {
  nd::Tensor y = nd::conv2d(tape, x, m.param(name + ".w"), m.param(name + ".b"), stride, pad);
  return nd::leaky_relu(tape, y, m.arch.leaky_slope);
}

}  // namespace

int ArchConfig::channels(int level) const { return std::min(base_channels << level, max_channels); }

void ArchConfig::validate() const {
  if (levels < 1 || levels > 10) throw ConfigError("arch.levels must be in [1,10]");
  if (base_channels < 1) throw ConfigError("arch.base_channels must be >= 1");
  if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) throw ConfigError("arch.leaky_slope must be in [0,1)");
  const int unit = 1 << (levels - 1);
  if (height < unit || width < unit || height % unit != 0 || width % unit != 0) {
    throw ConfigError("arch input " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be divisible by 2^(levels-1) = " + std::to_string(unit));
  }
}

const nd::Tensor& RegModel::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw Error("model has no parameter '" + name + "'");
}

std::size_t RegModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value.numel());
  return n;
}

void RegModel::zero_grad() {
  for (auto& p : params) p.value.release_grad();
}

RegModel RegModel::clone() const {
  RegModel m{arch, {}};
  for (const auto& p : params) {
    nd::Tensor t = p.value.detach();
    t.set_requires_grad(p.value.requires_grad());
    m.params.push_back({p.name, t});
  }
  return m;
}

RegModel init_model(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  RegModel m{arch, {}};
  Builder b(m, seed);
  for (int l = 0; l < arch.levels; ++l) {
    const int c = arch.channels(l);
    if (l == 0) {
      b.conv(lvl("enc", l, ".a"), c, 2, kConvKernel, false);
    } else {
      b.conv(lvl("enc", l, ".a"), c, arch.channels(l - 1), kDownKernel, false);
    }
    b.conv(lvl("enc", l, ".b"), c, c, kConvKernel, false);
  }
  for (int l = arch.levels - 2; l >= 0; --l) {
    b.deconv(lvl("dec", l, ""), feature_channels(arch, l + 1), arch.channels(l), kUpKernel, 2);
  }
  for (int l = arch.levels - 1; l >= 0; --l) {
    b.conv(lvl("flow", l, ""), 2, feature_channels(arch, l), kHeadKernel, true);
  }
  return m;
}

std::vector<nd::Tensor> forward(nd::Tape& tape, const RegModel& model, const nd::Tensor& fixed,
                                const nd::Tensor& moving) {
  const auto& a = model.arch;
  for (const auto* t : {&fixed, &moving}) {
    if (t->rank() != 4 || t->dim(1) != 1 || t->dim(2) != a.height || t->dim(3) != a.width) {
      throw ShapeError("regnet::forward: expected [N,1," + std::to_string(a.height) + "," + std::to_string(a.width) +
                       "] inputs, got " + nd::shape_str(t->shape()));
    }
  }
  if (fixed.dim(0) != moving.dim(0)) throw ShapeError("regnet::forward: batch sizes differ");

  std::vector<nd::Tensor> skips;
  nd::Tensor x = nd::concat_channels(tape, fixed, moving);
  for (int l = 0; l < a.levels; ++l) {
    x = l == 0 ? conv_act(tape, model, lvl("enc", l, ".a"), x, 1, kConvKernel / 2)
               : conv_act(tape, model, lvl("enc", l, ".a"), x, 2, (kDownKernel - 2) / 2);
    x = conv_act(tape, model, lvl("enc", l, ".b"), x, 1, kConvKernel / 2);
    skips.push_back(x);
  }

  std::vector<nd::Tensor> flows(static_cast<std::size_t>(a.levels));
  nd::Tensor feat = skips.back();
  const int top = a.levels - 1;
  flows[top] = nd::conv2d(tape, feat, model.param(lvl("flow", top, ".w")), model.param(lvl("flow", top, ".b")), 1,
                          kHeadKernel / 2);
  for (int l = top - 1; l >= 0; --l) {
    nd::Tensor up = nd::conv2d_transpose(tape, feat, model.param(lvl("dec", l, ".w")), model.param(lvl("dec", l, ".b")),
                                         2, (kUpKernel - 2) / 2);
    up = nd::leaky_relu(tape, up, a.leaky_slope);
    nd::Tensor coarse = warp::upsample_field(tape, flows[l + 1]);
    feat = nd::concat_channels(tape, nd::concat_channels(tape, up, skips[l]), coarse);
    nd::Tensor refine =
        nd::conv2d(tape, feat, model.param(lvl("flow", l, ".w")), model.param(lvl("flow", l, ".b")), 1, kHeadKernel / 2);
    flows[l] = nd::add(tape, coarse, refine);
  }
  return flows;
}

std::vector<DeformationField> forward(const RegModel& model, const Image2D& fixed, const Image2D& moving) {
  nd::Tape inference(false);
  auto flows = forward(inference, model, to_tensor(fixed), to_tensor(moving));
  std::vector<DeformationField> out;
  for (const auto& f : flows) out.push_back(field_from_tensor(f));
  return out;
}

}  // namespace deformreg::regnet
