#include <cmath>
#include <iostream>

#include "deformreg/engine.hpp"
#include "deformreg/error.hpp"

namespace deformreg::engine {

AdamStepResult adam_step(AdamState& state, std::vector<regnet::NamedTensor>& params) {
  AdamStepResult result;
  for (auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (float g : p.value.grad()) {
      if (!std::isfinite(g)) {
        result.non_finite.push_back(p.name);
        break;
      }
    }
  }
  if (!result.non_finite.empty()) {
    result.applied = false;
    std::cerr << "[deformreg] adam: step " << state.step_count + 1 << " skipped, non-finite gradient in";
    for (const auto& n : result.non_finite) std::cerr << " '" << n << "'";
    std::cerr << '\n';
    return result;
  }

  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double decay = state.lr * state.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].value.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != data.size()) {
      m.assign(data.size(), 0.0f);
      v.assign(data.size(), 0.0f);
    }
    const bool has_grad = params[i].value.has_grad();
    std::span<const float> grad = has_grad ? params[i].value.grad() : std::span<const float>{};
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = has_grad ? grad[j] : 0.0;
      double p = data[j];
      p -= decay * p;
      const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      p -= state.lr * (mj / c1) / (std::sqrt(vj / c2) + state.eps);
      data[j] = static_cast<float>(p);
    }
  }
  return result;
}

std::vector<regnet::NamedTensor> AdamState::to_blocks(const std::vector<regnet::NamedTensor>& params) const {
  std::vector<regnet::NamedTensor> blocks;
  blocks.push_back({"adam.hyper", nd::Tensor::from_data({6}, {static_cast<float>(lr), static_cast<float>(beta1),
                                                              static_cast<float>(beta2), static_cast<float>(eps),
                                                              static_cast<float>(weight_decay),
                                                              static_cast<float>(step_count)})});
  for (std::size_t i = 0; i < params.size() && i < m.size(); ++i) {
    blocks.push_back({"adam.m/" + params[i].name, nd::Tensor::from_data(params[i].value.shape(), m[i])});
    blocks.push_back({"adam.v/" + params[i].name, nd::Tensor::from_data(params[i].value.shape(), v[i])});
  }
  return blocks;
}

std::optional<AdamState> AdamState::from_blocks(const std::vector<regnet::NamedTensor>& blocks,
                                                const std::vector<regnet::NamedTensor>& params) {
  auto find = [&](const std::string& name) -> const nd::Tensor* {
    for (const auto& b : blocks)
      if (b.name == name) return &b.value;
    return nullptr;
  };
  const nd::Tensor* hyper = find("adam.hyper");
  if (hyper == nullptr) return std::nullopt;
  if (hyper->numel() != 6) throw FormatError("adam.hyper block must hold 6 values", 0);
  AdamState s;
  s.lr = hyper->at(0);
  s.beta1 = hyper->at(1);
  s.beta2 = hyper->at(2);
  s.eps = hyper->at(3);
  s.weight_decay = hyper->at(4);
  s.step_count = static_cast<std::int64_t>(hyper->at(5));
  if (s.step_count == 0) return s;
  for (const auto& p : params) {
    const nd::Tensor* m = find("adam.m/" + p.name);
    const nd::Tensor* v = find("adam.v/" + p.name);
    if (m == nullptr || v == nullptr || m->shape() != p.value.shape() || v->shape() != p.value.shape()) {
      throw FormatError("checkpoint lacks consistent Adam moments for '" + p.name + "'", 0);
    }
    s.m.emplace_back(m->data().begin(), m->data().end());
    s.v.emplace_back(v->data().begin(), v->data().end());
  }
  return s;
}

}  // namespace deformreg::engine
