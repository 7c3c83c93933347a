#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "deformreg/nd/ops.hpp"

namespace deformreg::testing {

inline nd::Tensor random_tensor(nd::Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f,
                                bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(nd::shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return nd::Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

struct GradCheck {
  double max_violation = 0.0;  // max over checked entries of |a - n| / max(abs_tol, rel_tol*|n|)
  int checked = 0;
  int skipped = 0;
};

// Compares d(loss)/d(x) from one backward pass with central differences of
// step h, evaluated in double on the float forward. `loss` builds the scalar
// on the given tape; `skip(i)` excludes entries sitting near a kink.
inline GradCheck check_gradient(const std::function<nd::Tensor(nd::Tape&)>& loss, nd::Tensor x, double h = 1e-3,
                                double abs_tol = 1e-3, double rel_tol = 1e-2,
                                const std::function<bool(std::size_t)>& skip = {}, std::size_t max_entries = 0) {
  x.release_grad();
  {
    nd::Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<float> analytic(x.grad().begin(), x.grad().end());
  x.release_grad();

  GradCheck out;
  auto data = x.mutable_data();
  const std::size_t n = data.size();
  const std::size_t stride = max_entries && n > max_entries ? n / max_entries : 1;
  for (std::size_t i = 0; i < n; i += stride) {
    if (skip && skip(i)) {
      ++out.skipped;
      continue;
    }
    const float orig = data[i];
    nd::Tape off(false);
    data[i] = static_cast<float>(orig + h);
    const double up = loss(off).item();
    data[i] = static_cast<float>(orig - h);
    const double down = loss(off).item();
    data[i] = orig;
    // The perturbation actually applied in float.
    const double eff = (static_cast<double>(static_cast<float>(orig + h)) -
                        static_cast<double>(static_cast<float>(orig - h)));
    const double numeric = (up - down) / eff;
    const double denom = std::max(abs_tol, rel_tol * std::fabs(numeric));
    out.max_violation = std::max(out.max_violation, std::fabs(analytic[i] - numeric) / denom);
    ++out.checked;
  }
  return out;
}

}  // namespace deformreg::testing
