#include <cmath>

#include "deformreg/error.hpp"
#include "deformreg/nd/ops.hpp"

namespace deformreg::nd {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename Fwd>
Tensor map_unary(const Tensor& x, Fwd&& f) {
  auto src = x.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
  return Tensor::from_data(x.shape(), std::move(out));
}

template <typename Fwd>
Tensor map_binary(const Tensor& a, const Tensor& b, Fwd&& f) {
  auto da = a.data();
  auto db = b.data();
  std::vector<float> out(da.size());
  for (std::size_t i = 0; i < da.size(); ++i) out[i] = f(da[i], db[i]);
  return Tensor::from_data(a.shape(), std::move(out));
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = map_binary(a, b, [](float x, float y) { return x + y; });
  if (tape.tracks({&a, &b})) {
    tape.record("add", out, [a, b, out]() mutable {
      auto g = out.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = map_binary(a, b, [](float x, float y) { return x - y; });
  if (tape.tracks({&a, &b})) {
    tape.record("sub", out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = map_binary(a, b, [](float x, float y) { return x * y; });
  if (tape.tracks({&a, &b})) {
    tape.record("mul", out, [a, b, out]() mutable {
      auto g = out.grad();
      auto da = a.data();
      auto db = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * db[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * da[i];
      }
    });
  }
  return out;
}

Tensor abs(Tape& tape, const Tensor& x) {
  Tensor out = map_unary(x, [](float v) { return std::fabs(v); });
  if (tape.tracks({&x})) {
    tape.record("abs", out, [x, out]() mutable {
      auto g = out.grad();
      auto dx = x.data();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const float s = dx[i] > 0.0f ? 1.0f : (dx[i] < 0.0f ? -1.0f : 0.0f);
        gx[i] += g[i] * s;
      }
    });
  }
  return out;
}

Tensor exp_neg(Tape& tape, const Tensor& x) {
  Tensor out = map_unary(x, [](float v) { return std::exp(-v); });
  if (tape.tracks({&x})) {
    tape.record("exp_neg", out, [x, out]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i] * y[i];
    });
  }
  return out;
}

Tensor scalar_mul(Tape& tape, const Tensor& x, float s) {
  Tensor out = map_unary(x, [s](float v) { return s * v; });
  if (tape.tracks({&x})) {
    tape.record("scalar_mul", out, [x, out, s]() mutable {
      auto g = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
    });
  }
  return out;
}

Tensor leaky_relu(Tape& tape, const Tensor& x, float slope) {
  if (!(slope >= 0.0f && slope < 1.0f)) throw Error("leaky_relu: slope must lie in [0,1)");
  Tensor out = map_unary(x, [slope](float v) { return v > 0.0f ? v : slope * v; });
  if (tape.tracks({&x})) {
    tape.record("leaky_relu", out, [x, out, slope]() mutable {
      auto g = out.grad();
      auto dx = x.data();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += dx[i] > 0.0f ? g[i] : slope * g[i];
    });
  }
  return out;
}

Tensor reduce_sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  if (tape.tracks({&x})) {
    tape.record("reduce_sum", out, [x, out]() mutable {
      const float g = out.grad()[0];
      for (float& v : x.grad_buffer()) v += g;
    });
  }
  return out;
}

Tensor reduce_mean(Tape& tape, const Tensor& x) {
  const auto n = x.numel();
  if (n == 0) throw ShapeError("reduce_mean of an empty tensor");
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
  if (tape.tracks({&x})) {
    tape.record("reduce_mean", out, [x, out, n]() mutable {
      const float g = static_cast<float>(out.grad()[0] / static_cast<double>(n));
      for (float& v : x.grad_buffer()) v += g;
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4) throw ShapeError("concat_channels expects rank-4 tensors");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<float> out(static_cast<std::size_t>(n * (ca + cb) * hw));
  auto da = a.data();
  auto db = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(da.begin() + i * ca * hw, ca * hw, out.begin() + i * (ca + cb) * hw);
    std::copy_n(db.begin() + i * cb * hw, cb * hw, out.begin() + (i * (ca + cb) + ca) * hw);
  }
  Tensor result = Tensor::from_data({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out));
  if (tape.tracks({&a, &b})) {
    tape.record("concat_channels", result, [a, b, result, n, ca, cb, hw]() mutable {
      auto g = result.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < ca * hw; ++j) ga[i * ca * hw + j] += g[i * (ca + cb) * hw + j];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < cb * hw; ++j) gb[i * cb * hw + j] += g[(i * (ca + cb) + ca) * hw + j];
      }
    });
  }
  return result;
}

namespace {

// Shared implementation of the forward-difference stencils. `along_x` picks
// the last axis; otherwise the second-to-last.
Tensor forward_difference(Tape& tape, const Tensor& x, bool along_x) {
  if (x.rank() < 2) throw ShapeError("forward difference needs rank >= 2");
  const auto h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h < 2 || w < 2) throw ShapeError("forward difference needs H,W >= 2, got " + shape_str(x.shape()));
  const auto planes = x.numel() / (h * w);
  const auto oh = along_x ? h : h - 1;
  const auto ow = along_x ? w - 1 : w;
  const std::int64_t step = along_x ? 1 : w;
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;

  auto src = x.data();
  std::vector<float> out(static_cast<std::size_t>(planes * oh * ow));
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t r = 0; r < oh; ++r)
      for (std::int64_t c = 0; c < ow; ++c) {
        const auto s = p * h * w + r * w + c;
        out[static_cast<std::size_t>((p * oh + r) * ow + c)] = src[s + step] - src[s];
      }
  Tensor result = Tensor::from_data(std::move(out_shape), std::move(out));
  if (tape.tracks({&x})) {
    tape.record(along_x ? "diff_x" : "diff_y", result, [x, result, planes, h, w, oh, ow, step]() mutable {
      auto g = result.grad();
      auto gx = x.grad_buffer();
      for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t r = 0; r < oh; ++r)
          for (std::int64_t c = 0; c < ow; ++c) {
            const float gv = g[static_cast<std::size_t>((p * oh + r) * ow + c)];
            const auto s = p * h * w + r * w + c;
            gx[s + step] += gv;
            gx[s] -= gv;
          }
    });
  }
  return result;
}

}  // namespace

Tensor diff_x(Tape& tape, const Tensor& x) { return forward_difference(tape, x, true); }
Tensor diff_y(Tape& tape, const Tensor& x) { return forward_difference(tape, x, false); }

}  // namespace deformreg::nd
