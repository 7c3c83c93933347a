#include <Eigen/Core>

#include "deformreg/error.hpp"
#include "deformreg/nd/ops.hpp"
#include "deformreg/parallel.hpp"

namespace deformreg::nd {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Geometry of a cross-correlation from an (h, w) grid to an (oh, ow) grid.
struct Geometry {
  std::int64_t channels, h, w, kh, kw, stride, pad, oh, ow;
  std::int64_t patch() const { return channels * kh * kw; }
};

void im2col(const float* src, const Geometry& g, float* cols) {
  const auto opix = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.channels; ++c)
    for (std::int64_t i = 0; i < g.kh; ++i)
      for (std::int64_t j = 0; j < g.kw; ++j) {
        float* row = cols + ((c * g.kh + i) * g.kw + j) * opix;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const auto y = oy * g.stride - g.pad + i;
          float* dst = row + oy * g.ow;
          if (y < 0 || y >= g.h) {
            std::fill_n(dst, g.ow, 0.0f);
            continue;
          }
          const float* line = src + (c * g.h + y) * g.w;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const auto x = ox * g.stride - g.pad + j;
            dst[ox] = (x >= 0 && x < g.w) ? line[x] : 0.0f;
          }
        }
      }
}

// Adjoint of im2col: scatters columns back onto the (channels, h, w) grid.
void col2im(const float* cols, const Geometry& g, float* dst) {
  const auto opix = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.channels; ++c)
    for (std::int64_t i = 0; i < g.kh; ++i)
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const float* row = cols + ((c * g.kh + i) * g.kw + j) * opix;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const auto y = oy * g.stride - g.pad + i;
          if (y < 0 || y >= g.h) continue;
          float* line = dst + (c * g.h + y) * g.w;
          const float* src = row + oy * g.ow;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const auto x = ox * g.stride - g.pad + j;
            if (x >= 0 && x < g.w) line[x] += src[ox];
          }
        }
      }
}

void check_conv_args(const char* op, const Tensor& input, const Tensor& weight, const Tensor& bias,
                     std::int64_t in_channels_axis, std::int64_t out_channels_axis, int stride, int padding) {
  if (input.rank() != 4) throw ShapeError(std::string(op) + ": input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (weight.rank() != 4) throw ShapeError(std::string(op) + ": weight must be rank 4, got " + shape_str(weight.shape()));
  if (weight.dim(static_cast<std::size_t>(in_channels_axis)) != input.dim(1)) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(input.dim(1)) + " channels but weight " +
                     shape_str(weight.shape()) + " expects " +
                     std::to_string(weight.dim(static_cast<std::size_t>(in_channels_axis))));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(static_cast<std::size_t>(out_channels_axis)))) {
    throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
  if (padding < 0) throw ShapeError(std::string(op) + ": padding must be >= 0");
}

// Sums per-sample partial gradients in sample order into dst.
void ordered_accumulate(const std::vector<std::vector<float>>& parts, std::span<float> dst) {
  for (const auto& p : parts)
    for (std::size_t i = 0; i < p.size(); ++i) dst[i] += p[i];
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  check_conv_args("conv2d", input, weight, bias, 1, 0, stride, padding);
  const auto n = input.dim(0);
  Geometry g{input.dim(1), input.dim(2), input.dim(3), weight.dim(2), weight.dim(3), stride, padding, 0, 0};
  const auto span_h = g.h + 2 * g.pad - g.kh;
  const auto span_w = g.w + 2 * g.pad - g.kw;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                     shape_str(input.shape()));
  }
  g.oh = span_h / g.stride + 1;
  g.ow = span_w / g.stride + 1;
  const auto k = weight.dim(0);
  const auto opix = g.oh * g.ow;
  const auto in_plane = g.channels * g.h * g.w;

  std::vector<float> out(static_cast<std::size_t>(n * k * opix));
  {
    auto x = input.data();
    const ConstMatMap wmat(weight.data().data(), k, g.patch());
    const float* b = bias.defined() ? bias.data().data() : nullptr;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
      std::vector<float> cols(static_cast<std::size_t>(g.patch() * opix));
      im2col(x.data() + static_cast<std::int64_t>(s) * in_plane, g, cols.data());
      MatMap o(out.data() + static_cast<std::int64_t>(s) * k * opix, k, opix);
      o.noalias() = wmat * ConstMatMap(cols.data(), g.patch(), opix);
      if (b != nullptr)
        for (std::int64_t r = 0; r < k; ++r) o.row(r).array() += b[r];
    });
  }
  Tensor result = Tensor::from_data({n, k, g.oh, g.ow}, std::move(out));

  if (tape.tracks({&input, &weight, &bias})) {
    tape.record("conv2d", result, [input, weight, bias, result, g, n, k, opix, in_plane]() mutable {
      auto gout = result.grad();
      auto x = input.data();
      const ConstMatMap wmat(weight.data().data(), k, g.patch());
      const bool want_x = input.requires_grad();
      const bool want_w = weight.requires_grad();
      const bool want_b = bias.defined() && bias.requires_grad();
      std::span<float> gx = want_x ? input.grad_buffer() : std::span<float>{};
      std::vector<std::vector<float>> gw_parts(want_w ? static_cast<std::size_t>(n) : 0);

      parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
        const ConstMatMap go(gout.data() + static_cast<std::int64_t>(s) * k * opix, k, opix);
        std::vector<float> cols(static_cast<std::size_t>(g.patch() * opix));
        if (want_w) {
          im2col(x.data() + static_cast<std::int64_t>(s) * in_plane, g, cols.data());
          auto& part = gw_parts[s];
          part.assign(static_cast<std::size_t>(k * g.patch()), 0.0f);
          MatMap(part.data(), k, g.patch()).noalias() = go * ConstMatMap(cols.data(), g.patch(), opix).transpose();
        }
        if (want_x) {
          MatMap(cols.data(), g.patch(), opix).noalias() = wmat.transpose() * go;
          col2im(cols.data(), g, gx.data() + static_cast<std::int64_t>(s) * in_plane);
        }
      });
      if (want_w) ordered_accumulate(gw_parts, weight.grad_buffer());
      if (want_b) {
        auto gb = bias.grad_buffer();
        for (std::int64_t r = 0; r < k; ++r) {
          double acc = 0.0;
          for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t p = 0; p < opix; ++p) acc += gout[(s * k + r) * opix + p];
          gb[r] += static_cast<float>(acc);
        }
      }
    });
  }
  return result;
}

Tensor conv2d_transpose(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding) {
  check_conv_args("conv2d_transpose", input, weight, bias, 0, 1, stride, padding);
  const auto n = input.dim(0);
  const auto cin = input.dim(1);
  const auto h = input.dim(2), w = input.dim(3);
  const auto k = weight.dim(1);
  const auto kh = weight.dim(2), kw = weight.dim(3);
  const auto oh = (h - 1) * stride - 2 * padding + kh;
  const auto ow = (w - 1) * stride - 2 * padding + kw;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d_transpose: empty output for input " + shape_str(input.shape()));
  // The output grid plays the role of a conv input whose correlation grid is (h, w).
  const Geometry g{k, oh, ow, kh, kw, stride, padding, h, w};
  const auto ipix = h * w;
  const auto out_plane = k * oh * ow;

  std::vector<float> out(static_cast<std::size_t>(n * out_plane), 0.0f);
  {
    auto x = input.data();
    const ConstMatMap wmat(weight.data().data(), cin, g.patch());
    const float* b = bias.defined() ? bias.data().data() : nullptr;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
      std::vector<float> cols(static_cast<std::size_t>(g.patch() * ipix));
      MatMap(cols.data(), g.patch(), ipix).noalias() =
          wmat.transpose() * ConstMatMap(x.data() + static_cast<std::int64_t>(s) * cin * ipix, cin, ipix);
      float* dst = out.data() + static_cast<std::int64_t>(s) * out_plane;
      col2im(cols.data(), g, dst);
      if (b != nullptr)
        for (std::int64_t c = 0; c < k; ++c)
          for (std::int64_t p = 0; p < oh * ow; ++p) dst[c * oh * ow + p] += b[c];
    });
  }
  Tensor result = Tensor::from_data({n, k, oh, ow}, std::move(out));

  if (tape.tracks({&input, &weight, &bias})) {
    tape.record("conv2d_transpose", result, [input, weight, bias, result, g, n, cin, k, ipix, out_plane]() mutable {
      auto gout = result.grad();
      auto x = input.data();
      const ConstMatMap wmat(weight.data().data(), cin, g.patch());
      const bool want_x = input.requires_grad();
      const bool want_w = weight.requires_grad();
      const bool want_b = bias.defined() && bias.requires_grad();
      std::span<float> gx = want_x ? input.grad_buffer() : std::span<float>{};
      std::vector<std::vector<float>> gw_parts(want_w ? static_cast<std::size_t>(n) : 0);

      parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
        std::vector<float> cols(static_cast<std::size_t>(g.patch() * ipix));
        im2col(gout.data() + static_cast<std::int64_t>(s) * out_plane, g, cols.data());
        const ConstMatMap c(cols.data(), g.patch(), ipix);
        if (want_x) {
          MatMap(gx.data() + static_cast<std::int64_t>(s) * cin * ipix, cin, ipix).noalias() += wmat * c;
        }
        if (want_w) {
          auto& part = gw_parts[s];
          part.assign(static_cast<std::size_t>(cin * g.patch()), 0.0f);
          MatMap(part.data(), cin, g.patch()).noalias() =
              ConstMatMap(x.data() + static_cast<std::int64_t>(s) * cin * ipix, cin, ipix) * c.transpose();
        }
      });
      if (want_w) ordered_accumulate(gw_parts, weight.grad_buffer());
      if (want_b) {
        auto gb = bias.grad_buffer();
        const auto plane = out_plane / k;
        for (std::int64_t c = 0; c < k; ++c) {
          double acc = 0.0;
          for (std::int64_t s = 0; s < n; ++s)
            for (std::int64_t p = 0; p < plane; ++p) acc += gout[s * out_plane + c * plane + p];
          gb[c] += static_cast<float>(acc);
        }
      }
    });
  }
  return result;
}

}  // namespace deformreg::nd
