#include "deformreg/warp.hpp"

#include <algorithm>
#include <cmath>

#include "deformreg/error.hpp"

namespace deformreg::warp {
namespace {

// Bilinear stencil of one clamped sample position.
struct Stencil {
  std::int64_t x0, x1, y0, y1;
  double wx, wy;
  bool inside_x, inside_y;  // false where the coordinate was clamped
};

Stencil make_stencil(double sx, double sy, std::int64_t h, std::int64_t w) {
  Stencil s{};
  const double maxx = static_cast<double>(w - 1), maxy = static_cast<double>(h - 1);
  s.inside_x = sx >= 0.0 && sx <= maxx;
  s.inside_y = sy >= 0.0 && sy <= maxy;
  const double px = std::clamp(sx, 0.0, maxx);
  const double py = std::clamp(sy, 0.0, maxy);
  s.x0 = static_cast<std::int64_t>(std::floor(px));
  s.y0 = static_cast<std::int64_t>(std::floor(py));
  s.x1 = std::min(s.x0 + 1, w - 1);
  s.y1 = std::min(s.y0 + 1, h - 1);
  s.wx = px - static_cast<double>(s.x0);
  s.wy = py - static_cast<double>(s.y0);
  return s;
}

void check_warp_shapes(const nd::Tensor& moving, const nd::Tensor& field) {
  if (moving.rank() != 4 || field.rank() != 4 || field.dim(1) != 2 || moving.dim(0) != field.dim(0) ||
      moving.dim(2) != field.dim(2) || moving.dim(3) != field.dim(3)) {
    throw ShapeError("bilinear_warp: moving " + nd::shape_str(moving.shape()) + " and field " +
                     nd::shape_str(field.shape()) + " do not match ([N,C,H,W] with [N,2,H,W])");
  }
}

// 1-D linear interpolation table for factor-2 upsampling of n samples.
struct Taps {
  std::vector<std::int64_t> i0, i1;
  std::vector<double> w;
};

Taps upsample_taps(std::int64_t n) {
  Taps t;
  const auto m = 2 * n;
  t.i0.resize(m);
  t.i1.resize(m);
  t.w.resize(m);
  for (std::int64_t i = 0; i < m; ++i) {
    const double src = std::clamp((static_cast<double>(i) + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(n - 1));
    t.i0[i] = static_cast<std::int64_t>(std::floor(src));
    t.i1[i] = std::min(t.i0[i] + 1, n - 1);
    t.w[i] = src - static_cast<double>(t.i0[i]);
  }
  return t;
}

}  // namespace

nd::Tensor bilinear_warp(nd::Tape& tape, const nd::Tensor& moving, const nd::Tensor& field) {
  check_warp_shapes(moving, field);
  const auto n = moving.dim(0), c = moving.dim(1), h = moving.dim(2), w = moving.dim(3);
  const auto plane = h * w;
  auto img = moving.data();
  auto fld = field.data();
  std::vector<float> out(static_cast<std::size_t>(n * c * plane));

  for (std::int64_t b = 0; b < n; ++b) {
    const float* fx = fld.data() + b * 2 * plane;
    const float* fy = fx + plane;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const auto p = y * w + x;
        const Stencil s = make_stencil(static_cast<double>(x) + fx[p], static_cast<double>(y) + fy[p], h, w);
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const float* src = img.data() + (b * c + ch) * plane;
          const double top = (1.0 - s.wx) * src[s.y0 * w + s.x0] + s.wx * src[s.y0 * w + s.x1];
          const double bot = (1.0 - s.wx) * src[s.y1 * w + s.x0] + s.wx * src[s.y1 * w + s.x1];
          out[static_cast<std::size_t>((b * c + ch) * plane + p)] = static_cast<float>((1.0 - s.wy) * top + s.wy * bot);
        }
      }
  }
  nd::Tensor result = nd::Tensor::from_data(moving.shape(), std::move(out));

  if (tape.tracks({&moving, &field})) {
    tape.record("bilinear_warp", result, [moving, field, result, n, c, h, w, plane]() mutable {
      auto g = result.grad();
      auto img = moving.data();
      auto fld = field.data();
      const bool want_img = moving.requires_grad();
      const bool want_fld = field.requires_grad();
      std::span<float> gimg = want_img ? moving.grad_buffer() : std::span<float>{};
      std::span<float> gfld = want_fld ? field.grad_buffer() : std::span<float>{};
      for (std::int64_t b = 0; b < n; ++b) {
        const float* fx = fld.data() + b * 2 * plane;
        const float* fy = fx + plane;
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x) {
            const auto p = y * w + x;
            const Stencil s = make_stencil(static_cast<double>(x) + fx[p], static_cast<double>(y) + fy[p], h, w);
            double gx = 0.0, gy = 0.0;
            for (std::int64_t ch = 0; ch < c; ++ch) {
              const auto base = (b * c + ch) * plane;
              const double go = g[static_cast<std::size_t>(base + p)];
              if (go == 0.0) continue;
              if (want_img) {
                float* dst = gimg.data() + base;
                dst[s.y0 * w + s.x0] += static_cast<float>(go * (1.0 - s.wy) * (1.0 - s.wx));
                dst[s.y0 * w + s.x1] += static_cast<float>(go * (1.0 - s.wy) * s.wx);
                dst[s.y1 * w + s.x0] += static_cast<float>(go * s.wy * (1.0 - s.wx));
                dst[s.y1 * w + s.x1] += static_cast<float>(go * s.wy * s.wx);
              }
              if (want_fld) {
                const float* src = img.data() + base;
                const double i00 = src[s.y0 * w + s.x0], i01 = src[s.y0 * w + s.x1];
                const double i10 = src[s.y1 * w + s.x0], i11 = src[s.y1 * w + s.x1];
                if (s.inside_x) gx += go * ((1.0 - s.wy) * (i01 - i00) + s.wy * (i11 - i10));
                if (s.inside_y) gy += go * ((1.0 - s.wx) * (i10 - i00) + s.wx * (i11 - i01));
              }
            }
            if (want_fld) {
              gfld[static_cast<std::size_t>(b * 2 * plane + p)] += static_cast<float>(gx);
              gfld[static_cast<std::size_t>(b * 2 * plane + plane + p)] += static_cast<float>(gy);
            }
          }
      }
    });
  }
  return result;
}

Image2D bilinear_warp(const Image2D& moving, const DeformationField& field) {
  if (moving.height() != field.height() || moving.width() != field.width()) {
    throw ShapeError("bilinear_warp: image " + std::to_string(moving.height()) + "x" + std::to_string(moving.width()) +
                     " vs field " + std::to_string(field.height()) + "x" + std::to_string(field.width()));
  }
  nd::Tape inference(false);
  return image_from_tensor(bilinear_warp(inference, to_tensor(moving), to_tensor(field)));
}

SegMask warp_mask(const SegMask& mask, const DeformationField& field) {
  return SegMask::threshold(bilinear_warp(mask.to_image(), field), 0.5f);
}

nd::Tensor upsample_field(nd::Tape& tape, const nd::Tensor& field) {
  if (field.rank() != 4 || field.dim(1) != 2) {
    throw ShapeError("upsample_field expects [N,2,H,W], got " + nd::shape_str(field.shape()));
  }
  const auto n = field.dim(0), h = field.dim(2), w = field.dim(3);
  const auto oh = 2 * h, ow = 2 * w;
  const Taps ty = upsample_taps(h), tx = upsample_taps(w);
  auto src = field.data();
  std::vector<float> out(static_cast<std::size_t>(n * 2 * oh * ow));
  for (std::int64_t p = 0; p < n * 2; ++p) {
    const float* s = src.data() + p * h * w;
    float* d = out.data() + p * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x) {
        const double top = (1.0 - tx.w[x]) * s[ty.i0[y] * w + tx.i0[x]] + tx.w[x] * s[ty.i0[y] * w + tx.i1[x]];
        const double bot = (1.0 - tx.w[x]) * s[ty.i1[y] * w + tx.i0[x]] + tx.w[x] * s[ty.i1[y] * w + tx.i1[x]];
        d[y * ow + x] = static_cast<float>(2.0 * ((1.0 - ty.w[y]) * top + ty.w[y] * bot));
      }
  }
  nd::Tensor result = nd::Tensor::from_data({n, 2, oh, ow}, std::move(out));
  if (tape.tracks({&field})) {
    tape.record("upsample_field", result, [field, result, n, h, w, oh, ow, ty, tx]() mutable {
      auto g = result.grad();
      auto gf = field.grad_buffer();
      for (std::int64_t p = 0; p < n * 2; ++p) {
        const float* gs = g.data() + p * oh * ow;
        float* d = gf.data() + p * h * w;
        for (std::int64_t y = 0; y < oh; ++y)
          for (std::int64_t x = 0; x < ow; ++x) {
            const double v = 2.0 * gs[y * ow + x];
            const double a = 1.0 - ty.w[y], b = ty.w[y], l = 1.0 - tx.w[x], r = tx.w[x];
            d[ty.i0[y] * w + tx.i0[x]] += static_cast<float>(v * a * l);
            d[ty.i0[y] * w + tx.i1[x]] += static_cast<float>(v * a * r);
            d[ty.i1[y] * w + tx.i0[x]] += static_cast<float>(v * b * l);
            d[ty.i1[y] * w + tx.i1[x]] += static_cast<float>(v * b * r);
          }
      }
    });
  }
  return result;
}

DeformationField upsample_field(const DeformationField& field) {
  nd::Tape inference(false);
  return field_from_tensor(upsample_field(inference, to_tensor(field)));
}

nd::Tensor downsample_field(const nd::Tensor& field) {
  if (field.rank() != 4 || field.dim(1) != 2 || field.dim(2) % 2 != 0 || field.dim(3) % 2 != 0) {
    throw ShapeError("downsample_field expects [N,2,H,W] with even H,W, got " + nd::shape_str(field.shape()));
  }
  const auto n = field.dim(0), h = field.dim(2), w = field.dim(3);
  const auto oh = h / 2, ow = w / 2;
  auto src = field.data();
  std::vector<float> out(static_cast<std::size_t>(n * 2 * oh * ow));
  for (std::int64_t p = 0; p < n * 2; ++p) {
    const float* s = src.data() + p * h * w;
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x) {
        const double sum = double(s[2 * y * w + 2 * x]) + s[2 * y * w + 2 * x + 1] + s[(2 * y + 1) * w + 2 * x] +
                           s[(2 * y + 1) * w + 2 * x + 1];
        out[static_cast<std::size_t>(p * oh * ow + y * ow + x)] = static_cast<float>(sum * 0.125);
      }
  }
  return nd::Tensor::from_data({n, 2, oh, ow}, std::move(out));
}

DeformationField downsample_field(const DeformationField& field) { return field_from_tensor(downsample_field(to_tensor(field))); }

InversionResult invert_field(const DeformationField& field, int max_iterations, double tolerance) {
  const int h = field.height(), w = field.width();
  InversionResult r;
  r.inverse = DeformationField(h, w);
  for (int it = 0; it < max_iterations; ++it) {
    DeformationField next(h, w);
    double update = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double vx = r.inverse.dx(y, x), vy = r.inverse.dy(y, x);
        const Vec2 u = field.sample(x + vx, y + vy);
        next.set(y, x, static_cast<float>(-u.x), static_cast<float>(-u.y));
        update = std::max(update, std::hypot(-u.x - vx, -u.y - vy));
      }
    r.inverse = std::move(next);
    r.iterations = it + 1;
    r.last_update = update;
    if (update < tolerance) {
      r.converged = true;
      break;
    }
  }
  double residual = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double vx = r.inverse.dx(y, x), vy = r.inverse.dy(y, x);
      const Vec2 u = field.sample(x + vx, y + vy);
      residual = std::max(residual, std::hypot(u.x + vx, u.y + vy));
    }
  r.residual = residual;
  return r;
}

LandmarkSet apply_to_landmarks(const LandmarkSet& moving_points, const InversionResult& inverse) {
  moving_points.check_bounds(inverse.inverse.height(), inverse.inverse.width());
  LandmarkSet out = moving_points;
  for (auto& p : out.points) {
    const Vec2 v = inverse.inverse.sample(p.x, p.y);
    p.x += v.x;
    p.y += v.y;
  }
  return out;
}

LandmarkSet apply_to_landmarks(const LandmarkSet& moving_points, const DeformationField& field) {
  return apply_to_landmarks(moving_points, invert_field(field));
}

}  // namespace deformreg::warp
