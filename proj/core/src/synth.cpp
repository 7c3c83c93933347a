#include "deformreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::synth {
namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Smooth random image: a soft-edged elliptical body carrying a handful of
// bright and dark Gaussian blobs. Evaluated at continuous positions so the
// moving image can be sampled exactly instead of resampled.
struct BlobPattern {
  double cx, cy, rx, ry, edge;
  struct Blob {
    double x, y, sigma, amp;
  };
  std::vector<Blob> blobs;

  static BlobPattern draw(int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BlobPattern p;
    const double s = std::min(h, w);
    p.cx = (w - 1) * (0.5 + 0.03 * (2 * u(rng) - 1));
    p.cy = (h - 1) * (0.5 + 0.03 * (2 * u(rng) - 1));
    p.rx = w * (0.34 + 0.03 * u(rng));
    p.ry = h * (0.34 + 0.03 * u(rng));
    p.edge = 1.6;
    const int n = 5 + static_cast<int>(u(rng) * 3);
    for (int i = 0; i < n; ++i) {
      Blob b;
      const double ang = 2 * std::numbers::pi * u(rng), rad = 0.75 * std::sqrt(u(rng));
      b.x = p.cx + rad * p.rx * std::cos(ang);
      b.y = p.cy + rad * p.ry * std::sin(ang);
      b.sigma = s * (0.1 + 0.08 * u(rng));
      b.amp = (u(rng) < 0.4 ? -1.0 : 1.0) * (1.0 + 1.5 * u(rng));
      p.blobs.push_back(b);
    }
    return p;
  }

  // Elliptical radius: <= 1 inside the body.
  double radius(double x, double y) const {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return std::sqrt(dx * dx + dy * dy);
  }
  bool inside(double x, double y) const { return radius(x, y) <= 1.0; }

  double value(double x, double y) const {
    const double body = logistic((1.0 - radius(x, y)) * std::min(rx, ry) / edge);
    double t = -0.3;
    for (const auto& b : blobs) {
      const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      t += b.amp * std::exp(-d2 / (2 * b.sigma * b.sigma));
    }
    return 0.2 + 0.6 * body * (0.5 + 0.5 * logistic(t));
  }
};

void add_noise(Image2D& img, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> n(0.0, sigma);
  for (float& v : img.pixels()) v = static_cast<float>(std::clamp(v + n(rng), 0.0, 1.0));
}

LandmarkSet grid_landmarks(int h, int w) {
  LandmarkSet s;
  int idx = 0;
  for (double fy : {0.25, 0.5, 0.75})
    for (double fx : {0.25, 0.5, 0.75}) s.points.push_back({idx++, fx * (w - 1), fy * (h - 1)});
  return s;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::Translation: return "translation";
    case Family::Rotation: return "rotation";
    case Family::GaussianBumps: return "gaussian_bumps";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "translation") return Family::Translation;
  if (name == "rotation") return Family::Rotation;
  if (name == "gaussian_bumps") return Family::GaussianBumps;
  throw ConfigError("unknown deformation family '" + name + "' (translation, rotation, gaussian_bumps)");
}

void SynthSpec::validate() const {
  if (base_image.empty() && pattern != "blobs") throw ConfigError("unknown procedural pattern '" + pattern + "'");
  if (height < 8 || width < 8) throw ConfigError("synthetic images must be at least 8x8");
  if (!(max_displacement > 0.0) || max_displacement >= std::min(height, width) / 8.0) {
    throw ConfigError("max_displacement must be in (0, min(H,W)/8) = (0, " +
                      std::to_string(std::min(height, width) / 8.0) + ")");
  }
  if (!(noise_sigma >= 0.0 && noise_sigma <= 0.1)) throw ConfigError("noise_sigma must be in [0, 0.1]");
  if (pair_count < 1) throw ConfigError("pair_count must be positive");
}

DeformationField draw_field(Family family, double limit, int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DeformationField f(height, width);
  switch (family) {
    case Family::Translation: {
      const double mag = limit * (0.5 + 0.5 * u(rng)), ang = 2 * std::numbers::pi * u(rng);
      f = DeformationField::constant(height, width, static_cast<float>(mag * std::cos(ang)),
                                     static_cast<float>(mag * std::sin(ang)));
      break;
    }
    case Family::Rotation: {
      const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
      const double corner = std::hypot(cx, cy);
      const double mag = limit * (0.5 + 0.5 * u(rng));
      const double theta = (u(rng) < 0.5 ? -1.0 : 1.0) * 2.0 * std::asin(mag / (2.0 * corner));
      const double c = std::cos(theta), s = std::sin(theta);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double rx = x - cx, ry = y - cy;
          f.set(y, x, static_cast<float>(c * rx - s * ry - rx), static_cast<float>(s * rx + c * ry - ry));
        }
      }
      break;
    }
    case Family::GaussianBumps: {
      const int n = 1 + static_cast<int>(u(rng) * 3);
      struct Bump {
        double x, y, sigma, ax, ay;
      };
      std::vector<Bump> bumps;
      for (int i = 0; i < n; ++i) {
        const double ang = 2 * std::numbers::pi * u(rng);
        const double amp = 0.5 + 0.5 * u(rng);
        bumps.push_back({(0.2 + 0.6 * u(rng)) * (width - 1), (0.2 + 0.6 * u(rng)) * (height - 1), 4.0 + 8.0 * u(rng),
                         amp * std::cos(ang), amp * std::sin(ang)});
      }
      std::vector<double> dx(static_cast<std::size_t>(height) * width), dy(dx.size());
      double peak = 0.0;
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          double sx = 0, sy = 0;
          for (const auto& b : bumps) {
            const double g = std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (2 * b.sigma * b.sigma));
            sx += b.ax * g;
            sy += b.ay * g;
          }
          const std::size_t i = static_cast<std::size_t>(y) * width + x;
          dx[i] = sx;
          dy[i] = sy;
          peak = std::max(peak, std::hypot(sx, sy));
        }
      }
      const double scale = peak > 0 ? limit / peak : 0.0;
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * width + x;
          f.set(y, x, static_cast<float>(dx[i] * scale), static_cast<float>(dy[i] * scale));
        }
      break;
    }
  }
  if (!(f.max_magnitude() <= limit * (1.0 + 1e-5))) {
    throw std::logic_error("synthetic field exceeds its displacement limit");
  }
  return f;
}

ImagePair generate_pair(const SynthSpec& spec, std::size_t index) {
  std::optional<Image2D> base;
  if (!spec.base_image.empty()) base = io::read_image(spec.base_image);
  SynthSpec s = spec;
  if (base) {
    s.height = base->height();
    s.width = base->width();
  }
  s.validate();
  const int h = s.height, w = s.width;
  std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);

  ImagePair pair;
  char id[32];
  std::snprintf(id, sizeof id, "pair_%04zu", index);
  pair.id = id;
  pair.truth = draw_field(s.family, s.max_displacement, h, w, rng);
  // moving(x) = fixed(x + v(x)) with v the inverse of the truth field.
  const auto inv = warp::invert_field(*pair.truth, 200, 1e-7);

  if (base) {
    pair.fixed = *base;
    pair.moving = warp::bilinear_warp(pair.fixed, inv.inverse);
    pair.fixed_mask = SegMask::threshold(pair.fixed, 0.5f);
    pair.moving_mask = warp::warp_mask(*pair.fixed_mask, inv.inverse);
  } else {
    const BlobPattern pat = BlobPattern::draw(h, w, rng);
    std::vector<float> f(static_cast<std::size_t>(h) * w), m(f.size());
    std::vector<std::uint8_t> fm(f.size()), mm(f.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double sx = x + inv.inverse.dx(y, x), sy = y + inv.inverse.dy(y, x);
        f[i] = static_cast<float>(pat.value(x, y));
        m[i] = static_cast<float>(pat.value(sx, sy));
        fm[i] = pat.inside(x, y);
        mm[i] = pat.inside(sx, sy);
      }
    }
    pair.fixed = Image2D(h, w, std::move(f));
    pair.moving = Image2D(h, w, std::move(m));
    pair.fixed_mask = SegMask(h, w, std::move(fm));
    pair.moving_mask = SegMask(h, w, std::move(mm));
  }
  add_noise(pair.fixed, s.noise_sigma, rng);
  add_noise(pair.moving, s.noise_sigma, rng);

  pair.fixed_landmarks = grid_landmarks(h, w);
  LandmarkSet moved;
  for (const auto& q : pair.fixed_landmarks->points) {
    const Vec2 d = pair.truth->sample(q.x, q.y);
    moved.points.push_back({q.index, q.x + d.x, q.y + d.y});
  }
  pair.moving_landmarks = moved;
  return pair;
}

PairDataset generate_dataset(const SynthSpec& spec) {
  PairDataset data;
  for (int i = 0; i < spec.pair_count; ++i) data.pairs.push_back(generate_pair(spec, static_cast<std::size_t>(i)));
  return data;
}

void generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
  for (int i = 0; i < spec.pair_count; ++i) save_pair(out_dir, generate_pair(spec, static_cast<std::size_t>(i)));
}

}  // namespace deformreg::synth
