#include <doctest.h>

#include <cmath>
#include <vector>

#include "deformreg/error.hpp"
#include "deformreg/losses.hpp"
#include "deformreg/nd/ops.hpp"
#include "support.hpp"

using namespace deformreg;
using losses::Reduction;
using deformreg::testing::check_gradient;
using deformreg::testing::random_tensor;

namespace {

// Independent reference for the normal smoothness term.
double smooth_reference(const nd::Tensor& f, const nd::Tensor* fixed) {
  const auto& s = f.shape();
  const std::int64_t n = s[0], h = s[2], w = s[3];
  auto at = [&](const nd::Tensor& t, std::int64_t b, std::int64_t c, std::int64_t y, std::int64_t x) {
    const std::int64_t ch = t.shape()[1];
    return static_cast<double>(t.at(((b * ch + c) * h + y) * w + x));
  };
  double acc = 0;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t c = 0; c < 2; ++c)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          if (x + 1 < w) {
            const double wt = fixed ? std::exp(-std::fabs(at(*fixed, b, 0, y, x + 1) - at(*fixed, b, 0, y, x))) : 1.0;
            acc += wt * std::fabs(at(f, b, c, y, x + 1) - at(f, b, c, y, x));
          }
          if (y + 1 < h) {
            const double wt = fixed ? std::exp(-std::fabs(at(*fixed, b, 0, y + 1, x) - at(*fixed, b, 0, y, x))) : 1.0;
            acc += wt * std::fabs(at(f, b, c, y + 1, x) - at(f, b, c, y, x));
          }
        }
  return acc;
}

nd::Tensor column_index_field(int n) {
  std::vector<float> v(2 * n * n, 0.0f);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) v[y * n + x] = static_cast<float>(x);
  return nd::Tensor::from_data({1, 2, n, n}, v);
}

}  // namespace

TEST_CASE("photometric: identical images give zero") {
  nd::Tape tape(false);
  nd::Tensor a = random_tensor({2, 1, 8, 8}, 1, 0, 1, false);
  CHECK(losses::photometric_loss(tape, a, a, Reduction::Sum).item() == 0.0f);
  CHECK(losses::photometric_loss(tape, a, a, Reduction::MeanPerPixel).item() == 0.0f);
}

TEST_CASE("photometric: 4x4 difference of 0.5 gives Sum 8 and Mean 0.5") {
  nd::Tape tape(false);
  nd::Tensor w = nd::Tensor::full({1, 1, 4, 4}, 0.5f);
  nd::Tensor f = nd::Tensor::zeros({1, 1, 4, 4});
  CHECK(losses::photometric_loss(tape, w, f, Reduction::Sum).item() == doctest::Approx(8.0));
  CHECK(losses::photometric_loss(tape, w, f, Reduction::MeanPerPixel).item() == doctest::Approx(0.5));
}

TEST_CASE("Sum equals Mean times N*H*W for every term") {
  nd::Tape tape(false);
  nd::Tensor a = random_tensor({2, 1, 6, 5}, 2, 0, 1, false);
  nd::Tensor b = random_tensor({2, 1, 6, 5}, 3, 0, 1, false);
  nd::Tensor f = random_tensor({2, 2, 6, 5}, 4, -2, 2, false);
  const double count = 2 * 6 * 5;
  CHECK(losses::photometric_loss(tape, a, b, Reduction::Sum).item() ==
        doctest::Approx(count * losses::photometric_loss(tape, a, b, Reduction::MeanPerPixel).item()).epsilon(1e-6));
  CHECK(losses::smooth_n(tape, f, Reduction::Sum).item() ==
        doctest::Approx(count * losses::smooth_n(tape, f, Reduction::MeanPerPixel).item()).epsilon(1e-6));
  CHECK(losses::smooth_e(tape, f, a, Reduction::Sum).item() ==
        doctest::Approx(count * losses::smooth_e(tape, f, a, Reduction::MeanPerPixel).item()).epsilon(1e-6));
  CHECK(losses::overlap_loss(tape, a, b, Reduction::Sum).item() ==
        doctest::Approx(count * losses::overlap_loss(tape, a, b, Reduction::MeanPerPixel).item()).epsilon(1e-6));
}

TEST_CASE("smooth_n: constant field gives zero, column-index field gives 6") {
  nd::Tape tape(false);
  CHECK(losses::smooth_n(tape, nd::Tensor::full({1, 2, 5, 5}, 1.7f)).item() == 0.0f);
  CHECK(losses::smooth_n(tape, column_index_field(3)).item() == doctest::Approx(6.0));
}

TEST_CASE("smooth_n: matches a direct double-precision sum and is absolutely homogeneous") {
  nd::Tape tape(false);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    nd::Tensor f = random_tensor({2, 2, 7, 9}, seed, -3, 3, false);
    const double s = losses::smooth_n(tape, f).item();
    CHECK(s == doctest::Approx(smooth_reference(f, nullptr)).epsilon(1e-5));
    CHECK(losses::smooth_n(tape, nd::scalar_mul(tape, f, -2.5f)).item() == doctest::Approx(2.5 * s).epsilon(1e-5));
  }
}

TEST_CASE("smooth_n: rejects fields narrower than 2") {
  nd::Tape tape(false);
  CHECK_THROWS_AS(losses::smooth_n(tape, nd::Tensor::zeros({1, 2, 1, 4})), ShapeError);
  CHECK_THROWS_AS(losses::smooth_n(tape, nd::Tensor::zeros({1, 3, 4, 4})), ShapeError);
}

TEST_CASE("smooth_e: flat fixed image reduces to smooth_n") {
  nd::Tape tape(false);
  nd::Tensor f = random_tensor({1, 2, 6, 6}, 7, -2, 2, false);
  nd::Tensor flat = nd::Tensor::full({1, 1, 6, 6}, 0.4f);
  CHECK(losses::smooth_e(tape, f, flat).item() == doctest::Approx(losses::smooth_n(tape, f).item()).epsilon(1e-6));
}

TEST_CASE("smooth_e: an intensity step of 1 weights the crossing difference by e^-1") {
  nd::Tape tape(false);
  // fixed: columns 0..1 are 0, column 2 is 1. field dx jumps by 1 between columns 1 and 2.
  std::vector<float> img(9), fld(18, 0.0f);
  for (int y = 0; y < 3; ++y) {
    img[y * 3 + 2] = 1.0f;
    fld[y * 3 + 2] = 1.0f;
  }
  nd::Tensor fixed = nd::Tensor::from_data({1, 1, 3, 3}, img);
  nd::Tensor field = nd::Tensor::from_data({1, 2, 3, 3}, fld);
  CHECK(losses::smooth_n(tape, field).item() == doctest::Approx(3.0));
  CHECK(losses::smooth_e(tape, field, fixed).item() == doctest::Approx(3.0 * std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("smooth_e: matches a direct sum on random inputs") {
  nd::Tape tape(false);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    nd::Tensor f = random_tensor({2, 2, 5, 8}, seed, -3, 3, false);
    nd::Tensor img = random_tensor({2, 1, 5, 8}, seed + 50, 0, 1, false);
    CHECK(losses::smooth_e(tape, f, img).item() == doctest::Approx(smooth_reference(f, &img)).epsilon(1e-5));
  }
}

TEST_CASE("overlap: identical masks give 0, complementary 4x4 masks give 16") {
  nd::Tape tape(false);
  std::vector<float> a(16), b(16);
  for (int i = 0; i < 16; ++i) {
    a[i] = (i % 3 == 0) ? 1.0f : 0.0f;
    b[i] = 1.0f - a[i];
  }
  nd::Tensor ma = nd::Tensor::from_data({1, 1, 4, 4}, a);
  nd::Tensor mb = nd::Tensor::from_data({1, 1, 4, 4}, b);
  CHECK(losses::overlap_loss(tape, ma, ma).item() == 0.0f);
  CHECK(losses::overlap_loss(tape, ma, mb).item() == doctest::Approx(16.0));
}

TEST_CASE("epe: zero for equal fields, 5 for constant error (3,4)") {
  nd::Tape tape(false);
  nd::Tensor p = random_tensor({2, 2, 4, 4}, 5, -2, 2, false);
  CHECK(losses::epe_loss(tape, p, p).item() == doctest::Approx(1e-8).epsilon(1e-3));
  std::vector<float> t(32);
  for (int i = 0; i < 16; ++i) {
    t[i] = 3.0f;
    t[16 + i] = 4.0f;
  }
  nd::Tensor target = nd::Tensor::from_data({1, 2, 4, 4}, t);
  CHECK(losses::epe_loss(tape, nd::Tensor::zeros({1, 2, 4, 4}), target).item() == doctest::Approx(5.0));
}

TEST_CASE("defaults and validation") {
  const auto c = losses::LossConfig::defaults(4);
  CHECK(c.scale_count() == 4);
  for (int s = 0; s < 4; ++s) {
    CHECK(c.alpha[s] == 1.0);
    CHECK(c.beta[s] == 0.05);
    CHECK(c.gamma[s] == 0.0);
  }
  CHECK_FALSE(c.uses_masks());
  auto bad = c;
  bad.beta[1] = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.gamma.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("total_loss: photometric 8 and smoothness 2 combine to 8.1 under default weights") {
  nd::Tape tape(false);
  std::vector<float> fld(32, 0.0f);
  for (int y = 0; y < 4; ++y) fld[y * 4 + 3] = 0.5f;  // four x-differences of 0.5
  losses::ScaleTerms terms{nd::Tensor::full({1, 1, 4, 4}, 0.5f), nd::Tensor::zeros({1, 1, 4, 4}),
                           nd::Tensor::from_data({1, 2, 4, 4}, fld), {}, {}};
  auto cfg = losses::LossConfig::defaults(1);
  cfg.reduction = Reduction::Sum;
  const auto r = losses::total_loss(tape, std::span(&terms, 1), cfg);
  CHECK(r.report.photometric[0] == doctest::Approx(8.0));
  CHECK(r.report.smooth[0] == doctest::Approx(2.0));
  CHECK(r.total.item() == doctest::Approx(8.1));
  CHECK(r.report.total == doctest::Approx(8.1));
  CHECK(r.report.weighted_total(cfg) == doctest::Approx(8.1));
}

TEST_CASE("total_loss: identical images and zero field give exactly zero") {
  nd::Tape tape(false);
  nd::Tensor img = random_tensor({1, 1, 8, 8}, 3, 0, 1, false);
  nd::Tensor mask = random_tensor({1, 1, 8, 8}, 4, 0, 1, false);
  std::vector<losses::ScaleTerms> terms{{img, img, nd::Tensor::zeros({1, 2, 8, 8}), mask, mask}};
  auto cfg = losses::LossConfig::defaults(1);
  cfg.gamma[0] = 1.0;
  const auto r = losses::total_loss(tape, terms, cfg);
  CHECK(std::fabs(r.total.item()) <= 1e-8);
  CHECK(r.report.overlap[0] == 0.0);
}

TEST_CASE("total_loss: scale weights apply per scale") {
  nd::Tape tape(false);
  std::vector<losses::ScaleTerms> terms{
      {nd::Tensor::full({1, 1, 4, 4}, 0.5f), nd::Tensor::zeros({1, 1, 4, 4}), nd::Tensor::zeros({1, 2, 4, 4}), {}, {}},
      {nd::Tensor::full({1, 1, 2, 2}, 0.25f), nd::Tensor::zeros({1, 1, 2, 2}), nd::Tensor::zeros({1, 2, 2, 2}), {}, {}}};
  auto cfg = losses::LossConfig::defaults(2);
  cfg.reduction = Reduction::Sum;
  cfg.alpha = {1.0, 3.0};
  CHECK(losses::total_loss(tape, terms, cfg).total.item() == doctest::Approx(8.0 + 3.0 * 1.0));
  cfg.alpha = {1.0};
  CHECK_THROWS(losses::total_loss(tape, terms, cfg));
}

TEST_CASE("loss gradients match central differences away from kinks") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    // Small magnitudes keep the float-rounded loss accurate enough for h = 1e-3.
    nd::Tensor field = random_tensor({1, 2, 6, 6}, seed, -0.5f, 0.5f);
    nd::Tensor warped = random_tensor({1, 1, 6, 6}, seed + 1, 0, 1);
    nd::Tensor target = random_tensor({1, 2, 6, 6}, seed + 2, -2, 2, false);
    nd::Tensor fixed = random_tensor({1, 1, 6, 6}, seed + 3, 0, 1, false);

    auto smooth = [&](nd::Tape& t) { return losses::smooth_e(t, field, fixed, Reduction::MeanPerPixel); };
    // Entries whose neighbours differ by less than h + 1e-4 sit on an abs kink.
    auto near_equal_neighbour = [&](std::size_t i) {
      const std::int64_t x = i % 6, y = (i / 6) % 6;
      const float v = field.at(i);
      for (auto [dy, dx] : {std::pair{0, 1}, {0, -1}, {1, 0}, {-1, 0}}) {
        const std::int64_t yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= 6 || xx < 0 || xx >= 6) continue;
        if (std::fabs(field.at(i + dy * 6 + dx) - v) < 2 * (1e-3 + 1e-4)) return true;
      }
      return false;
    };
    CHECK(check_gradient(smooth, field, 1e-3, 1e-3, 1e-2, near_equal_neighbour).max_violation <= 1.0);

    auto photo = [&](nd::Tape& t) { return losses::photometric_loss(t, warped, fixed, Reduction::MeanPerPixel); };
    auto on_kink = [&](std::size_t i) { return std::fabs(warped.at(i) - fixed.at(i)) < 1e-3 + 1e-4; };
    CHECK(check_gradient(photo, warped, 1e-3, 1e-3, 1e-2, on_kink).max_violation <= 1.0);

    auto epe = [&](nd::Tape& t) { return losses::epe_loss(t, field, target); };
    CHECK(check_gradient(epe, field, 1e-3, 1e-3, 1e-2).max_violation <= 1.0);
  }
}
