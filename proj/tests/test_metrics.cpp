#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "s2v/error.hpp"
#include "s2v/metrics.hpp"

using namespace s2v;

namespace {

Image2D random_image(int w, int h, std::uint64_t seed) {
  Image2D img(SliceGeometry::centered({w, h}, 0.5));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : img.intensities) x = u(rng);
  return img;
}

Image2D smooth_image(int w, int h) {
  Image2D img(SliceGeometry::centered({w, h}, 0.5));
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i)
      img.at(i, j) = 0.5 + 0.3 * std::sin(0.07 * i) * std::cos(0.05 * j) + 0.1 * std::sin(0.013 * i * j);
  return img;
}

// Two-pass brute force over every window, restricted to the joint mask.
double lncc_oracle(const Image2D& a, const Image2D& b, int kernel) {
  const int w = a.geometry.dims[0], h = a.geometry.dims[1], r = kernel / 2;
  double total = 0.0;
  int n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!(a.valid(x, y) && b.valid(x, y))) continue;
      std::vector<double> va, vb;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
          if (a.valid(xx, yy) && b.valid(xx, yy)) {
            va.push_back(a.at(xx, yy));
            vb.push_back(b.at(xx, yy));
          }
      if (va.size() < 2) continue;
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        ma += va[i];
        mb += vb[i];
      }
      ma /= va.size();
      mb /= vb.size();
      double saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        saa += (va[i] - ma) * (va[i] - ma);
        sbb += (vb[i] - mb) * (vb[i] - mb);
        sab += (va[i] - ma) * (vb[i] - mb);
      }
      if (saa < 1e-12 || sbb < 1e-12) continue;
      total += sab / std::sqrt(saa * sbb);
      ++n;
    }
  return n ? total / n : 0.0;
}

}  // namespace

TEST_CASE("lncc matches a brute-force oracle") {
  const Image2D a = random_image(37, 29, 1);
  Image2D b = random_image(37, 29, 2);
  for (int j = 0; j < 29; ++j)
    for (int i = 0; i < 37; ++i) b.at(i, j) = 0.6 * b.at(i, j) + 0.4 * a.at(i, j);
  // Irregular joint mask: a disc and a polygonal cut.
  Image2D am = a, bm = b;
  for (int j = 0; j < 29; ++j)
    for (int i = 0; i < 37; ++i) {
      if ((i - 18) * (i - 18) + (j - 14) * (j - 14) > 14 * 14) am.mask[am.geometry.index(i, j)] = 0;
      if (i + 2 * j < 12) bm.mask[bm.geometry.index(i, j)] = 0;
    }
  for (int kernel : {3, 5, 9, 51}) {
    CHECK(lncc(a, b, kernel).value == doctest::Approx(lncc_oracle(a, b, kernel)).epsilon(1e-10));
    CHECK(lncc(am, bm, kernel).value == doctest::Approx(lncc_oracle(am, bm, kernel)).epsilon(1e-10));
  }
}

TEST_CASE("lncc streaming sums stay exact on large rasters") {
  const Image2D a = random_image(90, 75, 3);
  const Image2D b = smooth_image(90, 75);
  CHECK(lncc(a, b, 7).value == doctest::Approx(lncc_oracle(a, b, 7)).epsilon(1e-10));
}

TEST_CASE("lncc self-similarity and affine invariance") {
  const Image2D x = smooth_image(60, 50);
  const MetricResult self = lncc(x, x, 9);
  CHECK(self.valid);
  CHECK(self.status == MetricStatus::Ok);
  CHECK(std::abs(self.value - 1.0) < 1e-9);
  CHECK(self.overlap_count == 3000);

  Image2D y = x;
  for (double& v : y.intensities) v = 3.7 * v + 11.0;
  CHECK(std::abs(lncc(x, y, 9).value - 1.0) < 1e-9);
  for (double& v : y.intensities) v = -v;
  CHECK(std::abs(lncc(x, y, 9).value + 1.0) < 1e-9);
}

TEST_CASE("lncc is symmetric") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    Image2D a = random_image(41, 33, seed), b = random_image(41, 33, seed + 100);
    a.mask[5] = 0;
    b.mask[700] = 0;
    CHECK(std::abs(lncc(a, b, 11).value - lncc(b, a, 11).value) < 1e-12);
    CHECK(std::abs(gncc(a, b).value - gncc(b, a).value) < 1e-12);
  }
}

TEST_CASE("lncc against white noise stays near zero") {
  const Image2D x = smooth_image(400, 320);
  const Image2D noise = random_image(400, 320, 2024);
  const MetricResult r = lncc(x, noise, 51);
  CHECK(r.valid);
  CHECK(std::abs(r.value) < 0.1);
  // Regression value for this seed.
  CHECK(r.value == doctest::Approx(0.0039585447688492599).epsilon(1e-9));
}

TEST_CASE("lncc values lie in [-1, 1]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image2D a = random_image(30, 30, seed), b = random_image(30, 30, seed + 50);
    for (int kernel : {3, 7}) {
      const double v = lncc(a, b, kernel).value;
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("lncc overlap and variance handling") {
  Image2D a = smooth_image(20, 20);
  Image2D b = a;
  for (std::size_t i = 0; i < b.mask.size(); ++i) b.mask[i] = i < 63 ? 1 : 0;
  const MetricResult small = lncc(a, b, 5);
  CHECK_FALSE(small.valid);
  CHECK(small.status == MetricStatus::NoOverlap);
  CHECK(small.overlap_count == 63);
  b.mask[63] = 1;
  const MetricResult just = lncc(a, b, 5);
  CHECK(just.valid);
  CHECK(std::isfinite(just.value));
  CHECK(lncc(a, b, 5, 65).status == MetricStatus::NoOverlap);

  Image2D flat = a;
  for (double& v : flat.intensities) v = 0.25;
  const MetricResult zero = lncc(a, flat, 5);
  CHECK(zero.valid);
  CHECK(zero.status == MetricStatus::ZeroVariance);
  CHECK(zero.value == 0.0);

  CHECK_THROWS_AS(lncc(a, a, 4), Error);
  CHECK_THROWS_AS(lncc(a, a, 1), Error);
  CHECK_THROWS_AS(lncc(a, smooth_image(20, 21), 5), Error);
}

TEST_CASE("lncc ignores constant padded regions") {
  // Windows over a zero-variance band are skipped, not averaged in as 0.
  Image2D a = smooth_image(60, 40), b = smooth_image(60, 40);
  for (int j = 0; j < 40; ++j)
    for (int i = 40; i < 60; ++i) {
      a.at(i, j) = 0.0;
      b.at(i, j) = 0.0;
    }
  CHECK(std::abs(lncc(a, b, 5).value - 1.0) < 1e-9);
}

TEST_CASE("gncc examples") {
  const Image2D x = smooth_image(30, 20);
  CHECK(gncc(x, x).value == doctest::Approx(1.0).epsilon(1e-12));
  Image2D neg = x;
  for (double& v : neg.intensities) v = -v;
  CHECK(gncc(x, neg).value == doctest::Approx(-1.0).epsilon(1e-12));

  Image2D half = x;
  for (std::size_t i = 0; i < half.mask.size() / 2; ++i) half.mask[i] = 0;
  const MetricResult r = gncc(x, half);
  CHECK(r.overlap_count == 300);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));

  // Re-masking both images to a common sub-mask changes nothing.
  Image2D xm = x;
  xm.mask = half.mask;
  CHECK(gncc(xm, half).value == r.value);

  Image2D flat = x;
  for (double& v : flat.intensities) v = 2.0;
  CHECK(gncc(x, flat).status == MetricStatus::ZeroVariance);
  Image2D tiny = x;
  std::fill(tiny.mask.begin() + 10, tiny.mask.end(), 0);
  CHECK(gncc(x, tiny).status == MetricStatus::NoOverlap);
}

TEST_CASE("translation_mse examples") {
  CHECK(translation_mse(Vec3(1, 2, 3), Vec3(1, 2, 3)) == 0.0);
  CHECK(translation_mse(Vec3(3, 4, 0), Vec3::Zero()) == doctest::Approx(25.0));
  CHECK(translation_mse(Vec3(2, 2, 2), Vec3(1, 1, 1)) == doctest::Approx(3.0));
}

TEST_CASE("loss weights") {
  const LossWeights w;
  CHECK(w.alpha + w.beta + w.gamma == doctest::Approx(1.0).epsilon(1e-12));
  const LossWeights r = LossWeights::from_ratio(20, 1, 10);
  CHECK(r.alpha == doctest::Approx(20.0 / 31.0));
  CHECK_NOTHROW(r.validate());
  CHECK_THROWS_AS(LossWeights::from_ratio(-1, 1, 1), Error);
  CHECK_THROWS_AS((LossWeights{0.5, 0.5, 0.5}.validate()), Error);
  CHECK_THROWS_AS((LossWeights{1.5, -0.5, 0.0}.validate()), Error);
}

TEST_CASE("combined loss examples") {
  const LossWeights w;
  const TransformParams gt = to_params(RigidTransform::identity());
  MetricResult perfect;
  perfect.value = 1.0;
  perfect.valid = true;
  perfect.status = MetricStatus::Ok;
  CHECK(combined_loss_terms(perfect, gt, gt, w).total == 0.0);

  TransformParams shifted = gt;
  shifted.trans = Vec3(1, 0, 0);
  CHECK(combined_loss_terms(perfect, shifted, gt, w).total == doctest::Approx(1.0 / 31.0).epsilon(1e-12));

  MetricResult uncorrelated = perfect;
  uncorrelated.value = 0.0;
  RigidTransform quarter;
  quarter.rotation = RotationMatrix3::about_z(std::numbers::pi / 2);
  const double expected = 20.0 / 31.0 + (10.0 / 31.0) * (std::numbers::pi / 2);
  CHECK(combined_loss_terms(uncorrelated, to_params(quarter), gt, w).total ==
        doctest::Approx(expected).epsilon(1e-12));

  MetricResult lost;
  const LossTerms sentinel = combined_loss_terms(lost, gt, gt, w);
  CHECK_FALSE(sentinel.overlap_ok);
  CHECK(sentinel.total == doctest::Approx(2.0 * w.alpha));
}

TEST_CASE("combined loss is nonnegative and decreasing in lncc") {
  const LossWeights w;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    RigidTransform a, b;
    a.rotation = RotationMatrix3::about_axis(Vec3(u(rng), u(rng), u(rng)).normalized(), 2.0 * u(rng));
    a.translation = 10.0 * Vec3(u(rng), u(rng), u(rng));
    b.translation = 10.0 * Vec3(u(rng), u(rng), u(rng));
    MetricResult m1, m2;
    m1.valid = m2.valid = true;
    m1.value = u(rng);
    m2.value = std::min(1.0, m1.value + 0.1);
    const double l1 = combined_loss_terms(m1, to_params(a), to_params(b), w).total;
    const double l2 = combined_loss_terms(m2, to_params(a), to_params(b), w).total;
    CHECK(l1 >= 0.0);
    CHECK(l2 < l1);
  }
}

TEST_CASE("combined loss on images") {
  const Image2D x = smooth_image(50, 40);
  const TransformParams p = to_params(RigidTransform::identity());
  CHECK(std::abs(combined_loss(x, x, p, p, LossWeights{}, 9)) < 1e-9);
  CHECK_THROWS_AS(combined_loss(x, x, p, p, LossWeights{0.6, 0.6, 0.0}, 9), Error);
}
