#include <doctest.h>

#include <cmath>
#include <random>

#include "s2v/error.hpp"
#include "s2v/fusion.hpp"

using namespace s2v;

namespace {

FeatureGrid random_grid(std::vector<int> shape, int channels, std::uint64_t seed) {
  FeatureGrid f(std::move(shape), channels);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double& v : f.values) v = u(rng);
  return f;
}

}  // namespace

TEST_CASE("outer_fuse direct products") {
  FeatureGrid a({1, 1}, 1);
  a.values = {2.0};
  FeatureGrid b({2}, 1);
  b.values = {3.0, 5.0};
  const FeatureGrid m = outer_fuse(a, b);
  CHECK(m.shape == std::vector<int>{1, 1, 2});
  CHECK(m.values == std::vector<double>{6.0, 10.0});
}

TEST_CASE("outer_fuse with unit f2d repeats f3d along k") {
  const FeatureGrid a = random_grid({3, 4}, 1, 1);
  FeatureGrid ones({5}, 1);
  std::fill(ones.values.begin(), ones.values.end(), 1.0);
  const FeatureGrid m = outer_fuse(a, ones);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 5; ++k) CHECK(m.values[(i * 4 + j) * 5 + k] == a.values[i * 4 + j]);
}

TEST_CASE("outer_fuse flattens channels row-major") {
  const FeatureGrid a = random_grid({2, 3}, 2, 2);
  const FeatureGrid b = random_grid({4}, 3, 3);
  const FeatureGrid m = outer_fuse(a, b);
  CHECK(m.shape == std::vector<int>{2, 6, 12});
  CHECK(m.channels == 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int c3 = 0; c3 < 2; ++c3)
        for (int k = 0; k < 4; ++k)
          for (int c2 = 0; c2 < 3; ++c2) {
            const double expected = a.values[(i * 3 + j) * 2 + c3] * b.values[k * 3 + c2];
            CHECK(m.values[(static_cast<std::size_t>(i) * 6 + (j * 2 + c3)) * 12 + (k * 3 + c2)] == expected);
          }
}

TEST_CASE("outer_fuse is bilinear") {
  const FeatureGrid x = random_grid({3, 3}, 1, 4);
  const FeatureGrid y = random_grid({7}, 1, 5);
  const double s = -1.75;
  FeatureGrid sx = x, sy = y;
  for (double& v : sx.values) v *= s;
  for (double& v : sy.values) v *= s;
  const FeatureGrid base = outer_fuse(x, y), left = outer_fuse(sx, y), right = outer_fuse(x, sy);
  for (std::size_t n = 0; n < base.values.size(); ++n) {
    CHECK(std::abs(left.values[n] - s * base.values[n]) < 1e-12);
    CHECK(std::abs(right.values[n] - s * base.values[n]) < 1e-12);
  }
}

TEST_CASE("outer_fuse has rank-1 structure") {
  const FeatureGrid x = random_grid({4, 5}, 1, 6);
  const FeatureGrid y = random_grid({6}, 1, 7);
  const FeatureGrid m = outer_fuse(x, y);
  const std::size_t nij = 20, nk = 6;
  for (std::size_t k = 0; k < nk; ++k)
    for (std::size_t ij = 0; ij < nij; ++ij) CHECK(std::abs(m.values[ij * nk + k] - y.values[k] * x.values[ij]) < 1e-12);
  // Magnitude is symmetric in the two factors.
  double norm = 0.0, nx = 0.0, ny = 0.0;
  for (double v : m.values) norm += v * v;
  for (double v : x.values) nx += v * v;
  for (double v : y.values) ny += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(std::sqrt(nx) * std::sqrt(ny)).epsilon(1e-12));
}

TEST_CASE("outer_fuse rejects empty and non-finite input") {
  FeatureGrid empty({0, 3}, 1);
  const FeatureGrid y = random_grid({2}, 1, 8);
  CHECK_THROWS_AS(outer_fuse(empty, y), Error);
  CHECK_THROWS_AS(outer_fuse(y, FeatureGrid{}), Error);
  FeatureGrid bad = random_grid({2, 2}, 1, 9);
  bad.values[1] = std::nan("");
  CHECK_FALSE(bad.finite());
  CHECK_THROWS_AS(outer_fuse(bad, y), Error);
  CHECK_THROWS_AS(FeatureGrid({1, 2, 3, 4}, 1), Error);
  CHECK_THROWS_AS(FeatureGrid({2}, 0), Error);
}

TEST_CASE("handcrafted features on images") {
  Image2D flat(SliceGeometry::centered({8, 6}, 0.5));
  std::fill(flat.intensities.begin(), flat.intensities.end(), 0.7);
  const FeatureGrid f = handcrafted_features(flat, 3);
  CHECK(f.shape == std::vector<int>{3, 2});
  for (std::size_t c = 0; c < f.cell_count(); ++c) {
    CHECK(f.values[2 * c] == doctest::Approx(0.7));
    CHECK(f.values[2 * c + 1] == 0.0);
  }

  Image2D tiny(SliceGeometry::centered({2, 2}, 1.0));
  tiny.intensities = {1.0, 2.0, 3.0, 4.0};
  const FeatureGrid t = handcrafted_features(tiny, 1);
  CHECK(t.cell_count() == 4);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) CHECK(t.values[2 * (i * 2 + j)] == tiny.at(i, j));

  CHECK_THROWS_AS(handcrafted_features(tiny, 0), Error);
}

TEST_CASE("handcrafted gradient of a ramp") {
  Image2D ramp(SliceGeometry::centered({40, 30}, 0.5));
  for (int j = 0; j < 30; ++j)
    for (int i = 0; i < 40; ++i) ramp.at(i, j) = 2.0 * (0.5 * i);  // slope 2 per mm
  const FeatureGrid f = handcrafted_features(ramp, 10);
  for (std::size_t c = 0; c < f.cell_count(); ++c) CHECK(std::abs(f.values[2 * c + 1] - 2.0) <= 0.1);

  VolumeGeometry g;
  g.dims = {12, 12, 12};
  g.spacing = Vec3::Constant(0.5);
  Volume3D v(g);
  for (int k = 0; k < 12; ++k)
    for (int j = 0; j < 12; ++j)
      for (int i = 0; i < 12; ++i) v.at(i, j, k) = static_cast<float>(2.0 * 0.5 * k);
  const FeatureGrid fv = handcrafted_features(v, 4);
  CHECK(fv.shape == std::vector<int>{3, 3, 3});
  for (std::size_t c = 0; c < fv.cell_count(); ++c) CHECK(std::abs(fv.values[2 * c + 1] - 2.0) <= 0.1);
}

TEST_CASE("handcrafted features ignore masked samples") {
  Image2D img(SliceGeometry::centered({4, 4}, 1.0));
  for (std::size_t n = 0; n < img.intensities.size(); ++n) img.intensities[n] = static_cast<double>(n);
  std::fill(img.mask.begin(), img.mask.end(), 0);
  img.mask[img.geometry.index(1, 1)] = 1;
  const FeatureGrid f = handcrafted_features(img, 2);
  CHECK(f.values[0] == img.at(1, 1));
  CHECK(f.values[2] == 0.0);
  CHECK(handcrafted_features(img, 2).values == f.values);
}
