#include "s2v/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include "s2v/error.hpp"

namespace s2v {

FeatureGrid::FeatureGrid(std::vector<int> s, int c) : shape(std::move(s)), channels(c) {
  if (shape.empty() || shape.size() > 3) throw Error(ErrorCode::InvalidArgument, "feature grid needs 1-3 extents");
  if (channels < 1) throw Error(ErrorCode::InvalidArgument, "feature grid needs at least one channel");
  for (int e : shape)
    if (e < 0) throw Error(ErrorCode::InvalidArgument, "negative feature extent");
  values.assign(cell_count() * static_cast<std::size_t>(channels), 0.0);
}

std::size_t FeatureGrid::cell_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int e) { return acc * static_cast<std::size_t>(e); });
}

bool FeatureGrid::finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

FeatureGrid outer_fuse(const FeatureGrid& f3d, const FeatureGrid& f2d) {
  if (f3d.empty() || f2d.empty() || f3d.shape.empty() || f2d.shape.empty())
    throw Error(ErrorCode::EmptyInput, "fusion inputs must be non-empty");
  if (!f3d.finite() || !f2d.finite()) throw Error(ErrorCode::NonFinite, "fusion inputs must be finite");

  const int ni = f3d.shape[0];
  const std::size_t nj = f3d.values.size() / static_cast<std::size_t>(ni);
  const std::size_t nk = f2d.values.size();

  FeatureGrid out({ni, static_cast<int>(nj), static_cast<int>(nk)}, 1);
  for (int i = 0; i < ni; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      const double a = f3d.values[static_cast<std::size_t>(i) * nj + j];
      double* dst = out.values.data() + (static_cast<std::size_t>(i) * nj + j) * nk;
      for (std::size_t k = 0; k < nk; ++k) dst[k] = a * f2d.values[k];
    }
  }
  return out;
}

namespace {

int cells(int n, int pool) { return (n + pool - 1) / pool; }

}  // namespace

FeatureGrid handcrafted_features(const Image2D& img, int pool) {
  if (pool < 1) throw Error(ErrorCode::InvalidArgument, "pool must be >= 1");
  const auto& d = img.geometry.dims;
  const int cx = cells(d[0], pool), cy = cells(d[1], pool);
  FeatureGrid f({cx, cy}, 2);
  std::vector<double> count(static_cast<std::size_t>(cx) * cy, 0.0);

  // Central differences in the interior, one-sided at the raster edge.
  const auto derivative = [&](int i, int j, int axis) {
    const int n = d[static_cast<std::size_t>(axis)];
    const int p = axis == 0 ? i : j;
    const double h = axis == 0 ? img.geometry.spacing.x() : img.geometry.spacing.y();
    const int lo = std::max(p - 1, 0), hi = std::min(p + 1, n - 1);
    if (hi == lo) return 0.0;
    const double vl = axis == 0 ? img.at(lo, j) : img.at(i, lo);
    const double vh = axis == 0 ? img.at(hi, j) : img.at(i, hi);
    return (vh - vl) / ((hi - lo) * h);
  };

  for (int j = 0; j < d[1]; ++j)
    for (int i = 0; i < d[0]; ++i) {
      if (!img.valid(i, j)) continue;
      const std::size_t cell = static_cast<std::size_t>(i / pool) * cy + static_cast<std::size_t>(j / pool);
      const double g = std::hypot(derivative(i, j, 0), derivative(i, j, 1));
      f.values[cell * 2] += img.at(i, j);
      f.values[cell * 2 + 1] += g;
      count[cell] += 1.0;
    }
  for (std::size_t c = 0; c < count.size(); ++c) {
    if (count[c] > 0.0) {
      f.values[c * 2] /= count[c];
      f.values[c * 2 + 1] /= count[c];
    }
  }
  return f;
}

FeatureGrid handcrafted_features(const Volume3D& v, int pool) {
  if (pool < 1) throw Error(ErrorCode::InvalidArgument, "pool must be >= 1");
  const auto& d = v.geometry.dims;
  const int cx = cells(d[0], pool), cy = cells(d[1], pool), cz = cells(d[2], pool);
  FeatureGrid f({cx, cy, cz}, 2);
  std::vector<double> count(static_cast<std::size_t>(cx) * cy * cz, 0.0);

  const auto derivative = [&](int i, int j, int k, int axis) {
    std::array<int, 3> p{i, j, k};
    const int n = d[static_cast<std::size_t>(axis)];
    const int c = p[static_cast<std::size_t>(axis)];
    const int lo = std::max(c - 1, 0), hi = std::min(c + 1, n - 1);
    if (hi == lo) return 0.0;
    std::array<int, 3> pl = p, ph = p;
    pl[static_cast<std::size_t>(axis)] = lo;
    ph[static_cast<std::size_t>(axis)] = hi;
    return (static_cast<double>(v.at(ph[0], ph[1], ph[2])) - v.at(pl[0], pl[1], pl[2])) /
           ((hi - lo) * v.geometry.spacing[axis]);
  };

  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!v.valid(i, j, k)) continue;
        const std::size_t cell =
            (static_cast<std::size_t>(i / pool) * cy + static_cast<std::size_t>(j / pool)) * cz + static_cast<std::size_t>(k / pool);
        const double g = std::sqrt(std::pow(derivative(i, j, k, 0), 2) + std::pow(derivative(i, j, k, 1), 2) +
                                   std::pow(derivative(i, j, k, 2), 2));
        f.values[cell * 2] += v.at(i, j, k);
        f.values[cell * 2 + 1] += g;
        count[cell] += 1.0;
      }
  for (std::size_t c = 0; c < count.size(); ++c) {
    if (count[c] > 0.0) {
      f.values[c * 2] /= count[c];
      f.values[c * 2 + 1] /= count[c];
    }
  }
  return f;
}

}  // namespace s2v
