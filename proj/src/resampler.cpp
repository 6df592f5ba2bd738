#include "s2v/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "s2v/error.hpp"

namespace s2v {

namespace {

// Splits [0, rows) into contiguous blocks. Each row is written by exactly one
// worker so the result is independent of the partitioning.
template <class Fn>
void for_rows(int rows, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(rows, 1));
  if (threads == 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int begin = rows * t / threads;
    const int end = rows * (t + 1) / threads;
    pool.emplace_back([begin, end, &fn] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
}

// Hot path shared by every sampler. `c` is a continuous lattice index.
inline VolumeSample sample_index(const Volume3D& v, const Vec3& c) {
  const auto& d = v.geometry.dims;
  VolumeSample s;
  if (!index_in_hull(c, d)) return s;
  const double x = std::clamp(c.x(), 0.0, d[0] - 1.0);
  const double y = std::clamp(c.y(), 0.0, d[1] - 1.0);
  const double z = std::clamp(c.z(), 0.0, d[2] - 1.0);
  int i = static_cast<int>(x), j = static_cast<int>(y), k = static_cast<int>(z);
  i = std::min(i, d[0] - 2);
  j = std::min(j, d[1] - 2);
  k = std::min(k, d[2] - 2);
  const double fx = x - i, fy = y - j, fz = z - k;
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(d[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(d[1]);
  const std::size_t base = v.geometry.index(i, j, k);
  const float* I = v.intensities.data() + base;
  const std::uint8_t* M = v.mask.data() + base;

  const double gx = 1.0 - fx, gy = 1.0 - fy, gz = 1.0 - fz;
  const double w000 = gx * gy * gz, w100 = fx * gy * gz, w010 = gx * fy * gz, w110 = fx * fy * gz;
  const double w001 = gx * gy * fz, w101 = fx * gy * fz, w011 = gx * fy * fz, w111 = fx * fy * fz;

  s.intensity = w000 * I[0] + w100 * I[sx] + w010 * I[sy] + w110 * I[sx + sy] + w001 * I[sz] + w101 * I[sx + sz] +
                w011 * I[sy + sz] + w111 * I[sx + sy + sz];
  s.mask = w000 * M[0] + w100 * M[sx] + w010 * M[sy] + w110 * M[sx + sy] + w001 * M[sz] + w101 * M[sx + sz] +
           w011 * M[sy + sz] + w111 * M[sx + sy + sz];
  s.inside = true;
  return s;
}

inline void store(const VolumeSample& s, double& intensity, std::uint8_t& mask) {
  if (s.inside && s.mask >= 0.5) {
    intensity = s.intensity;
    mask = 1;
  } else {
    intensity = 0.0;
    mask = 0;
  }
}

}  // namespace

std::array<double, 8> trilinear_weights(const Vec3& f) {
  std::array<double, 8> w{};
  for (int c = 0; c < 8; ++c) {
    const double wx = (c & 1) ? f.x() : 1.0 - f.x();
    const double wy = (c & 2) ? f.y() : 1.0 - f.y();
    const double wz = (c & 4) ? f.z() : 1.0 - f.z();
    w[static_cast<std::size_t>(c)] = wx * wy * wz;
  }
  return w;
}

VolumeSample sample_trilinear(const Volume3D& v, const Vec3& p) {
  return sample_index(v, v.geometry.continuous_index(p));
}

SamplingGrid make_slice_grid(const SliceGeometry& slice, const RigidTransform& t, const VolumeGeometry& volume) {
  validate(slice);
  SamplingGrid g;
  g.raster = slice;
  g.coords.resize(slice.pixel_count());
  g.validity.resize(slice.pixel_count());
  for (int j = 0; j < slice.dims[1]; ++j) {
    for (int i = 0; i < slice.dims[0]; ++i) {
      const std::size_t idx = slice.index(i, j);
      g.coords[idx] = t.apply(slice.point(i, j));
      g.validity[idx] = volume.contains(g.coords[idx]) ? 1 : 0;
    }
  }
  return g;
}

Image2D extract_slice(const Volume3D& v, const SamplingGrid& g, int threads) {
  if (g.coords.size() != g.raster.pixel_count() || g.validity.size() != g.raster.pixel_count())
    throw Error(ErrorCode::InvalidArgument, "sampling grid does not match its raster");
  Image2D out(g.raster);
  const int nx = g.raster.dims[0];
  for_rows(g.raster.dims[1], threads, [&](int j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t idx = g.raster.index(i, j);
      VolumeSample s;
      if (g.validity[idx]) s = sample_index(v, v.geometry.continuous_index(g.coords[idx]));
      store(s, out.intensities[idx], out.mask[idx]);
    }
  });
  return out;
}

Image2D slice_volume(const Volume3D& v, const SliceGeometry& slice, const RigidTransform& t, int threads) {
  validate(slice);
  Image2D out(slice);
  // Work directly in continuous index space: c = A * (i, j) + c0.
  const Vec3 inv_spacing = v.geometry.spacing.cwiseInverse();
  const Vec3 c0 = (t.apply(slice.origin) - v.geometry.origin).cwiseProduct(inv_spacing);
  const Vec3 du = (t.rotation * slice.axis_u * slice.spacing.x()).cwiseProduct(inv_spacing);
  const Vec3 dv = (t.rotation * slice.axis_v * slice.spacing.y()).cwiseProduct(inv_spacing);
  const int nx = slice.dims[0];
  for_rows(slice.dims[1], threads, [&](int j) {
    const Vec3 row = c0 + static_cast<double>(j) * dv;
    for (int i = 0; i < nx; ++i) {
      const std::size_t idx = slice.index(i, j);
      store(sample_index(v, row + static_cast<double>(i) * du), out.intensities[idx], out.mask[idx]);
    }
  });
  return out;
}

Volume3D transform_volume(const Volume3D& v, const RigidTransform& t, int threads) {
  Volume3D out(v.geometry);
  const auto& d = v.geometry.dims;
  for_rows(d[1] * d[2], threads, [&](int row) {
    const int j = row % d[1];
    const int k = row / d[1];
    for (int i = 0; i < d[0]; ++i) {
      const std::size_t idx = v.geometry.index(i, j, k);
      double value = 0.0;
      const VolumeSample s = sample_trilinear(v, t.apply(v.geometry.point(i, j, k)));
      store(s, value, out.mask[idx]);
      out.intensities[idx] = static_cast<float>(value);
    }
  });
  return out;
}

}  // namespace s2v
