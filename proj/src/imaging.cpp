#include "s2v/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "s2v/error.hpp"
#include "s2v/resampler.hpp"

namespace s2v {

bool VolumeGeometry::contains(const Vec3& p) const {
  return index_in_hull(continuous_index(p), dims);
}

Vec3 VolumeGeometry::center() const {
  return origin + 0.5 * Vec3((dims[0] - 1) * spacing.x(), (dims[1] - 1) * spacing.y(), (dims[2] - 1) * spacing.z());
}

Vec3 VolumeGeometry::centered_origin(const std::array<int, 3>& dims, const Vec3& spacing) {
  return -0.5 * Vec3((dims[0] - 1) * spacing.x(), (dims[1] - 1) * spacing.y(), (dims[2] - 1) * spacing.z());
}

bool SliceGeometry::axes_orthonormal(double tol) const {
  return std::abs(axis_u.norm() - 1.0) <= tol && std::abs(axis_v.norm() - 1.0) <= tol &&
         std::abs(axis_u.dot(axis_v)) <= tol;
}

SliceGeometry SliceGeometry::centered(std::array<int, 2> dims, double spacing) {
  SliceGeometry g;
  g.dims = dims;
  g.spacing = Vec2(spacing, spacing);
  g.origin = Vec3(-0.5 * (dims[0] - 1) * spacing, -0.5 * (dims[1] - 1) * spacing, 0.0);
  return g;
}

void validate(const VolumeGeometry& g) {
  for (int d : g.dims) {
    if (d < 2) throw Error(ErrorCode::EmptyImage, "volume extent below 2 voxels");
  }
  if (!(g.spacing.minCoeff() > 0.0) || !g.spacing.allFinite())
    throw Error(ErrorCode::InvalidArgument, "volume spacing must be positive");
  if (!g.origin.allFinite()) throw Error(ErrorCode::InvalidArgument, "volume origin must be finite");
}

void validate(const SliceGeometry& g) {
  for (int d : g.dims) {
    if (d < 2) throw Error(ErrorCode::EmptyImage, "image extent below 2 pixels");
  }
  if (!(g.spacing.minCoeff() > 0.0) || !g.spacing.allFinite())
    throw Error(ErrorCode::InvalidArgument, "image spacing must be positive");
  if (!g.axes_orthonormal()) throw Error(ErrorCode::InvalidArgument, "image axes must be orthonormal");
}

Volume3D::Volume3D(const VolumeGeometry& g)
    : geometry(g), intensities(g.voxel_count(), 0.0f), mask(g.voxel_count(), 1) {}

std::size_t Volume3D::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Image2D::Image2D(const SliceGeometry& g) : geometry(g), intensities(g.pixel_count(), 0.0), mask(g.pixel_count(), 1) {}

std::size_t Image2D::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

int resampled_extent(int n, double spacing, double target) {
  return static_cast<int>(std::floor((n - 1) * spacing / target + 1e-9)) + 1;
}

int nearest_index(double c, int n) {
  return std::clamp(static_cast<int>(std::lround(c)), 0, n - 1);
}

// A voxel survives erosion when it and every in-raster face neighbour are set.
std::vector<std::uint8_t> erode3(const std::vector<std::uint8_t>& m, const std::array<int, 3>& d) {
  std::vector<std::uint8_t> out(m.size(), 0);
  const auto at = [&](int i, int j, int k) {
    return m[static_cast<std::size_t>(i) + static_cast<std::size_t>(d[0]) * (j + static_cast<std::size_t>(d[1]) * k)];
  };
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!at(i, j, k)) continue;
        bool keep = true;
        if (i > 0) keep = keep && at(i - 1, j, k);
        if (i + 1 < d[0]) keep = keep && at(i + 1, j, k);
        if (j > 0) keep = keep && at(i, j - 1, k);
        if (j + 1 < d[1]) keep = keep && at(i, j + 1, k);
        if (k > 0) keep = keep && at(i, j, k - 1);
        if (k + 1 < d[2]) keep = keep && at(i, j, k + 1);
        out[static_cast<std::size_t>(i) + static_cast<std::size_t>(d[0]) * (j + static_cast<std::size_t>(d[1]) * k)] =
            keep ? 1 : 0;
      }
  return out;
}

std::vector<std::uint8_t> erode2(const std::vector<std::uint8_t>& m, const std::array<int, 2>& d) {
  std::vector<std::uint8_t> out(m.size(), 0);
  const auto at = [&](int i, int j) { return m[static_cast<std::size_t>(i) + static_cast<std::size_t>(d[0]) * j]; };
  for (int j = 0; j < d[1]; ++j)
    for (int i = 0; i < d[0]; ++i) {
      if (!at(i, j)) continue;
      bool keep = true;
      if (i > 0) keep = keep && at(i - 1, j);
      if (i + 1 < d[0]) keep = keep && at(i + 1, j);
      if (j > 0) keep = keep && at(i, j - 1);
      if (j + 1 < d[1]) keep = keep && at(i, j + 1);
      out[static_cast<std::size_t>(i) + static_cast<std::size_t>(d[0]) * j] = keep ? 1 : 0;
    }
  return out;
}

double bilinear(const Image2D& img, double x, double y) {
  const auto& d = img.geometry.dims;
  int i = std::min(static_cast<int>(x), d[0] - 2);
  int j = std::min(static_cast<int>(y), d[1] - 2);
  const double fx = x - i, fy = y - j;
  return (1 - fx) * (1 - fy) * img.at(i, j) + fx * (1 - fy) * img.at(i + 1, j) + (1 - fx) * fy * img.at(i, j + 1) +
         fx * fy * img.at(i + 1, j + 1);
}

// Floor division so crops and pads share one offset formula.
int centre_offset(int from, int to) {
  const int diff = from - to;
  return diff >= 0 ? diff / 2 : -((-diff + 1) / 2);
}

}  // namespace

Volume3D resample_isotropic(const Volume3D& v, double target_spacing) {
  validate(v.geometry);
  if (!(target_spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "target spacing must be positive");
  VolumeGeometry g;
  for (int a = 0; a < 3; ++a)
    g.dims[static_cast<std::size_t>(a)] = resampled_extent(v.geometry.dims[static_cast<std::size_t>(a)], v.geometry.spacing[a], target_spacing);
  if (g.dims[0] < 2 || g.dims[1] < 2 || g.dims[2] < 2)
    throw Error(ErrorCode::EmptyImage, "resampled volume extent below 2 voxels");
  g.spacing = Vec3::Constant(target_spacing);
  g.origin = v.geometry.origin;

  Volume3D out(g);
  std::vector<std::uint8_t> nn(g.voxel_count(), 0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 c = v.geometry.continuous_index(g.point(i, j, k));
        const Vec3 clamped(std::clamp(c.x(), 0.0, v.geometry.dims[0] - 1.0), std::clamp(c.y(), 0.0, v.geometry.dims[1] - 1.0),
                           std::clamp(c.z(), 0.0, v.geometry.dims[2] - 1.0));
        const VolumeSample s = sample_trilinear(v, v.geometry.origin + clamped.cwiseProduct(v.geometry.spacing));
        const std::size_t idx = g.index(i, j, k);
        out.intensities[idx] = static_cast<float>(s.intensity);
        nn[idx] = v.valid(nearest_index(clamped.x(), v.geometry.dims[0]), nearest_index(clamped.y(), v.geometry.dims[1]),
                          nearest_index(clamped.z(), v.geometry.dims[2]))
                      ? 1
                      : 0;
      }
  out.mask = erode3(nn, g.dims);
  for (std::size_t idx = 0; idx < out.mask.size(); ++idx)
    if (!out.mask[idx]) out.intensities[idx] = 0.0f;
  return out;
}

Image2D resample_isotropic(const Image2D& img, double target_spacing) {
  validate(img.geometry);
  if (!(target_spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "target spacing must be positive");
  SliceGeometry g = img.geometry;
  g.dims = {resampled_extent(img.geometry.dims[0], img.geometry.spacing.x(), target_spacing),
            resampled_extent(img.geometry.dims[1], img.geometry.spacing.y(), target_spacing)};
  if (g.dims[0] < 2 || g.dims[1] < 2) throw Error(ErrorCode::EmptyImage, "resampled image extent below 2 pixels");
  g.spacing = Vec2(target_spacing, target_spacing);

  Image2D out(g);
  std::vector<std::uint8_t> nn(g.pixel_count(), 0);
  for (int j = 0; j < g.dims[1]; ++j)
    for (int i = 0; i < g.dims[0]; ++i) {
      const double x = std::clamp(i * target_spacing / img.geometry.spacing.x(), 0.0, img.geometry.dims[0] - 1.0);
      const double y = std::clamp(j * target_spacing / img.geometry.spacing.y(), 0.0, img.geometry.dims[1] - 1.0);
      const std::size_t idx = g.index(i, j);
      out.intensities[idx] = bilinear(img, x, y);
      nn[idx] = img.valid(nearest_index(x, img.geometry.dims[0]), nearest_index(y, img.geometry.dims[1])) ? 1 : 0;
    }
  out.mask = erode2(nn, g.dims);
  for (std::size_t idx = 0; idx < out.mask.size(); ++idx)
    if (!out.mask[idx]) out.intensities[idx] = 0.0;
  return out;
}

Volume3D center_crop_pad(const Volume3D& v, const std::array<int, 3>& target) {
  for (int t : target)
    if (t < 1) throw Error(ErrorCode::InvalidArgument, "target dims must be >= 1");
  VolumeGeometry g = v.geometry;
  g.dims = target;
  std::array<int, 3> off{};
  for (std::size_t a = 0; a < 3; ++a) off[a] = centre_offset(v.geometry.dims[a], target[a]);
  g.origin = v.geometry.origin + Vec3(off[0] * g.spacing.x(), off[1] * g.spacing.y(), off[2] * g.spacing.z());

  Volume3D out(g);
  std::fill(out.mask.begin(), out.mask.end(), std::uint8_t{0});
  for (int k = 0; k < target[2]; ++k) {
    const int sk = k + off[2];
    if (sk < 0 || sk >= v.geometry.dims[2]) continue;
    for (int j = 0; j < target[1]; ++j) {
      const int sj = j + off[1];
      if (sj < 0 || sj >= v.geometry.dims[1]) continue;
      for (int i = 0; i < target[0]; ++i) {
        const int si = i + off[0];
        if (si < 0 || si >= v.geometry.dims[0]) continue;
        const std::size_t src = v.geometry.index(si, sj, sk);
        const std::size_t dst = g.index(i, j, k);
        out.intensities[dst] = v.intensities[src];
        out.mask[dst] = v.mask[src];
      }
    }
  }
  return out;
}

Image2D center_crop_pad(const Image2D& img, const std::array<int, 2>& target) {
  for (int t : target)
    if (t < 1) throw Error(ErrorCode::InvalidArgument, "target dims must be >= 1");
  SliceGeometry g = img.geometry;
  g.dims = target;
  const int ox = centre_offset(img.geometry.dims[0], target[0]);
  const int oy = centre_offset(img.geometry.dims[1], target[1]);
  g.origin = img.geometry.point(ox, oy);

  Image2D out(g);
  std::fill(out.mask.begin(), out.mask.end(), std::uint8_t{0});
  for (int j = 0; j < target[1]; ++j) {
    const int sj = j + oy;
    if (sj < 0 || sj >= img.geometry.dims[1]) continue;
    for (int i = 0; i < target[0]; ++i) {
      const int si = i + ox;
      if (si < 0 || si >= img.geometry.dims[0]) continue;
      out.intensities[g.index(i, j)] = img.intensities[img.geometry.index(si, sj)];
      out.mask[g.index(i, j)] = img.mask[img.geometry.index(si, sj)];
    }
  }
  return out;
}

Volume3D downsample2(const Volume3D& v) {
  const VolumeGeometry& in = v.geometry;
  VolumeGeometry g = in;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = in.dims[a] / 2;
    if (g.dims[a] < 2) throw Error(ErrorCode::EmptyImage, "volume too small to downsample");
  }
  g.spacing = 2.0 * in.spacing;
  g.origin = in.origin + 0.5 * in.spacing;

  Volume3D out(g);
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int dk = 0; dk < 2; ++dk)
          for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
              const std::size_t s = in.index(2 * i + di, 2 * j + dj, 2 * k + dk);
              if (!v.mask[s]) continue;
              sum += v.intensities[s];
              ++count;
            }
        const std::size_t o = g.index(i, j, k);
        out.intensities[o] = count > 0 ? static_cast<float>(sum / count) : 0.0f;
        out.mask[o] = count >= 4 ? 1 : 0;
      }
    }
  }
  return out;
}

Image2D downsample2(const Image2D& img) {
  const SliceGeometry& in = img.geometry;
  SliceGeometry g = in;
  for (int a = 0; a < 2; ++a) {
    g.dims[a] = in.dims[a] / 2;
    if (g.dims[a] < 2) throw Error(ErrorCode::EmptyImage, "image too small to downsample");
  }
  g.spacing = 2.0 * in.spacing;
  g.origin = in.origin + (0.5 * in.spacing.x()) * in.axis_u + (0.5 * in.spacing.y()) * in.axis_v;

  Image2D out(g);
  for (int j = 0; j < g.dims[1]; ++j) {
    for (int i = 0; i < g.dims[0]; ++i) {
      double sum = 0.0;
      int count = 0;
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          const std::size_t s = in.index(2 * i + di, 2 * j + dj);
          if (!img.mask[s]) continue;
          sum += img.intensities[s];
          ++count;
        }
      const std::size_t o = g.index(i, j);
      out.intensities[o] = count > 0 ? sum / count : 0.0;
      out.mask[o] = count >= 2 ? 1 : 0;
    }
  }
  return out;
}

namespace {

template <class Raster>
Normalized<Raster> normalize_impl(const Raster& in) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t count = 0;
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    if (!in.mask[i]) continue;
    lo = std::min(lo, static_cast<double>(in.intensities[i]));
    hi = std::max(hi, static_cast<double>(in.intensities[i]));
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::EmptyMask, "normalization needs at least one masked voxel");

  Normalized<Raster> r{in, hi == lo};
  for (std::size_t i = 0; i < in.mask.size(); ++i) {
    using T = typename decltype(r.image.intensities)::value_type;
    if (!in.mask[i]) {
      r.image.intensities[i] = T{0};
    } else if (r.constant) {
      r.image.intensities[i] = T(0.5);
    } else {
      r.image.intensities[i] = static_cast<T>((static_cast<double>(in.intensities[i]) - lo) / (hi - lo));
    }
  }
  return r;
}

}  // namespace

Normalized<Volume3D> normalize_intensity(const Volume3D& v) { return normalize_impl(v); }
Normalized<Image2D> normalize_intensity(const Image2D& img) { return normalize_impl(img); }

Volume3D preprocess(const Volume3D& v, const PreprocessConfig& cfg) {
  if (!cfg.enabled) return v;
  Volume3D out = resample_isotropic(v, cfg.spacing_mm);
  if (cfg.volume_dims) out = center_crop_pad(out, *cfg.volume_dims);
  if (cfg.normalize) out = normalize_intensity(out).image;
  return out;
}

Image2D preprocess(const Image2D& img, const PreprocessConfig& cfg) {
  if (!cfg.enabled) return img;
  Image2D out = resample_isotropic(img, cfg.spacing_mm);
  if (cfg.image_dims) out = center_crop_pad(out, *cfg.image_dims);
  if (cfg.normalize) out = normalize_intensity(out).image;
  return out;
}

}  // namespace s2v
