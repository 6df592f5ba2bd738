#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "s2v/geometry.hpp"

namespace s2v {

using Vec2 = Eigen::Vector2d;

// Raster geometry of a volume. Voxel (i, j, k) sits at
// origin + (i * spacing.x, j * spacing.y, k * spacing.z) in the volume frame.
struct VolumeGeometry {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  Vec3 point(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
  Vec3 continuous_index(const Vec3& p) const { return (p - origin).cwiseQuotient(spacing); }
  // Inclusive physical bounds test: the sample must lie inside the lattice hull.
  bool contains(const Vec3& p) const;
  Vec3 center() const;

  // Origin that places the raster centre at the physical origin.
  static Vec3 centered_origin(const std::array<int, 3>& dims, const Vec3& spacing);
};

// Lattice hull test on a continuous index. Points within 1e-9 index units of
// a face count as inside so that boundary voxels survive rounding.
inline bool index_in_hull(const Vec3& c, const std::array<int, 3>& dims) {
  constexpr double kTol = 1e-9;
  for (int a = 0; a < 3; ++a) {
    if (!(c[a] >= -kTol && c[a] <= dims[static_cast<std::size_t>(a)] - 1 + kTol)) return false;
  }
  return true;
}

// Raster geometry of a planar image. Pixel (i, j) sits at
// origin + i * spacing.x * axis_u + j * spacing.y * axis_v in the slice frame.
struct SliceGeometry {
  std::array<int, 2> dims{0, 0};
  Vec2 spacing = Vec2::Ones();
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();

  std::size_t pixel_count() const { return static_cast<std::size_t>(dims[0]) * dims[1]; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) * j; }
  Vec3 point(int i, int j) const {
    return origin + (i * spacing.x()) * axis_u + (j * spacing.y()) * axis_v;
  }
  bool axes_orthonormal(double tol = 1e-9) const;

  // Axis-aligned slice in the z = 0 plane of its own frame, centred on the origin.
  static SliceGeometry centered(std::array<int, 2> dims, double spacing);
};

struct Volume3D {
  VolumeGeometry geometry;
  std::vector<float> intensities;
  std::vector<std::uint8_t> mask;

  Volume3D() = default;
  // Zero intensities, mask all true.
  explicit Volume3D(const VolumeGeometry& g);

  const std::array<int, 3>& dims() const { return geometry.dims; }
  float at(int i, int j, int k) const { return intensities[geometry.index(i, j, k)]; }
  float& at(int i, int j, int k) { return intensities[geometry.index(i, j, k)]; }
  bool valid(int i, int j, int k) const { return mask[geometry.index(i, j, k)] != 0; }
  std::size_t mask_count() const;
};

struct Image2D {
  SliceGeometry geometry;
  std::vector<double> intensities;
  std::vector<std::uint8_t> mask;

  Image2D() = default;
  explicit Image2D(const SliceGeometry& g);

  const std::array<int, 2>& dims() const { return geometry.dims; }
  double at(int i, int j) const { return intensities[geometry.index(i, j)]; }
  double& at(int i, int j) { return intensities[geometry.index(i, j)]; }
  bool valid(int i, int j) const { return mask[geometry.index(i, j)] != 0; }
  std::size_t mask_count() const;
};

// Throws EmptyImage when any extent is below 2 or InvalidArgument on bad
// spacing. Used by constructors of derived rasters.
void validate(const VolumeGeometry& g);
void validate(const SliceGeometry& g);

/// Resamples onto an isotropic lattice with the same origin. Intensities use
/// trilinear (bilinear) interpolation; the mask is sampled nearest-neighbour
/// and then eroded by one voxel. Voxels outside the new mask are zeroed.
Volume3D resample_isotropic(const Volume3D& v, double target_spacing);
Image2D resample_isotropic(const Image2D& img, double target_spacing);

/// Centre crop and/or zero pad to exactly `target_dims`. Retained voxels keep
/// their physical coordinates; padding is 0 with a false mask.
Volume3D center_crop_pad(const Volume3D& v, const std::array<int, 3>& target_dims);
Image2D center_crop_pad(const Image2D& img, const std::array<int, 2>& target_dims);

/// Halves the resolution by averaging 2x2x2 (2x2) blocks of masked samples.
/// Odd trailing rows are dropped. An output sample is valid when at least
/// half of its block is; the new lattice sits at the block centres.
Volume3D downsample2(const Volume3D& v);
Image2D downsample2(const Image2D& img);

template <class Raster>
struct Normalized {
  Raster image;
  bool constant = false;  // masked max == masked min; inside-mask values set to 0.5
};

/// Min-max scaling to [0, 1] computed over masked voxels only.
Normalized<Volume3D> normalize_intensity(const Volume3D& v);
Normalized<Image2D> normalize_intensity(const Image2D& img);

struct PreprocessConfig {
  bool enabled = true;
  double spacing_mm = 0.5;
  std::optional<std::array<int, 3>> volume_dims = std::array<int, 3>{400, 320, 240};
  std::optional<std::array<int, 2>> image_dims = std::array<int, 2>{400, 320};
  bool normalize = true;
};

Volume3D preprocess(const Volume3D& v, const PreprocessConfig& cfg);
Image2D preprocess(const Image2D& img, const PreprocessConfig& cfg);

}  // namespace s2v
