#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"

namespace s2v {

/// Physical sample positions (volume frame, mm) for a slice raster, plus a
/// per-sample flag saying whether the position lies inside the volume.
struct SamplingGrid {
  SliceGeometry raster;
  std::vector<Vec3> coords;
  std::vector<std::uint8_t> validity;
};

// Weights of the 8 lattice corners for fractional offsets in [0, 1]^3.
// Corner c uses bit 0 for x, bit 1 for y, bit 2 for z.
std::array<double, 8> trilinear_weights(const Vec3& frac);

struct VolumeSample {
  double intensity = 0.0;
  double mask = 0.0;  // interpolated {0,1} mask
  bool inside = false;
};

// Trilinear interpolation at a physical point. Outside the lattice hull the
// sample is reported with inside = false and zero values.
VolumeSample sample_trilinear(const Volume3D& v, const Vec3& p);

SamplingGrid make_slice_grid(const SliceGeometry& slice, const RigidTransform& t, const VolumeGeometry& volume);

/// Interpolates the volume at every grid position. Output mask is
/// validity AND (interpolated mask >= 0.5); masked-out pixels are 0.
/// Rows are split across `threads` workers; results do not depend on it.
Image2D extract_slice(const Volume3D& v, const SamplingGrid& g, int threads = 1);

// Fused make_slice_grid + extract_slice without materialising the grid.
Image2D slice_volume(const Volume3D& v, const SliceGeometry& slice, const RigidTransform& t, int threads = 1);

/// Resamples v on the t-transformed voxel lattice of v itself:
/// out(p) = v(t.apply(p)) with the extract_slice masking rules.
Volume3D transform_volume(const Volume3D& v, const RigidTransform& t, int threads = 1);

}  // namespace s2v
