#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "s2v/evaluation.hpp"
#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"
#include "s2v/workflow.hpp"

namespace s2v {

struct TubeSpec {
  std::vector<Vec3> centerline;  // polyline, mm
  double radius = 3.0;           // mm
  double intensity = 0.1;
};

struct EllipsoidSpec {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3::Ones();
  double intensity = 0.7;
};

struct SpeckleSpec {
  std::uint64_t seed = 0;
  double amplitude = 0.0;
  double correlation_mm = 2.0;
};

enum class MaskShape { Full, Sector };

/// Synthetic volume description. The volume is centred on the physical origin;
/// all positions are mm in that frame.
struct PhantomSpec {
  std::array<int, 3> dims{96, 96, 64};
  double spacing = 1.0;
  double background = 0.0;
  double falloff_mm = 0.0;  // boundary smoothing width; <= 0 means one voxel
  std::vector<TubeSpec> tubes;
  std::vector<EllipsoidSpec> ellipsoids;
  SpeckleSpec speckle;
  std::vector<Landmark> landmarks;  // bifurcation points, volume frame
  MaskShape mask_shape = MaskShape::Full;
  double sector_half_angle_deg = 35.0;

  VolumeGeometry geometry() const;
};

/// Vessel tree with two bifurcations, three lesions and speckle texture,
/// scaled to the requested raster.
PhantomSpec default_phantom_spec(std::array<int, 3> dims = {96, 96, 64}, double spacing = 1.0,
                                 std::uint64_t seed = 7);

struct RenderedPhantom {
  Volume3D volume;
  std::vector<Landmark> landmarks;
};

/// Throws GeometryOutOfBounds when a structure or landmark lies outside the
/// volume and Validation on malformed parameters.
RenderedPhantom render(const PhantomSpec& spec);

struct SlicePair {
  Image2D image;
  RigidTransform truth;
};

/// Slices `v` at `pose` and adds seeded white Gaussian noise of standard
/// deviation `noise` inside the mask. Throws NoOverlap when fewer than
/// `min_overlap` pixels land inside the volume mask.
SlicePair make_pair(const Volume3D& v, const SliceGeometry& slice, const RigidTransform& pose, double noise,
                    std::uint64_t seed, std::size_t min_overlap = 64);

/// Motion of the anatomy relative to the probe, expressed as the correction
/// the tracker misses: frame i is imaged at compose(probe, motion[i]).
struct MotionScript {
  RigidTransform probe;
  std::vector<RigidTransform> motion;

  static MotionScript sinusoid(int frames, double amplitude_mm, double period_frames, const Vec3& direction,
                               const RigidTransform& probe = {});
  static MotionScript drift(int frames, const Vec3& per_frame, const RigidTransform& probe = {});
};

struct AnimatedSequence {
  std::vector<FrameInput> frames;
  std::vector<RigidTransform> truth_corrections;  // correction that realigns frame i
  std::vector<RigidTransform> truth_poses;        // full slice-to-volume pose of frame i
  std::vector<bool> overlap_ok;
};

/// Frame i is sliced at compose(probe, motion[i]); the reported tracked pose
/// is compose(probe, tracked_error[i]) (identity error when the list is
/// empty), so the truth correction is tracked_error[i]^-1 o motion[i].
/// Frames without overlap are still emitted with an all-false mask.
AnimatedSequence animate(const Volume3D& v, const SliceGeometry& slice, const MotionScript& script,
                         const std::vector<RigidTransform>& tracked_error, double noise, std::uint64_t seed,
                         double frame_interval_s = 0.1);

/// Landmarks expressed in a slice frame given the slice-to-volume pose.
std::vector<Landmark> landmarks_in_slice(std::span<const Landmark> volume_landmarks, const RigidTransform& pose,
                                         int slice_index);

/// Distance from p to the nearest point of a polyline.
double distance_to_polyline(const Vec3& p, std::span<const Vec3> polyline);

}  // namespace s2v
