#include "s2v/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "s2v/error.hpp"
#include "s2v/resampler.hpp"

namespace s2v {

VolumeGeometry PhantomSpec::geometry() const {
  VolumeGeometry g;
  g.dims = dims;
  g.spacing = Vec3::Constant(spacing);
  g.origin = VolumeGeometry::centered_origin(dims, g.spacing);
  return g;
}

PhantomSpec default_phantom_spec(std::array<int, 3> dims, double spacing, std::uint64_t seed) {
  PhantomSpec s;
  s.dims = dims;
  s.spacing = spacing;
  s.background = 0.4;
  const VolumeGeometry g = s.geometry();
  const Vec3 h = g.center() - g.origin;  // half extents
  const auto at = [&h](double fx, double fy, double fz) { return Vec3(fx * h.x(), fy * h.y(), fz * h.z()); };
  const double r = std::max(2.0 * spacing, 0.14 * h.minCoeff());

  const Vec3 b1 = at(-0.25, 0.0, 0.05);
  const Vec3 b2 = at(0.35, 0.15, 0.2);
  const Vec3 b3 = at(-0.2, 0.5, 0.35);
  s.tubes.push_back({{at(-0.92, -0.25, -0.35), b1, b2, at(0.92, 0.35, 0.55)}, 1.3 * r, 0.05});
  s.tubes.push_back({{b1, b3, at(-0.05, 0.9, 0.7)}, r, 0.08});
  s.tubes.push_back({{b3, at(-0.8, 0.75, 0.1)}, 0.8 * r, 0.08});
  s.tubes.push_back({{b1, at(0.05, -0.9, -0.55)}, r, 0.1});
  s.tubes.push_back({{b2, at(0.75, -0.75, -0.6)}, r, 0.1});
  s.tubes.push_back({{b2, at(0.55, 0.88, -0.45)}, 0.9 * r, 0.06});

  s.ellipsoids.push_back({at(0.45, -0.35, 0.3), Vec3(0.22 * h.x(), 0.17 * h.y(), 0.3 * h.z()), 0.85});
  s.ellipsoids.push_back({at(-0.55, 0.25, -0.4), Vec3(0.16 * h.x(), 0.25 * h.y(), 0.22 * h.z()), 0.7});
  s.ellipsoids.push_back({at(-0.1, -0.55, 0.45), Vec3(0.12 * h.x(), 0.12 * h.y(), 0.2 * h.z()), 0.25});

  s.speckle = {seed, 0.08, std::max(3.0, 3.0 * spacing)};
  s.landmarks.push_back({"bifurcation_1", b1, LandmarkFrame::Volume, -1});
  s.landmarks.push_back({"bifurcation_2", b2, LandmarkFrame::Volume, -1});
  s.landmarks.push_back({"bifurcation_3", b3, LandmarkFrame::Volume, -1});
  return s;
}

double distance_to_polyline(const Vec3& p, std::span<const Vec3> polyline) {
  if (polyline.empty()) return std::numeric_limits<double>::infinity();
  if (polyline.size() == 1) return (p - polyline[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + 1 < polyline.size(); ++s) {
    const Vec3 a = polyline[s], d = polyline[s + 1] - a;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + t * d)).norm());
  }
  return best;
}

namespace {

// C1 ramp: 0 for x <= 0, 1 for x >= 1.
double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Standard normal value attached to one lattice node.
double node_gaussian(std::uint64_t seed, std::int64_t a, std::int64_t b, std::int64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(a));
  h = splitmix64(h ^ static_cast<std::uint64_t>(b));
  h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  const double u1 = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(splitmix64(h) >> 11) + 0.5) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool inside(const VolumeGeometry& g, const Vec3& p) {
  const Vec3 lo = g.origin, hi = g.origin + Vec3((g.dims[0] - 1) * g.spacing.x(), (g.dims[1] - 1) * g.spacing.y(),
                                                 (g.dims[2] - 1) * g.spacing.z());
  return (p.array() >= lo.array() - 1e-9).all() && (p.array() <= hi.array() + 1e-9).all();
}

void check_spec(const PhantomSpec& spec, const VolumeGeometry& g) {
  validate(g);
  if (!(spec.spacing > 0.0)) throw Error(ErrorCode::Validation, "phantom spacing must be > 0");
  for (const TubeSpec& t : spec.tubes) {
    if (!(t.radius > 0.0)) throw Error(ErrorCode::Validation, "tube radius must be > 0");
    if (t.centerline.size() < 2) throw Error(ErrorCode::Validation, "tube centerline needs at least 2 points");
    for (const Vec3& p : t.centerline)
      if (!inside(g, p)) throw Error(ErrorCode::GeometryOutOfBounds, "tube centerline leaves the volume");
  }
  for (const EllipsoidSpec& e : spec.ellipsoids) {
    if (!(e.semi_axes.minCoeff() > 0.0)) throw Error(ErrorCode::Validation, "ellipsoid semi-axes must be > 0");
    if (!inside(g, e.center)) throw Error(ErrorCode::GeometryOutOfBounds, "ellipsoid centre outside the volume");
  }
  for (const Landmark& l : spec.landmarks)
    if (!inside(g, l.position)) throw Error(ErrorCode::GeometryOutOfBounds, "landmark '" + l.id + "' outside the volume");
  if (spec.speckle.amplitude < 0.0 || !(spec.speckle.correlation_mm > 0.0))
    throw Error(ErrorCode::Validation, "speckle needs amplitude >= 0 and correlation > 0");
}

// Visits voxels of the axis-aligned box [lo, hi] (mm), clipped to the raster.
template <class Fn>
void for_box(const VolumeGeometry& g, const Vec3& lo, const Vec3& hi, Fn&& fn) {
  std::array<int, 3> a{}, b{};
  for (int d = 0; d < 3; ++d) {
    const std::size_t u = static_cast<std::size_t>(d);
    a[u] = std::max(0, static_cast<int>(std::floor((lo[d] - g.origin[d]) / g.spacing[d])));
    b[u] = std::min(g.dims[u] - 1, static_cast<int>(std::ceil((hi[d] - g.origin[d]) / g.spacing[d])));
  }
  for (int k = a[2]; k <= b[2]; ++k)
    for (int j = a[1]; j <= b[1]; ++j)
      for (int i = a[0]; i <= b[0]; ++i) fn(i, j, k);
}

}  // namespace

RenderedPhantom render(const PhantomSpec& spec) {
  const VolumeGeometry g = spec.geometry();
  check_spec(spec, g);
  const double width = spec.falloff_mm > 0.0 ? spec.falloff_mm : spec.spacing;

  std::vector<double> field(g.voxel_count(), spec.background);
  const auto blend = [&](std::size_t idx, double weight, double intensity) {
    field[idx] = field[idx] * (1.0 - weight) + intensity * weight;
  };

  // Structures are composited in declaration order.
  for (const TubeSpec& t : spec.tubes) {
    Vec3 lo = t.centerline.front(), hi = lo;
    for (const Vec3& p : t.centerline) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double reach = t.radius + width;
    for_box(g, lo.array() - reach, hi.array() + reach, [&](int i, int j, int k) {
      const double d = distance_to_polyline(g.point(i, j, k), t.centerline) - t.radius;
      const double w = smoothstep((0.5 * width - d) / width);
      if (w > 0.0) blend(g.index(i, j, k), w, t.intensity);
    });
  }
  for (const EllipsoidSpec& e : spec.ellipsoids) {
    const double reach = width;
    const double scale = e.semi_axes.minCoeff();
    for_box(g, e.center - e.semi_axes - Vec3::Constant(reach), e.center + e.semi_axes + Vec3::Constant(reach),
            [&](int i, int j, int k) {
              const double rho = (g.point(i, j, k) - e.center).cwiseQuotient(e.semi_axes).norm();
              const double d = (rho - 1.0) * scale;
              const double w = smoothstep((0.5 * width - d) / width);
              if (w > 0.0) blend(g.index(i, j, k), w, e.intensity);
            });
  }

  Volume3D vol(g);
  const Vec3 hi_corner = g.origin + Vec3((g.dims[0] - 1) * g.spacing.x(), (g.dims[1] - 1) * g.spacing.y(),
                                         (g.dims[2] - 1) * g.spacing.z());
  if (spec.mask_shape == MaskShape::Sector) {
    const double apex_y = g.origin.y() - 0.25 * (hi_corner.y() - g.origin.y());
    const double half = spec.sector_half_angle_deg * std::numbers::pi / 180.0;
    for (int k = 0; k < g.dims[2]; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          const Vec3 p = g.point(i, j, k);
          const double angle = std::atan2(std::abs(p.x()), p.y() - apex_y);
          vol.mask[g.index(i, j, k)] = angle <= half ? 1 : 0;
        }
  }

  if (spec.speckle.amplitude > 0.0) {
    // Gaussian values on a coarse lattice, blended with C1 weights.
    const double L = spec.speckle.correlation_mm;
    const Vec3 lattice_origin = g.origin - Vec3::Constant(L);
    std::array<int, 3> n{};
    for (int d = 0; d < 3; ++d)
      n[static_cast<std::size_t>(d)] = static_cast<int>(std::ceil((hi_corner[d] - lattice_origin[d]) / L)) + 2;
    std::vector<double> nodes(static_cast<std::size_t>(n[0]) * n[1] * n[2]);
    const auto node_index = [&n](int a, int b, int c) {
      return static_cast<std::size_t>(a) + static_cast<std::size_t>(n[0]) * (b + static_cast<std::size_t>(n[1]) * c);
    };
    for (int c = 0; c < n[2]; ++c)
      for (int b = 0; b < n[1]; ++b)
        for (int a = 0; a < n[0]; ++a) nodes[node_index(a, b, c)] = node_gaussian(spec.speckle.seed, a, b, c);

    for (int k = 0; k < g.dims[2]; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          const Vec3 q = (g.point(i, j, k) - lattice_origin) / L;
          const int a = static_cast<int>(q.x()), b = static_cast<int>(q.y()), c = static_cast<int>(q.z());
          const double wx = smoothstep(q.x() - a), wy = smoothstep(q.y() - b), wz = smoothstep(q.z() - c);
          double s = 0.0;
          for (int corner = 0; corner < 8; ++corner) {
            const int da = corner & 1, db = (corner >> 1) & 1, dc = (corner >> 2) & 1;
            const double w = (da ? wx : 1.0 - wx) * (db ? wy : 1.0 - wy) * (dc ? wz : 1.0 - wz);
            s += w * nodes[node_index(a + da, b + db, c + dc)];
          }
          field[g.index(i, j, k)] += spec.speckle.amplitude * s;
        }
  }

  for (std::size_t idx = 0; idx < field.size(); ++idx)
    vol.intensities[idx] = vol.mask[idx] ? static_cast<float>(field[idx]) : 0.0f;

  return {std::move(vol), spec.landmarks};
}

SlicePair make_pair(const Volume3D& v, const SliceGeometry& slice, const RigidTransform& pose, double noise,
                    std::uint64_t seed, std::size_t min_overlap) {
  if (noise < 0.0) throw Error(ErrorCode::Validation, "noise amplitude must be >= 0");
  SlicePair out{slice_volume(v, slice, pose), pose};
  if (out.image.mask_count() < min_overlap) throw Error(ErrorCode::NoOverlap, "slice pose does not overlap the volume");
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < out.image.intensities.size(); ++i) {
      const double z = unit(rng);  // drawn for every pixel so the stream does not depend on the mask
      if (out.image.mask[i]) out.image.intensities[i] += noise * z;
    }
  }
  return out;
}

MotionScript MotionScript::sinusoid(int frames, double amplitude_mm, double period_frames, const Vec3& direction,
                                    const RigidTransform& probe) {
  if (frames < 1 || !(period_frames > 0.0)) throw Error(ErrorCode::Validation, "sinusoid needs frames >= 1 and period > 0");
  const double n = direction.norm();
  const Vec3 axis = n > 0.0 ? Vec3(direction / n) : Vec3::UnitX();
  MotionScript s;
  s.probe = probe;
  for (int i = 0; i < frames; ++i) {
    const double phase = 2.0 * std::numbers::pi * i / period_frames;
    s.motion.push_back(RigidTransform::from_translation(amplitude_mm * std::sin(phase) * axis));
  }
  return s;
}

MotionScript MotionScript::drift(int frames, const Vec3& per_frame, const RigidTransform& probe) {
  if (frames < 1) throw Error(ErrorCode::Validation, "drift needs frames >= 1");
  MotionScript s;
  s.probe = probe;
  for (int i = 0; i < frames; ++i) s.motion.push_back(RigidTransform::from_translation(static_cast<double>(i) * per_frame));
  return s;
}

AnimatedSequence animate(const Volume3D& v, const SliceGeometry& slice, const MotionScript& script,
                         const std::vector<RigidTransform>& tracked_error, double noise, std::uint64_t seed,
                         double frame_interval_s) {
  if (!tracked_error.empty() && tracked_error.size() != script.motion.size())
    throw Error(ErrorCode::Validation, "tracked_error must be empty or have one entry per frame");
  if (!(frame_interval_s > 0.0)) throw Error(ErrorCode::Validation, "frame interval must be > 0");
  AnimatedSequence seq;
  for (std::size_t i = 0; i < script.motion.size(); ++i) {
    const RigidTransform err = tracked_error.empty() ? RigidTransform::identity() : tracked_error[i];
    const RigidTransform truth = compose(script.probe, script.motion[i]);
    FrameInput f;
    f.timestamp = static_cast<double>(i) * frame_interval_s;
    f.tracked = compose(script.probe, err);
    bool ok = true;
    try {
      f.image = make_pair(v, slice, truth, noise, seed + i).image;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoOverlap) throw;
      f.image = slice_volume(v, slice, truth);
      ok = false;
    }
    seq.frames.push_back(std::move(f));
    seq.truth_corrections.push_back(compose(err.inverse(), script.motion[i]));
    seq.truth_poses.push_back(truth);
    seq.overlap_ok.push_back(ok);
  }
  return seq;
}

std::vector<Landmark> landmarks_in_slice(std::span<const Landmark> volume_landmarks, const RigidTransform& pose,
                                         int slice_index) {
  const RigidTransform inv = pose.inverse();
  std::vector<Landmark> out;
  for (const Landmark& l : volume_landmarks) out.push_back({l.id, inv.apply(l.position), LandmarkFrame::Slice, slice_index});
  return out;
}

}  // namespace s2v
