#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"

namespace s2v {

/// Residual between an estimated and a true pose, decomposed per axis.
/// Translations in mm, rotations in degrees (Euler convention of
/// matrix_to_euler, i.e. R = Rz * Ry * Rx).
struct PoseError {
  double tx = 0.0, ty = 0.0, tz = 0.0;
  double euclidean = 0.0;
  double rx = 0.0, ry = 0.0, rz = 0.0;
  double geodesic = 0.0;
};

// Residual delta = compose(estimate, truth^-1).
PoseError pose_error(const RigidTransform& estimate, const RigidTransform& truth);

enum class LandmarkFrame { Volume, Slice };

struct Landmark {
  std::string id;
  Vec3 position = Vec3::Zero();  // mm, in the frame named by `frame`
  LandmarkFrame frame = LandmarkFrame::Volume;
  int slice_index = -1;  // frame index when frame == Slice
};

/// Mean and sample standard deviation (n - 1 denominator). With a single
/// value the SD is reported as 0 and `sd_defined` is false.
struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  bool sd_defined = false;
};

SummaryStats summarize(std::span<const double> values);

struct TreResult {
  SummaryStats stats;
  std::vector<std::pair<std::string, double>> per_pair;
};

/// Target registration error. Pairs are matched by id; each distance is
/// || estimate(slice point) - volume point ||, with estimate mapping the
/// slice frame into the volume frame. Throws NoPairs when nothing matches.
TreResult tre(std::span<const Landmark> volume_landmarks, std::span<const Landmark> slice_landmarks,
              const RigidTransform& estimate);

/// Uniform augmentation ranges (half-widths) per axis.
struct AugmentationSpec {
  Vec3 t_range{10.0, 10.0, 5.0};  // mm
  Vec3 r_range{5.0, 5.0, 10.0};   // degrees, applied to Euler x, y, z
};

/// Gaussian perturbation of an existing pose.
struct PerturbationSpec {
  double translation_sigma = 1.0;  // mm per axis
  double rotation_sigma = 1.5;     // degrees per Euler axis
  int count = 100;
};

void validate(const AugmentationSpec& spec);
void validate(const PerturbationSpec& spec);

/// Seeded stream of augmentation transforms. Each draw takes three
/// translations then three Euler angles from one mt19937_64 engine.
class AugmentationSampler {
 public:
  AugmentationSampler(const AugmentationSpec& spec, std::uint64_t seed);
  RigidTransform next();
  // The raw draw behind the last call to next(): translation and Euler angles.
  const Vec3& last_translation() const { return last_t_; }
  const EulerAnglesXYZ& last_euler() const { return last_e_; }

 private:
  AugmentationSpec spec_;
  std::mt19937_64 rng_;
  Vec3 last_t_ = Vec3::Zero();
  EulerAnglesXYZ last_e_;
};

RigidTransform sample_augmentation(const AugmentationSpec& spec, std::uint64_t seed);

/// `count` candidates around `base`. Candidate 0 is always `base` itself;
/// the rest add N(0, sigma_t) to each translation component and rotate by
/// Euler angles drawn from N(0, sigma_r): R = R_base * R(noise).
std::vector<RigidTransform> generate_candidates(const RigidTransform& base, const PerturbationSpec& spec,
                                                std::uint64_t seed);

/// Index of the candidate whose slice best matches `ref` under LNCC.
std::size_t select_best_candidate(const Volume3D& v, const Image2D& ref, std::span<const RigidTransform> candidates,
                                  int kernel);

struct CdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;  // fraction of errors <= threshold
};

/// Right-continuous empirical CDF as its jump points, in increasing order.
/// Throws EmptyList on empty input.
std::vector<CdfPoint> empirical_cdf(std::span<const double> errors);
double cdf_fraction(std::span<const double> errors, double threshold);

}  // namespace s2v
