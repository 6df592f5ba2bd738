#include "s2v/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "s2v/error.hpp"
#include "s2v/metrics.hpp"
#include "s2v/resampler.hpp"

namespace s2v {

PoseError pose_error(const RigidTransform& estimate, const RigidTransform& truth) {
  const RigidTransform delta = compose(estimate, truth.inverse());
  PoseError e;
  e.tx = delta.translation.x();
  e.ty = delta.translation.y();
  e.tz = delta.translation.z();
  e.euclidean = delta.translation.norm();
  const EulerAnglesXYZ angles = matrix_to_euler(delta.rotation);
  e.rx = angles.rx;
  e.ry = angles.ry;
  e.rz = angles.rz;
  e.geodesic = geodesic_error(estimate.rotation, truth.rotation);
  return e;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.sd_defined = true;
  }
  return s;
}

TreResult tre(std::span<const Landmark> volume_landmarks, std::span<const Landmark> slice_landmarks,
              const RigidTransform& estimate) {
  std::map<std::string, Vec3> in_volume;
  for (const Landmark& l : volume_landmarks) in_volume[l.id] = l.position;

  TreResult r;
  std::vector<double> distances;
  for (const Landmark& l : slice_landmarks) {
    const auto it = in_volume.find(l.id);
    if (it == in_volume.end()) continue;
    const double d = (estimate.apply(l.position) - it->second).norm();
    r.per_pair.emplace_back(l.id, d);
    distances.push_back(d);
  }
  if (distances.empty()) throw Error(ErrorCode::NoPairs, "no landmark ids shared between volume and slice");
  r.stats = summarize(distances);
  return r;
}

void validate(const AugmentationSpec& spec) {
  if (spec.t_range.minCoeff() < 0.0 || spec.r_range.minCoeff() < 0.0)
    throw Error(ErrorCode::Validation, "augmentation half-widths must be >= 0");
}

void validate(const PerturbationSpec& spec) {
  if (spec.translation_sigma < 0.0 || spec.rotation_sigma < 0.0)
    throw Error(ErrorCode::Validation, "perturbation sigmas must be >= 0");
  if (spec.count < 1) throw Error(ErrorCode::Validation, "perturbation count must be >= 1");
}

AugmentationSampler::AugmentationSampler(const AugmentationSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
  validate(spec_);
}

RigidTransform AugmentationSampler::next() {
  const auto uniform = [this](double half_width) {
    return std::uniform_real_distribution<double>(-half_width, half_width)(rng_);
  };
  // Zero-width ranges still consume a draw so streams stay aligned.
  for (int a = 0; a < 3; ++a) last_t_[a] = spec_.t_range[a] > 0.0 ? uniform(spec_.t_range[a]) : (rng_(), 0.0);
  double e[3];
  for (int a = 0; a < 3; ++a) e[a] = spec_.r_range[a] > 0.0 ? uniform(spec_.r_range[a]) : (rng_(), 0.0);
  last_e_ = {e[0], e[1], e[2]};
  return {euler_to_matrix(last_e_), last_t_};
}

RigidTransform sample_augmentation(const AugmentationSpec& spec, std::uint64_t seed) {
  return AugmentationSampler(spec, seed).next();
}

std::vector<RigidTransform> generate_candidates(const RigidTransform& base, const PerturbationSpec& spec,
                                                std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<RigidTransform> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  out.push_back(base);
  for (int c = 1; c < spec.count; ++c) {
    Vec3 dt;
    for (int a = 0; a < 3; ++a) dt[a] = spec.translation_sigma * unit(rng);
    EulerAnglesXYZ de;
    de.rx = spec.rotation_sigma * unit(rng);
    de.ry = spec.rotation_sigma * unit(rng);
    de.rz = spec.rotation_sigma * unit(rng);
    out.push_back({base.rotation * euler_to_matrix(de), base.translation + dt});
  }
  return out;
}

std::size_t select_best_candidate(const Volume3D& v, const Image2D& ref, std::span<const RigidTransform> candidates,
                                  int kernel) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyInput, "no candidates to select from");
  std::size_t best = 0;
  double best_value = -2.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const MetricResult m = lncc(slice_volume(v, ref.geometry, candidates[c]), ref, kernel);
    if (m.valid && m.value > best_value) {
      best_value = m.value;
      best = c;
    }
  }
  return best;
}

std::vector<CdfPoint> empirical_cdf(std::span<const double> errors) {
  if (errors.empty()) throw Error(ErrorCode::EmptyList, "CDF of an empty list");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double cdf_fraction(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw Error(ErrorCode::EmptyList, "CDF of an empty list");
  const auto below = std::count_if(errors.begin(), errors.end(), [threshold](double e) { return e <= threshold; });
  return static_cast<double>(below) / static_cast<double>(errors.size());
}

}  // namespace s2v
