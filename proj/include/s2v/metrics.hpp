#pragma once

#include <cstddef>

#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"

namespace s2v {

/// Weights of the combined loss. Must be nonnegative and sum to 1.
struct LossWeights {
  double alpha = 20.0 / 31.0;
  double beta = 1.0 / 31.0;
  double gamma = 10.0 / 31.0;

  static LossWeights from_ratio(double a, double b, double g);
  void validate() const;
};

enum class MetricStatus {
  Ok,
  NoOverlap,     // joint mask smaller than the minimum overlap
  ZeroVariance,  // overlap fine but no usable variance (value reported as 0)
};

struct MetricResult {
  double value = 0.0;
  std::size_t overlap_count = 0;
  bool valid = false;  // overlap_count >= min_overlap
  MetricStatus status = MetricStatus::NoOverlap;
};

inline constexpr std::size_t kDefaultMinOverlap = 64;

/// Local NCC over kernel x kernel windows restricted to the joint mask of a
/// and b. Each window centred on a joint-valid pixel contributes its NCC when
/// it holds at least two joint-valid pixels and both images vary inside it;
/// the result is the mean over contributing centres. Window sums come from
/// separable box filters, so cost is linear in the pixel count.
MetricResult lncc(const Image2D& a, const Image2D& b, int kernel, std::size_t min_overlap = kDefaultMinOverlap);

/// Single NCC over the joint mask.
MetricResult gncc(const Image2D& a, const Image2D& b, std::size_t min_overlap = kDefaultMinOverlap);

/// Squared Euclidean norm of pred - gt (mm^2).
double translation_mse(const Vec3& pred, const Vec3& gt);

struct LossTerms {
  double similarity = 0.0;   // 1 - lncc, or 2 when the overlap is unusable
  double translation = 0.0;  // ||dt|| in mm
  double rotation = 0.0;     // geodesic, radians
  double total = 0.0;
  bool overlap_ok = false;
};

/// alpha * (1 - lncc) + beta * ||trans - trans_gt|| + gamma * geodesic(rad).
/// An unusable overlap substitutes the worst similarity term (alpha * 2).
LossTerms combined_loss_terms(const MetricResult& similarity, const TransformParams& pred, const TransformParams& gt,
                              const LossWeights& w);
double combined_loss(const Image2D& pred_slice, const Image2D& ref, const TransformParams& pred,
                     const TransformParams& gt, const LossWeights& w, int kernel = 51,
                     std::size_t min_overlap = kDefaultMinOverlap);

}  // namespace s2v
