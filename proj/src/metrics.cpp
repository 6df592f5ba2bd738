#include "s2v/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "s2v/error.hpp"

namespace s2v {

LossWeights LossWeights::from_ratio(double a, double b, double g) {
  const double s = a + b + g;
  if (!(s > 0.0) || a < 0.0 || b < 0.0 || g < 0.0)
    throw Error(ErrorCode::InvalidArgument, "loss weight ratio must be nonnegative with positive sum");
  return {a / s, b / s, g / s};
}

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) throw Error(ErrorCode::Validation, "loss weights must be nonnegative");
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-12) throw Error(ErrorCode::Validation, "loss weights must sum to 1");
}

namespace {

// Local variance below this fraction of the local second moment is treated as
// zero: the windowed sums cannot resolve it.
constexpr double kRelativeVarianceFloor = 1e-10;
constexpr int kResyncInterval = 32;

void check_same_raster(const Image2D& a, const Image2D& b) {
  if (a.geometry.dims != b.geometry.dims || a.intensities.size() != b.intensities.size() ||
      a.mask.size() != a.intensities.size() || b.mask.size() != b.intensities.size())
    throw Error(ErrorCode::InvalidArgument, "metric inputs must share one raster");
}

struct JointStats {
  std::size_t count = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

JointStats joint_means(const Image2D& a, const Image2D& b) {
  JointStats s;
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (a.mask[i] && b.mask[i]) {
      ++s.count;
      sa += a.intensities[i];
      sb += b.intensities[i];
    }
  }
  if (s.count > 0) {
    s.mean_a = sa / static_cast<double>(s.count);
    s.mean_b = sb / static_cast<double>(s.count);
  }
  return s;
}

}  // namespace

MetricResult lncc(const Image2D& a, const Image2D& b, int kernel, std::size_t min_overlap) {
  check_same_raster(a, b);
  if (kernel < 3 || kernel % 2 == 0) throw Error(ErrorCode::InvalidArgument, "LNCC kernel must be odd and >= 3");

  MetricResult result;
  const JointStats js = joint_means(a, b);
  result.overlap_count = js.count;
  if (js.count < min_overlap) return result;
  result.valid = true;

  const int w = a.geometry.dims[0];
  const int h = a.geometry.dims[1];
  const int r = kernel / 2;
  constexpr int kChannels = 6;  // count, a, b, aa, bb, ab; centred on the joint means

  // Adds sign * channels of row y into the per-column window sums.
  std::vector<double> column(static_cast<std::size_t>(kChannels) * w, 0.0);
  const auto accumulate_row = [&](int y, double sign) {
    const std::size_t base = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = base + static_cast<std::size_t>(x);
      if (!(a.mask[i] && b.mask[i])) continue;
      const double u = a.intensities[i] - js.mean_a;
      const double v = b.intensities[i] - js.mean_b;
      double* c = column.data() + static_cast<std::size_t>(kChannels) * x;
      c[0] += sign * 1.0;
      c[1] += sign * u;
      c[2] += sign * v;
      c[3] += sign * (u * u);
      c[4] += sign * (v * v);
      c[5] += sign * (u * v);
    }
  };

  double total = 0.0;
  std::size_t contributing = 0;
  double win[kChannels] = {};
  for (int y = 0; y < h; ++y) {
    // Sliding sums are recomputed from scratch every kResyncInterval rows and
    // columns to bound drift.
    if (y % kResyncInterval == 0) {
      std::fill(column.begin(), column.end(), 0.0);
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) accumulate_row(yy, 1.0);
    } else {
      if (y + r < h) accumulate_row(y + r, 1.0);
      if (y - r - 1 >= 0) accumulate_row(y - r - 1, -1.0);
    }

    const std::size_t base = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      if (x % kResyncInterval == 0) {
        std::fill(win, win + kChannels, 0.0);
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
          for (int c = 0; c < kChannels; ++c) win[c] += column[static_cast<std::size_t>(kChannels) * xx + c];
      } else {
        if (x + r < w)
          for (int c = 0; c < kChannels; ++c) win[c] += column[static_cast<std::size_t>(kChannels) * (x + r) + c];
        if (x - r - 1 >= 0)
          for (int c = 0; c < kChannels; ++c) win[c] -= column[static_cast<std::size_t>(kChannels) * (x - r - 1) + c];
      }
      const std::size_t i = base + static_cast<std::size_t>(x);
      if (!(a.mask[i] && b.mask[i])) continue;
      const double cnt = std::round(win[0]);
      if (cnt < 2.0) continue;
      const double var_a = win[3] - win[1] * (win[1] / cnt);
      const double var_b = win[4] - win[2] * (win[2] / cnt);
      if (!(var_a > kRelativeVarianceFloor * win[3]) || !(var_b > kRelativeVarianceFloor * win[4])) continue;
      const double cov = win[5] - win[1] * (win[2] / cnt);
      // Symmetric in (a, b): the product and the covariance commute exactly.
      const double ncc = std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
      total += ncc;
      ++contributing;
    }
  }
  if (contributing == 0) {
    result.status = MetricStatus::ZeroVariance;
    result.value = 0.0;
    return result;
  }
  result.status = MetricStatus::Ok;
  result.value = total / static_cast<double>(contributing);
  return result;
}

MetricResult gncc(const Image2D& a, const Image2D& b, std::size_t min_overlap) {
  check_same_raster(a, b);
  MetricResult result;
  const JointStats js = joint_means(a, b);
  result.overlap_count = js.count;
  if (js.count < min_overlap || js.count == 0) return result;
  result.valid = true;

  double saa = 0.0, sbb = 0.0, sab = 0.0, raw_a = 0.0, raw_b = 0.0;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (!(a.mask[i] && b.mask[i])) continue;
    const double x = a.intensities[i] - js.mean_a;
    const double y = b.intensities[i] - js.mean_b;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
    raw_a += a.intensities[i] * a.intensities[i];
    raw_b += b.intensities[i] * b.intensities[i];
  }
  const double floor_a = 1e-24 * (raw_a + 1e-300);
  const double floor_b = 1e-24 * (raw_b + 1e-300);
  if (!(saa > floor_a) || !(sbb > floor_b)) {
    result.status = MetricStatus::ZeroVariance;
    return result;
  }
  result.status = MetricStatus::Ok;
  result.value = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return result;
}

double translation_mse(const Vec3& pred, const Vec3& gt) { return (pred - gt).squaredNorm(); }

LossTerms combined_loss_terms(const MetricResult& similarity, const TransformParams& pred, const TransformParams& gt,
                              const LossWeights& w) {
  LossTerms t;
  t.overlap_ok = similarity.valid;
  t.similarity = similarity.valid ? 1.0 - similarity.value : 2.0;
  t.translation = (pred.trans - gt.trans).norm();
  t.rotation = geodesic_error_radians(gram_schmidt_6d_to_matrix(pred.rot6d), gram_schmidt_6d_to_matrix(gt.rot6d));
  t.total = w.alpha * t.similarity + w.beta * t.translation + w.gamma * t.rotation;
  return t;
}

double combined_loss(const Image2D& pred_slice, const Image2D& ref, const TransformParams& pred,
                     const TransformParams& gt, const LossWeights& w, int kernel, std::size_t min_overlap) {
  w.validate();
  return combined_loss_terms(lncc(pred_slice, ref, kernel, min_overlap), pred, gt, w).total;
}

}  // namespace s2v
