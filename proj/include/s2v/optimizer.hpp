#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"
#include "s2v/metrics.hpp"

namespace s2v {

enum class MetricKind { Lncc, Gncc };

/// Settings for intensity-driven pose refinement.
///
/// Steps are expressed per coordinate class: translations in mm, the 6D
/// rotation coordinates in raw (unitless) units. A descent step moves the
/// parameters by at most `step_trans` / `step_rot` (times the schedule and the
/// current relaxation) along the scaled negative gradient.
struct OptimizerConfig {
  MetricKind metric = MetricKind::Lncc;
  int kernel = 51;  // LNCC window, pixels
  std::size_t min_overlap = kDefaultMinOverlap;
  int max_iters = 200;
  double step_trans = 0.5;
  double step_rot = 0.01;
  double fd_step_trans = 0.25;
  double fd_step_rot = 0.005;
  double decay = 0.8;  // schedule factor applied every `patience` iterations
  int patience = 80;   // also the early-stop window for `tol`
  double tol = 1e-6;
  double relaxation = 0.5;           // step shrink on a rejected step or gradient reversal
  double min_step_fraction = 1e-3;   // converged once the relaxed step falls below this
  double coordinate_fraction = 1.0;  // < 1 enables seeded random coordinate subsampling
  std::uint64_t seed = 0;
  int threads = 1;         // workers used inside each slice extraction
  int pyramid_levels = 3;  // refine runs coarse-to-fine over this many 2x levels

  void validate() const;
};

enum class OptimizeStatus { Converged, MaxIters, LostOverlap };

struct Evaluation {
  double loss = 2.0;
  double metric = 0.0;
  std::size_t overlap_count = 0;
  bool valid = false;
};

struct TraceEntry {
  TransformParams params;  // current iterate after this iteration
  double loss = 0.0;       // loss of the current iterate
  std::size_t overlap_count = 0;
  bool accepted = false;  // whether this iteration's candidate step was taken
};

struct OptimizeTrace {
  std::vector<TraceEntry> iterations;
  OptimizeStatus status = OptimizeStatus::MaxIters;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::size_t evaluations = 0;  // all levels
  int coarse_iterations = 0;    // spent on downsampled levels before `iterations`

  int iteration_count() const { return static_cast<int>(iterations.size()); }
  int total_iterations() const { return coarse_iterations + iteration_count(); }
};

using ScalarObjective = std::function<double(const TransformParams&)>;
using PoseEvaluator = std::function<Evaluation(const TransformParams&)>;

/// Central differences per coordinate: translations use fd_step_trans, the
/// 6D coordinates fd_step_rot. Coordinates with active[i] == false are left
/// at zero and not probed. Throws NonFinite if any probe is not finite.
TransformParams::Vector fd_gradient(const ScalarObjective& objective, const TransformParams& p,
                                    const OptimizerConfig& cfg, const std::vector<bool>* active = nullptr);

/// (step_trans, step_rot) scaled by decay^(iter / patience).
std::pair<double, double> sgd_step_schedule(const OptimizerConfig& cfg, int iter);

struct MinimizeResult {
  TransformParams params;
  Evaluation final;
  OptimizeTrace trace;
};

/// Regular-step gradient descent in the 9-dim parameter space. Rotations are
/// reprojected through Gram-Schmidt after every step; only improving steps
/// are accepted, so the current iterate is always the best seen.
MinimizeResult minimize(const PoseEvaluator& evaluate, const TransformParams& init, const OptimizerConfig& cfg);

/// Similarity objective for a pose: 1 - metric(slice(v, outer o T(p)), ref).
/// Unusable overlaps evaluate to 2.
class PoseObjective {
 public:
  PoseObjective(const Volume3D& volume, const Image2D& reference, const RigidTransform& outer,
                const OptimizerConfig& cfg);
  Evaluation operator()(const TransformParams& p) const;
  Evaluation at(const RigidTransform& inner) const;

 private:
  const Volume3D& volume_;
  const Image2D& reference_;
  RigidTransform outer_;
  OptimizerConfig cfg_;
};

struct RefineResult {
  RigidTransform transform;
  OptimizeTrace trace;
  Evaluation final;
};

/// Refines a full slice-to-volume pose starting from `init`.
///
/// With pyramid_levels > 1 the volume and reference are repeatedly halved
/// (downsample2) and the descent runs from the coarsest level down, steps
/// doubled per level. A coarse level stops once its relaxed step falls below
/// half the step of the next finer level. Levels stop early once the reference would drop below
/// 16 pixels or the volume below 8 voxels along an axis. The trace describes
/// the full-resolution pass; the full-resolution pass starts from the coarse
/// estimate unless `init` scores better there.
RefineResult refine(const Volume3D& v, const Image2D& ref, const RigidTransform& init, const OptimizerConfig& cfg);

/// Refines only the inner factor of compose(outer, inner), starting from
/// `init_inner`. The returned transform is the refined inner factor.
RefineResult refine_correction(const Volume3D& v, const Image2D& ref, const RigidTransform& outer,
                               const RigidTransform& init_inner, const OptimizerConfig& cfg);

}  // namespace s2v
