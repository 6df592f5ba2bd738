#include "s2v/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "s2v/error.hpp"
#include "s2v/resampler.hpp"

namespace s2v {

void OptimizerConfig::validate() const {
  const auto fail = [](const char* what) { throw Error(ErrorCode::Validation, what); };
  if (kernel < 3 || kernel % 2 == 0) fail("optimizer.kernel must be odd and >= 3");
  if (max_iters < 1) fail("optimizer.max_iters must be >= 1");
  if (!(step_trans > 0.0) || !(step_rot > 0.0)) fail("optimizer steps must be > 0");
  if (!(fd_step_trans > 0.0) || !(fd_step_rot > 0.0)) fail("optimizer finite-difference steps must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) fail("optimizer.decay must lie in (0, 1]");
  if (patience < 1) fail("optimizer.patience must be >= 1");
  if (!(tol >= 0.0)) fail("optimizer.tol must be >= 0");
  if (!(relaxation > 0.0 && relaxation < 1.0)) fail("optimizer.relaxation must lie in (0, 1)");
  if (!(min_step_fraction > 0.0 && min_step_fraction <= 1.0)) fail("optimizer.min_step_fraction must lie in (0, 1]");
  if (!(coordinate_fraction > 0.0 && coordinate_fraction <= 1.0))
    fail("optimizer.coordinate_fraction must lie in (0, 1]");
  if (threads < 1) fail("optimizer.threads must be >= 1");
  if (pyramid_levels < 1) fail("optimizer.pyramid_levels must be >= 1");
}

TransformParams::Vector fd_gradient(const ScalarObjective& objective, const TransformParams& p,
                                    const OptimizerConfig& cfg, const std::vector<bool>* active) {
  const TransformParams::Vector x = p.to_vector();
  TransformParams::Vector g = TransformParams::Vector::Zero();
  for (int i = 0; i < TransformParams::kSize; ++i) {
    if (active && !(*active)[static_cast<std::size_t>(i)]) continue;
    const double h = TransformParams::is_translation_index(i) ? cfg.fd_step_trans : cfg.fd_step_rot;
    TransformParams::Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = objective(TransformParams::from_vector(xp));
    const double fm = objective(TransformParams::from_vector(xm));
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw Error(ErrorCode::NonFinite, "objective is not finite at a finite-difference probe");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

std::pair<double, double> sgd_step_schedule(const OptimizerConfig& cfg, int iter) {
  const double factor = std::pow(cfg.decay, static_cast<double>(std::max(iter, 0) / cfg.patience));
  return {cfg.step_trans * factor, cfg.step_rot * factor};
}

namespace {

std::vector<bool> pick_coordinates(std::mt19937_64& rng, double fraction) {
  std::vector<bool> active(TransformParams::kSize, true);
  if (fraction >= 1.0) return active;
  const int keep = std::max(1, static_cast<int>(std::lround(fraction * TransformParams::kSize)));
  std::vector<int> order(TransformParams::kSize);
  for (int i = 0; i < TransformParams::kSize; ++i) order[static_cast<std::size_t>(i)] = i;
  // Fisher-Yates with the raw engine so the stream is identical across standard libraries.
  for (int i = TransformParams::kSize - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::fill(active.begin(), active.end(), false);
  for (int i = 0; i < keep; ++i) active[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return active;
}

}  // namespace

MinimizeResult minimize(const PoseEvaluator& evaluate, const TransformParams& init, const OptimizerConfig& cfg) {
  cfg.validate();
  MinimizeResult r;
  OptimizeTrace& trace = r.trace;
  std::mt19937_64 rng(cfg.seed);

  TransformParams current = canonicalize(init);
  Evaluation cur = evaluate(current);
  ++trace.evaluations;
  trace.initial_loss = cur.loss;
  trace.best_loss = cur.loss;
  if (!cur.valid) {
    trace.status = OptimizeStatus::LostOverlap;
    r.params = current;
    r.final = cur;
    return r;
  }

  const ScalarObjective scalar = [&](const TransformParams& p) {
    ++trace.evaluations;
    return evaluate(p).loss;
  };

  TransformParams::Vector scale;
  for (int i = 0; i < TransformParams::kSize; ++i)
    scale[i] = TransformParams::is_translation_index(i) ? 1.0 : cfg.step_rot / cfg.step_trans;

  double relax = 1.0;
  bool need_gradient = true;
  bool any_accepted = false;
  bool any_valid_candidate = false;
  TransformParams::Vector direction = TransformParams::Vector::Zero();
  TransformParams::Vector previous_scaled = TransformParams::Vector::Zero();
  double window_start_loss = cur.loss;
  int window_start_iter = 0;
  trace.status = OptimizeStatus::MaxIters;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (need_gradient) {
      const std::vector<bool> active = pick_coordinates(rng, cfg.coordinate_fraction);
      const TransformParams::Vector g = fd_gradient(scalar, current, cfg, &active);
      // Steepest descent in coordinates scaled to the per-class step sizes.
      const TransformParams::Vector scaled = g.cwiseProduct(scale);
      const double norm = scaled.norm();
      if (!(norm > 0.0)) {
        trace.status = OptimizeStatus::Converged;
        break;
      }
      if (previous_scaled.dot(scaled) < 0.0) relax *= cfg.relaxation;
      previous_scaled = scaled;
      direction = scaled / norm;
      need_gradient = false;
    }
    if (relax < cfg.min_step_fraction) {
      trace.status = OptimizeStatus::Converged;
      break;
    }

    const double step = sgd_step_schedule(cfg, iter).first * relax;
    const TransformParams::Vector x = current.to_vector();
    const TransformParams::Vector candidate_x = x - step * direction.cwiseProduct(scale);

    TransformParams candidate;
    bool well_formed = true;
    try {
      candidate = canonicalize(TransformParams::from_vector(candidate_x));
    } catch (const Error&) {
      well_formed = false;
    }

    TraceEntry entry;
    if (well_formed) {
      const Evaluation e = evaluate(candidate);
      ++trace.evaluations;
      any_valid_candidate = any_valid_candidate || e.valid;
      if (e.valid && e.loss < cur.loss) {
        current = candidate;
        cur = e;
        entry.accepted = true;
        any_accepted = true;
        need_gradient = true;
      }
    }
    if (!entry.accepted) relax *= cfg.relaxation;

    entry.params = current;
    entry.loss = cur.loss;
    entry.overlap_count = cur.overlap_count;
    trace.iterations.push_back(entry);
    trace.best_loss = std::min(trace.best_loss, cur.loss);

    if (iter + 1 - window_start_iter >= cfg.patience) {
      if (window_start_loss - cur.loss <= cfg.tol) {
        trace.status = OptimizeStatus::Converged;
        break;
      }
      window_start_loss = cur.loss;
      window_start_iter = iter + 1;
    }
  }

  if (!any_accepted && !any_valid_candidate && !trace.iterations.empty()) trace.status = OptimizeStatus::LostOverlap;
  r.params = current;
  r.final = cur;
  return r;
}

PoseObjective::PoseObjective(const Volume3D& volume, const Image2D& reference, const RigidTransform& outer,
                             const OptimizerConfig& cfg)
    : volume_(volume), reference_(reference), outer_(outer), cfg_(cfg) {}

Evaluation PoseObjective::at(const RigidTransform& inner) const {
  const Image2D moved = slice_volume(volume_, reference_.geometry, compose(outer_, inner), cfg_.threads);
  const MetricResult m = cfg_.metric == MetricKind::Lncc ? lncc(moved, reference_, cfg_.kernel, cfg_.min_overlap)
                                                          : gncc(moved, reference_, cfg_.min_overlap);
  Evaluation e;
  e.valid = m.valid;
  e.metric = m.value;
  e.overlap_count = m.overlap_count;
  e.loss = m.valid ? 1.0 - m.value : 2.0;
  return e;
}

Evaluation PoseObjective::operator()(const TransformParams& p) const {
  RigidTransform inner;
  try {
    inner = to_transform(p);
  } catch (const Error&) {
    return {};
  }
  return at(inner);
}

namespace {

constexpr int kMinPyramidImageExtent = 16;
constexpr int kMinPyramidVolumeExtent = 8;
// Coarse levels stop once their step drops below half the next level's step.
constexpr double kCoarseMinStepFraction = 0.25;

bool can_halve(const Volume3D& v, const Image2D& ref) {
  for (int n : ref.dims())
    if (n / 2 < kMinPyramidImageExtent) return false;
  for (int n : v.dims())
    if (n / 2 < kMinPyramidVolumeExtent) return false;
  return true;
}

OptimizerConfig level_config(const OptimizerConfig& cfg, int level) {
  OptimizerConfig c = cfg;
  const double scale = std::ldexp(1.0, level);
  c.step_trans *= scale;
  c.step_rot *= scale;
  c.fd_step_trans *= scale;
  c.fd_step_rot *= scale;
  const std::size_t shrunk = cfg.min_overlap >> (2 * level);
  c.min_overlap = std::min(cfg.min_overlap, std::max<std::size_t>(shrunk, 16));
  c.min_step_fraction = std::max(cfg.min_step_fraction, kCoarseMinStepFraction);
  return c;
}

}  // namespace

RefineResult refine_correction(const Volume3D& v, const Image2D& ref, const RigidTransform& outer,
                               const RigidTransform& init_inner, const OptimizerConfig& cfg) {
  cfg.validate();
  std::vector<Volume3D> volumes;
  std::vector<Image2D> refs;
  for (int level = 1; level < cfg.pyramid_levels; ++level) {
    const Volume3D& fv = volumes.empty() ? v : volumes.back();
    const Image2D& fr = refs.empty() ? ref : refs.back();
    if (!can_halve(fv, fr)) break;
    volumes.push_back(downsample2(fv));
    refs.push_back(downsample2(fr));
  }

  TransformParams start = to_params(init_inner);
  int coarse_iterations = 0;
  std::size_t coarse_evaluations = 0;
  for (int level = static_cast<int>(volumes.size()); level >= 1; --level) {
    const OptimizerConfig c = level_config(cfg, level);
    const std::size_t at = static_cast<std::size_t>(level - 1);
    const PoseObjective objective(volumes[at], refs[at], outer, c);
    const MinimizeResult m = minimize([&](const TransformParams& p) { return objective(p); }, start, c);
    coarse_iterations += m.trace.iteration_count();
    coarse_evaluations += m.trace.evaluations;
    if (m.trace.status != OptimizeStatus::LostOverlap && m.final.valid) start = m.params;
  }

  const PoseObjective objective(v, ref, outer, cfg);
  if (!volumes.empty()) {
    const TransformParams original = to_params(init_inner);
    const Evaluation coarse = objective(start);
    const Evaluation initial = objective(original);
    coarse_evaluations += 2;
    if (initial.valid && (!coarse.valid || initial.loss < coarse.loss)) start = original;
  }
  MinimizeResult m = minimize([&](const TransformParams& p) { return objective(p); }, start, cfg);
  m.trace.coarse_iterations = coarse_iterations;
  m.trace.evaluations += coarse_evaluations;
  return {to_transform(m.params), m.trace, m.final};
}

RefineResult refine(const Volume3D& v, const Image2D& ref, const RigidTransform& init, const OptimizerConfig& cfg) {
  return refine_correction(v, ref, RigidTransform::identity(), init, cfg);
}

}  // namespace s2v
