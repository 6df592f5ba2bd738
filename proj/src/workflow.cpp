#include "s2v/workflow.hpp"

#include <chrono>

#include "s2v/error.hpp"

namespace s2v {

IntensityRegistration::IntensityRegistration(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

ModuleResult IntensityRegistration::register_frame(const Volume3D& volume, const Image2D& image,
                                                   const RigidTransform& tracked, const RigidTransform& warm_start) {
  ModuleResult out;
  out.correction = warm_start;
  try {
    const RefineResult r = refine_correction(volume, image, tracked, warm_start, cfg_);
    out.iterations = r.trace.total_iterations();
    out.metric_value = r.final.metric;
    if (r.trace.status == OptimizeStatus::LostOverlap || !r.final.valid) {
      out.status = FrameStatus::LostOverlap;
      return out;
    }
    out.correction = r.transform;
    out.status = FrameStatus::Success;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFinite && e.code() != ErrorCode::DegenerateInput) throw;
    out.status = FrameStatus::Diverged;
  }
  return out;
}

std::vector<FrameResult> register_sequence(const Volume3D& volume, std::span<const FrameInput> frames,
                                           RegistrationModule& module, const WorkflowConfig& cfg) {
  if (frames.empty()) throw Error(ErrorCode::Validation, "a sequence needs at least one frame");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp))
      throw Error(ErrorCode::Validation, "frame timestamps must be strictly increasing");
  }

  std::vector<FrameResult> results;
  results.reserve(frames.size());
  RigidTransform previous = RigidTransform::identity();
  for (const FrameInput& frame : frames) {
    FrameResult r;
    r.initial_correction = cfg.warm_start ? previous : RigidTransform::identity();
    const auto start = std::chrono::steady_clock::now();
    const ModuleResult m = module.register_frame(volume, frame.image, frame.tracked, r.initial_correction);
    r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    r.correction = m.correction;
    r.status = m.status;
    r.metric_value = m.metric_value;
    r.iterations = m.iterations;

    if (r.status == FrameStatus::Success) {
      previous = r.correction;
    } else if (cfg.failure_policy == FailurePolicy::ResetToIdentity) {
      previous = RigidTransform::identity();
    }
    results.push_back(r);
  }
  return results;
}

bool classify_success(const PoseError& err) { return err.euclidean < kSuccessThresholdMm; }

}  // namespace s2v
