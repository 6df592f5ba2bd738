#pragma once

#include <span>
#include <vector>

#include "s2v/evaluation.hpp"
#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"
#include "s2v/optimizer.hpp"

namespace s2v {

struct FrameInput {
  double timestamp = 0.0;
  Image2D image;
  RigidTransform tracked;  // tracker-reported slice-to-volume pose
};

enum class FrameStatus { Success, LostOverlap, Diverged };

struct ModuleResult {
  RigidTransform correction;
  FrameStatus status = FrameStatus::Success;
  double metric_value = 0.0;
  int iterations = 0;
};

/// Anything that can estimate the correction for one frame. The full pose of
/// the frame is compose(tracked, correction).
class RegistrationModule {
 public:
  virtual ~RegistrationModule() = default;
  virtual ModuleResult register_frame(const Volume3D& volume, const Image2D& image, const RigidTransform& tracked,
                                      const RigidTransform& warm_start) = 0;
};

/// Intensity-based module: refines the correction by gradient descent on
/// 1 - metric, starting from the warm start.
class IntensityRegistration final : public RegistrationModule {
 public:
  explicit IntensityRegistration(OptimizerConfig cfg);
  ModuleResult register_frame(const Volume3D& volume, const Image2D& image, const RigidTransform& tracked,
                              const RigidTransform& warm_start) override;
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
};

enum class FailurePolicy { ResetToIdentity, CarryLastGood };

struct WorkflowConfig {
  FailurePolicy failure_policy = FailurePolicy::ResetToIdentity;
  bool warm_start = true;  // false: every frame starts from the identity correction
};

struct FrameResult {
  RigidTransform initial_correction;
  RigidTransform correction;
  FrameStatus status = FrameStatus::Success;
  double runtime_ms = 0.0;
  double metric_value = 0.0;
  int iterations = 0;
};

/// Runs the module over the frames in order. Frame i starts from the
/// correction of frame i - 1 (identity for the first frame, and after a
/// failure unless CarryLastGood is selected). Failures are reported per frame.
/// Throws Validation when there are no frames or timestamps do not increase.
std::vector<FrameResult> register_sequence(const Volume3D& volume, std::span<const FrameInput> frames,
                                           RegistrationModule& module, const WorkflowConfig& cfg = {});

/// A registration counts as successful when its Euclidean translation error
/// is strictly below 10 mm.
inline constexpr double kSuccessThresholdMm = 10.0;
bool classify_success(const PoseError& err);

}  // namespace s2v
