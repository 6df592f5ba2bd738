#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2v/evaluation.hpp"
#include "s2v/geometry.hpp"
#include "s2v/imaging.hpp"
#include "s2v/metrics.hpp"
#include "s2v/optimizer.hpp"
#include "s2v/phantom.hpp"
#include "s2v/workflow.hpp"

namespace s2v::io {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

/// Everything a CLI run needs besides its positional inputs.
struct RunConfig {
  std::uint64_t seed = 0;
  PreprocessConfig preprocessing;
  LossWeights loss_weights;
  OptimizerConfig optimizer;  // also carries the metric choice
  WorkflowConfig workflow;
  std::string volume_path;
  std::string output_dir;

  void validate() const;
  bool operator==(const RunConfig& other) const;
};

// JSON text helpers. Parse errors carry "line L, column C"; unknown keys and
// failed invariants raise Validation.
nlohmann::json parse_json(const std::string& text, const std::string& origin);
nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

nlohmann::json to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);
RigidTransform read_transform(const fs::path& path);
void write_transform(const fs::path& path, const RigidTransform& t);

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig read_run_config(const fs::path& path);

nlohmann::json to_json(const PhantomSpec& s);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

nlohmann::json landmarks_to_json(const std::vector<Landmark>& landmarks);
std::vector<Landmark> landmarks_from_json(const nlohmann::json& j);
std::vector<Landmark> read_landmarks(const fs::path& path);

/// `.svraw` rasters: little-endian float32 samples, x fastest, with a JSON
/// sidecar at `<path>.json` and a uint8 mask file next to it.
void write_volume(const fs::path& path, const Volume3D& v);
Volume3D read_volume(const fs::path& path);
void write_image(const fs::path& path, const Image2D& img);
Image2D read_image(const fs::path& path);

struct ManifestFrame {
  double timestamp = 0.0;
  std::string image;  // relative to the manifest directory
  RigidTransform tracked;
  std::optional<RigidTransform> truth_pose;
};

struct Manifest {
  std::vector<ManifestFrame> frames;
  std::optional<std::string> landmarks;  // volume-frame landmarks file, relative
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

/// One row of the results table. Error fields are absent without a truth pose.
struct ResultRow {
  int frame = 0;
  std::optional<PoseError> error;
  std::optional<SummaryStats> tre;
  bool success = false;
  double runtime_ms = 0.0;
  std::string status;
};

std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

std::string cdf_csv(const std::vector<CdfPoint>& points);

std::string to_string(FrameStatus s);

}  // namespace s2v::io
