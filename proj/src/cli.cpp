#include "s2v/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "s2v/evaluation.hpp"
#include "s2v/io.hpp"
#include "s2v/optimizer.hpp"
#include "s2v/phantom.hpp"
#include "s2v/resampler.hpp"
#include "s2v/workflow.hpp"

namespace s2v::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
      return kExitIo;
    case ErrorCode::NoOverlap:
      return kExitRegistration;
    default:
      return kExitValidation;
  }
}

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool reproducible = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream of the command");
  cmd->add_option("--config", c.config, "Run configuration JSON");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_flag("--reproducible", c.reproducible, "Write 0 for wall-clock fields so reruns are byte-identical");
}

io::RunConfig load_config(const Common& c) {
  io::RunConfig cfg = c.config.empty() ? io::RunConfig{} : io::read_run_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.optimizer.seed = *c.seed;
  }
  return cfg;
}

fs::path output_dir(const Common& c, const io::RunConfig& cfg) {
  const std::string dir = !c.out.empty() ? c.out : cfg.output_dir;
  if (dir.empty()) throw Error(ErrorCode::Validation, "--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string volume_path(const std::string& flag, const io::RunConfig& cfg) {
  const std::string p = !flag.empty() ? flag : cfg.volume_path;
  if (p.empty()) throw Error(ErrorCode::Validation, "--volume is required");
  return p;
}

SliceGeometry slice_geometry(const std::vector<int>& dims, double spacing) {
  if (dims.size() != 2) throw Error(ErrorCode::Validation, "--dims takes two extents");
  const SliceGeometry g = SliceGeometry::centered({dims[0], dims[1]}, spacing);
  validate(g);
  return g;
}

Vec3 to_vec3(const std::vector<double>& v, const char* flag) {
  if (v.size() != 3) throw Error(ErrorCode::Validation, std::string(flag) + " takes three values");
  return {v[0], v[1], v[2]};
}

json pose_error_json(const PoseError& e) {
  return {{"tx", e.tx}, {"ty", e.ty}, {"tz", e.tz}, {"euclidean", e.euclidean},
          {"rx", e.rx}, {"ry", e.ry}, {"rz", e.rz}, {"geodesic", e.geodesic}};
}

json stats_json(const SummaryStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"sd", s.sd}, {"sd_defined", s.sd_defined}};
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// TRE of `estimate` using landmarks mapped into the slice frame by the truth.
TreResult tre_against_truth(const std::vector<Landmark>& volume_lms, const RigidTransform& truth,
                            const RigidTransform& estimate, int slice_index) {
  const std::vector<Landmark> in_slice = landmarks_in_slice(volume_lms, truth, slice_index);
  return tre(volume_lms, in_slice, estimate);
}

// ---- phantom -------------------------------------------------------------

struct PhantomArgs {
  Common common;
  std::string spec;
  std::vector<int> dims{140, 120, 80};
  double spacing = 1.0;
  std::optional<double> speckle;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.common);
  PhantomSpec spec;
  if (!a.spec.empty()) {
    spec = io::phantom_spec_from_json(io::read_json(a.spec));
    if (a.common.seed) spec.speckle.seed = *a.common.seed;
  } else {
    if (a.dims.size() != 3) throw Error(ErrorCode::Validation, "--dims takes three extents");
    spec = default_phantom_spec({a.dims[0], a.dims[1], a.dims[2]}, a.spacing, cfg.seed);
  }
  if (a.speckle) spec.speckle.amplitude = *a.speckle;

  const RenderedPhantom ph = render(spec);
  const fs::path dir = output_dir(a.common, cfg);
  io::write_volume(dir / "volume.svraw", ph.volume);
  io::write_json(dir / "landmarks.json", io::landmarks_to_json(ph.landmarks));
  io::write_json(dir / "phantom_spec.json", io::to_json(spec));

  out << "id x_mm y_mm z_mm\n";
  for (const Landmark& l : ph.landmarks)
    out << l.id << fmt(" %.3f %.3f %.3f", l.position.x(), l.position.y(), l.position.z()) << "\n";
  return kExitOk;
}

// ---- slice ---------------------------------------------------------------

struct SliceArgs {
  Common common;
  std::string volume;
  std::string pose;
  std::vector<int> dims{100, 80};
  std::optional<double> spacing;
  double noise = 0.0;
};

int cmd_slice(const SliceArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.common);
  const Volume3D v = io::read_volume(volume_path(a.volume, cfg));
  const RigidTransform pose = a.pose.empty() ? RigidTransform::identity() : io::read_transform(a.pose);
  const SliceGeometry g = slice_geometry(a.dims, a.spacing.value_or(v.geometry.spacing.x()));
  const SlicePair pair = make_pair(v, g, pose, a.noise, cfg.seed);
  const fs::path dir = output_dir(a.common, cfg);
  io::write_image(dir / "slice.svraw", pair.image);
  io::write_transform(dir / "truth.json", pair.truth);
  out << "slice " << g.dims[0] << "x" << g.dims[1] << ", " << pair.image.mask_count() << " valid pixels\n";
  return kExitOk;
}

// ---- animate -------------------------------------------------------------

struct AnimateArgs {
  Common common;
  std::string volume;
  std::string probe;
  std::string landmarks;
  int frames = 20;
  double amplitude = 5.0;
  double period = 20.0;
  std::vector<double> direction{1.0, 0.0, 0.0};
  std::vector<int> dims{100, 80};
  std::optional<double> spacing;
  double noise = 0.0;
  double interval = 0.1;
};

int cmd_animate(const AnimateArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.common);
  const Volume3D v = io::read_volume(volume_path(a.volume, cfg));
  const RigidTransform probe = a.probe.empty() ? RigidTransform::identity() : io::read_transform(a.probe);
  const SliceGeometry g = slice_geometry(a.dims, a.spacing.value_or(v.geometry.spacing.x()));
  const MotionScript script =
      MotionScript::sinusoid(a.frames, a.amplitude, a.period, to_vec3(a.direction, "--direction"), probe);
  const AnimatedSequence seq = animate(v, g, script, {}, a.noise, cfg.seed, a.interval);

  const fs::path dir = output_dir(a.common, cfg);
  io::Manifest m;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.svraw", i);
    io::write_image(dir / name, seq.frames[i].image);
    m.frames.push_back({seq.frames[i].timestamp, name, seq.frames[i].tracked, seq.truth_poses[i]});
  }
  if (!a.landmarks.empty()) {
    io::write_json(dir / "landmarks.json", io::landmarks_to_json(io::read_landmarks(a.landmarks)));
    m.landmarks = "landmarks.json";
  }
  io::write_json(dir / "manifest.json", io::to_json(m));
  const auto lost = std::count(seq.overlap_ok.begin(), seq.overlap_ok.end(), false);
  out << seq.frames.size() << " frames written, " << lost << " without overlap\n";
  return kExitOk;
}

// ---- register ------------------------------------------------------------

struct RegisterArgs {
  Common common;
  std::string volume;
  std::string slice;
  std::string init;
  std::string truth;
  std::string landmarks;
};

int cmd_register(const RegisterArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.common);
  const fs::path dir = output_dir(a.common, cfg);
  const Volume3D v = preprocess(io::read_volume(volume_path(a.volume, cfg)), cfg.preprocessing);
  const Image2D ref = preprocess(io::read_image(a.slice), cfg.preprocessing);
  const RigidTransform init = a.init.empty() ? RigidTransform::identity() : io::read_transform(a.init);
  const std::optional<RigidTransform> truth =
      a.truth.empty() ? std::nullopt : std::optional(io::read_transform(a.truth));
  const std::vector<Landmark> landmarks = a.landmarks.empty() ? std::vector<Landmark>{} : io::read_landmarks(a.landmarks);

  const auto start = std::chrono::steady_clock::now();
  IntensityRegistration module(cfg.optimizer);
  const ModuleResult r = module.register_frame(v, ref, init, RigidTransform::identity());
  const double runtime_ms =
      a.common.reproducible ? 0.0
                            : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  const RigidTransform pose = compose(init, r.correction);

  json j;
  j["schema_version"] = io::kSchemaVersion;
  j["status"] = io::to_string(r.status);
  j["correction"] = io::to_json(r.correction);
  j["pose"] = io::to_json(pose);
  j["init"] = io::to_json(init);
  j["metric"] = {{"kind", cfg.optimizer.metric == MetricKind::Lncc ? "lncc" : "gncc"},
                 {"kernel", cfg.optimizer.kernel},
                 {"value", r.metric_value}};
  j["iterations"] = r.iterations;
  j["runtime_ms"] = runtime_ms;
  bool success = r.status == FrameStatus::Success;
  if (truth) {
    const PoseError e = pose_error(pose, *truth);
    success = success && classify_success(e);
    j["truth"] = io::to_json(*truth);
    j["error"] = pose_error_json(e);
    MetricResult similarity;
    similarity.valid = r.status == FrameStatus::Success;
    similarity.value = r.metric_value;
    j["combined_loss"] = combined_loss_terms(similarity, to_params(pose), to_params(*truth), cfg.loss_weights).total;
    if (!landmarks.empty()) {
      const TreResult t = tre_against_truth(landmarks, *truth, pose, 0);
      j["tre_mm"] = stats_json(t.stats);
    }
    out << io::to_string(r.status) << fmt(": %.3f mm, %.3f deg", e.euclidean, e.geodesic) << "\n";
  } else {
    out << io::to_string(r.status) << fmt(": metric %.4f", r.metric_value) << "\n";
  }
  j["success"] = success;
  io::write_json(dir / "result.json", j);
  return r.status == FrameStatus::Success ? kExitOk : kExitRegistration;
}

// ---- track ---------------------------------------------------------------

struct TrackArgs {
  Common common;
  std::string volume;
  std::string manifest;
  std::string landmarks;
};

int cmd_track(const TrackArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.common);
  const fs::path manifest_path = a.manifest;
  const io::Manifest m = io::manifest_from_json(io::read_json(manifest_path));
  const fs::path base = manifest_path.parent_path();
  const fs::path dir = output_dir(a.common, cfg);
  const Volume3D v = preprocess(io::read_volume(volume_path(a.volume, cfg)), cfg.preprocessing);

  std::vector<Landmark> landmarks;
  if (!a.landmarks.empty())
    landmarks = io::read_landmarks(a.landmarks);
  else if (m.landmarks)
    landmarks = io::read_landmarks(base / *m.landmarks);

  std::vector<FrameInput> frames;
  for (const io::ManifestFrame& f : m.frames)
    frames.push_back({f.timestamp, preprocess(io::read_image(base / f.image), cfg.preprocessing), f.tracked});

  IntensityRegistration module(cfg.optimizer);
  const std::vector<FrameResult> results = register_sequence(v, frames, module, cfg.workflow);

  std::vector<io::ResultRow> rows;
  int successes = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const FrameResult& r = results[i];
    io::ResultRow row;
    row.frame = static_cast<int>(i);
    row.status = io::to_string(r.status);
    row.runtime_ms = a.common.reproducible ? 0.0 : r.runtime_ms;
    row.success = r.status == FrameStatus::Success;
    const RigidTransform pose = compose(frames[i].tracked, r.correction);
    if (m.frames[i].truth_pose) {
      const PoseError e = pose_error(pose, *m.frames[i].truth_pose);
      row.error = e;
      row.success = row.success && classify_success(e);
      if (!landmarks.empty())
        row.tre = tre_against_truth(landmarks, *m.frames[i].truth_pose, pose, static_cast<int>(i)).stats;
    }
    successes += row.success ? 1 : 0;
    rows.push_back(std::move(row));
  }
  io::write_text(dir / "results.csv", io::results_csv(rows));
  out << successes << "/" << rows.size() << " frames succeeded\n";
  return successes > 0 ? kExitOk : kExitRegistration;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string results;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.common);
  const std::vector<io::ResultRow> rows = io::parse_results_csv(io::read_text(a.results));
  if (rows.empty()) throw Error(ErrorCode::EmptyList, a.results + ": no result rows");
  const fs::path dir = output_dir(a.common, cfg);

  std::vector<double> cols[11];
  const char* names[11] = {"tx", "ty", "tz", "euclidean", "rx", "ry", "rz", "geodesic", "tre_mean", "tre_sd", "runtime_ms"};
  int successes = 0;
  for (const io::ResultRow& r : rows) {
    successes += r.success ? 1 : 0;
    if (r.error) {
      const PoseError& e = *r.error;
      const double vals[8] = {e.tx, e.ty, e.tz, e.euclidean, e.rx, e.ry, e.rz, e.geodesic};
      for (int k = 0; k < 8; ++k) cols[k].push_back(vals[k]);
    }
    if (r.tre) {
      cols[8].push_back(r.tre->mean);
      cols[9].push_back(r.tre->sd);
    }
    cols[10].push_back(r.runtime_ms);
  }

  json columns = json::object();
  for (int k = 0; k < 11; ++k)
    if (!cols[k].empty()) columns[names[k]] = stats_json(summarize(cols[k]));
  const double rate = static_cast<double>(successes) / static_cast<double>(rows.size());
  const json summary = {{"schema_version", io::kSchemaVersion},
                        {"frames", rows.size()},
                        {"successes", successes},
                        {"success_rate", rate},
                        {"columns", columns}};
  io::write_json(dir / "summary.json", summary);
  io::write_text(dir / "cdf.csv", io::cdf_csv(cols[3].empty() ? std::vector<CdfPoint>{} : empirical_cdf(cols[3])));

  out << fmt("success rate %.4f", rate);
  if (!cols[3].empty()) {
    const SummaryStats s = summarize(cols[3]);
    out << fmt(", euclidean %.3f +/- %.3f mm", s.mean, s.sd);
  }
  out << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slice-to-volume registration toolkit", "s2v"};
  app.require_subcommand(1);

  PhantomArgs phantom;
  CLI::App* p = app.add_subcommand("phantom", "Render a synthetic volume with landmarks");
  add_common(p, phantom.common);
  p->add_option("--spec", phantom.spec, "Phantom spec JSON (default: built-in vessel phantom)");
  p->add_option("--dims", phantom.dims, "Volume extents of the built-in phantom")->expected(3);
  p->add_option("--spacing", phantom.spacing, "Voxel spacing of the built-in phantom, mm");
  p->add_option("--speckle", phantom.speckle, "Override the speckle amplitude");

  SliceArgs slice;
  CLI::App* s = app.add_subcommand("slice", "Extract a 2D image from a volume at a pose");
  add_common(s, slice.common);
  s->add_option("--volume", slice.volume, "Volume .svraw");
  s->add_option("--pose", slice.pose, "Slice-to-volume pose JSON (default identity)");
  s->add_option("--dims", slice.dims, "Image extents")->expected(2);
  s->add_option("--spacing", slice.spacing, "Pixel spacing, mm (default: volume spacing)");
  s->add_option("--noise", slice.noise, "Standard deviation of added white noise");

  AnimateArgs anim;
  CLI::App* an = app.add_subcommand("animate", "Write a scripted frame sequence and its manifest");
  add_common(an, anim.common);
  an->add_option("--volume", anim.volume, "Volume .svraw");
  an->add_option("--probe", anim.probe, "Probe pose JSON (default identity)");
  an->add_option("--landmarks", anim.landmarks, "Volume landmarks to reference from the manifest");
  an->add_option("--frames", anim.frames, "Number of frames");
  an->add_option("--amplitude", anim.amplitude, "Motion amplitude, mm");
  an->add_option("--period", anim.period, "Motion period, frames");
  an->add_option("--direction", anim.direction, "Motion direction")->expected(3);
  an->add_option("--dims", anim.dims, "Image extents")->expected(2);
  an->add_option("--spacing", anim.spacing, "Pixel spacing, mm (default: volume spacing)");
  an->add_option("--noise", anim.noise, "Standard deviation of added white noise");
  an->add_option("--interval", anim.interval, "Frame interval, s");

  RegisterArgs reg;
  CLI::App* r = app.add_subcommand("register", "Refine the pose of one image against a volume");
  add_common(r, reg.common);
  r->add_option("--volume", reg.volume, "Volume .svraw");
  r->add_option("--slice", reg.slice, "Image .svraw")->required();
  r->add_option("--init", reg.init, "Initial pose JSON (default identity)");
  r->add_option("--truth", reg.truth, "Ground-truth pose JSON for error reporting");
  r->add_option("--landmarks", reg.landmarks, "Volume landmarks for TRE (needs --truth)");

  TrackArgs track;
  CLI::App* t = app.add_subcommand("track", "Register every frame of a manifest in order");
  add_common(t, track.common);
  t->add_option("--volume", track.volume, "Volume .svraw");
  t->add_option("--manifest", track.manifest, "Frame manifest JSON")->required();
  t->add_option("--landmarks", track.landmarks, "Volume landmarks for TRE (overrides the manifest)");

  EvaluateArgs eval;
  CLI::App* e = app.add_subcommand("evaluate", "Summarize a results table");
  add_common(e, eval.common);
  e->add_option("--results", eval.results, "results.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (p->parsed()) return cmd_phantom(phantom, out);
    if (s->parsed()) return cmd_slice(slice, out);
    if (an->parsed()) return cmd_animate(anim, out);
    if (r->parsed()) return cmd_register(reg, out);
    if (t->parsed()) return cmd_track(track, out);
    if (e->parsed()) return cmd_evaluate(eval, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace s2v::cli
