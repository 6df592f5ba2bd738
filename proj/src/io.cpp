#include "s2v/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "s2v/error.hpp"

namespace s2v::io {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Validation, where + ": " + what);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) invalid(where, "expected an object");
  for (const auto& item : j.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) invalid(where, "unknown key '" + item.key() + "'");
  }
}

const json& member(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) invalid(where, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) invalid(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) invalid(where, "expected a finite number");
  return v;
}

long long integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) invalid(where, "expected an integer");
  return j.get<long long>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) invalid(where, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) invalid(where, "expected a string");
  return j.get<std::string>();
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) invalid(where, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], where + "[" + std::to_string(i) + "]");
  return out;
}

template <std::size_t N>
std::array<int, N> integers(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) invalid(where, "expected an array of " + std::to_string(N) + " integers");
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const long long v = integer(j[i], where + "[" + std::to_string(i) + "]");
    if (v < 1 || v > (1 << 20)) invalid(where, "extent out of range");
    out[i] = static_cast<int>(v);
  }
  return out;
}

Vec3 vec3(const json& j, const std::string& where) {
  const auto a = numbers<3>(j, where);
  return {a[0], a[1], a[2]};
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void check_schema(const json& j, const std::string& where) {
  const long long v = integer(member(j, "schema_version", where), where + ".schema_version");
  if (v != kSchemaVersion) invalid(where, "unsupported schema_version " + std::to_string(v));
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
  return ss.str();
}

void write_text(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create '" + path.string() + "'");
  out << contents;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
}

json parse_json(const std::string& contents, const std::string& origin) {
  try {
    return json::parse(contents);
  } catch (const json::parse_error& e) {
    // The library message already names the line and column.
    std::string msg = e.what();
    const auto at = msg.find("] ");
    if (at != std::string::npos) msg = msg.substr(at + 2);
    throw Error(ErrorCode::Parse, origin + ": " + msg);
  }
}

json read_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- transforms ----------------------------------------------------------

json to_json(const RigidTransform& t) {
  const Mat3& m = t.rotation.matrix();
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(m(r, c));
  return {{"rotation", rot}, {"translation_mm", vec_json(t.translation)}};
}

RigidTransform transform_from_json(const json& j) {
  const std::string where = "transform";
  check_keys(j, {"rotation", "translation_mm"}, where);
  const auto r = numbers<9>(member(j, "rotation", where), where + ".rotation");
  Mat3 m;
  for (int row = 0; row < 3; ++row)
    for (int c = 0; c < 3; ++c) m(row, c) = r[static_cast<std::size_t>(3 * row + c)];
  RigidTransform t;
  if (RotationMatrix3::is_valid(m)) {
    t.rotation = RotationMatrix3::from_matrix(m);
  } else if (RotationMatrix3::is_valid(m, 1e-6)) {
    // Rounded by hand: snap back onto SO(3).
    t.rotation = gram_schmidt_6d_to_matrix(matrix_to_6d(RotationMatrix3::from_matrix_unchecked(m)));
  } else {
    invalid(where + ".rotation", "not a proper rotation matrix");
  }
  t.translation = vec3(member(j, "translation_mm", where), where + ".translation_mm");
  return t;
}

RigidTransform read_transform(const fs::path& path) {
  try {
    return transform_from_json(read_json(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Validation) throw;
    throw Error(ErrorCode::Validation, path.string() + ": " + e.detail());
  }
}

void write_transform(const fs::path& path, const RigidTransform& t) { write_json(path, to_json(t)); }

// ---- run configuration ---------------------------------------------------

namespace {

const char* metric_name(MetricKind k) { return k == MetricKind::Lncc ? "lncc" : "gncc"; }

const char* policy_name(FailurePolicy p) {
  return p == FailurePolicy::ResetToIdentity ? "reset_to_identity" : "carry_last_good";
}

}  // namespace

void RunConfig::validate() const {
  if (preprocessing.enabled && !(preprocessing.spacing_mm > 0.0))
    throw Error(ErrorCode::Validation, "preprocessing.spacing_mm must be > 0");
  loss_weights.validate();
  optimizer.validate();
}

bool RunConfig::operator==(const RunConfig& other) const { return to_json(*this) == to_json(other); }

json to_json(const RunConfig& c) {
  const PreprocessConfig& p = c.preprocessing;
  const OptimizerConfig& o = c.optimizer;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = c.seed;
  j["preprocessing"] = {{"enabled", p.enabled},
                        {"spacing_mm", p.spacing_mm},
                        {"volume_dims", p.volume_dims ? json(*p.volume_dims) : json(nullptr)},
                        {"image_dims", p.image_dims ? json(*p.image_dims) : json(nullptr)},
                        {"normalize", p.normalize}};
  j["metric"] = {{"kind", metric_name(o.metric)}, {"kernel", o.kernel}, {"min_overlap", o.min_overlap}};
  j["loss_weights"] = {{"alpha", c.loss_weights.alpha}, {"beta", c.loss_weights.beta}, {"gamma", c.loss_weights.gamma}};
  j["optimizer"] = {{"max_iters", o.max_iters},
                    {"step_trans", o.step_trans},
                    {"step_rot", o.step_rot},
                    {"fd_step_trans", o.fd_step_trans},
                    {"fd_step_rot", o.fd_step_rot},
                    {"decay", o.decay},
                    {"patience", o.patience},
                    {"tol", o.tol},
                    {"relaxation", o.relaxation},
                    {"min_step_fraction", o.min_step_fraction},
                    {"coordinate_fraction", o.coordinate_fraction},
                    {"pyramid_levels", o.pyramid_levels},
                    {"threads", o.threads}};
  j["workflow"] = {{"failure_policy", policy_name(c.workflow.failure_policy)},
                   {"warm_start", c.workflow.warm_start}};
  j["paths"] = {{"volume", c.volume_path}, {"output_dir", c.output_dir}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  const std::string w = "config";
  check_keys(j, {"schema_version", "seed", "preprocessing", "metric", "loss_weights", "optimizer", "workflow", "paths"},
             w);
  check_schema(j, w);
  RunConfig c;
  if (j.contains("seed")) {
    const long long s = integer(j["seed"], w + ".seed");
    if (s < 0) invalid(w + ".seed", "must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  }

  if (j.contains("preprocessing")) {
    const json& p = j["preprocessing"];
    const std::string pw = w + ".preprocessing";
    check_keys(p, {"enabled", "spacing_mm", "volume_dims", "image_dims", "normalize"}, pw);
    if (p.contains("enabled")) c.preprocessing.enabled = boolean(p["enabled"], pw + ".enabled");
    if (p.contains("spacing_mm")) c.preprocessing.spacing_mm = number(p["spacing_mm"], pw + ".spacing_mm");
    if (p.contains("volume_dims"))
      c.preprocessing.volume_dims = p["volume_dims"].is_null()
                                        ? std::nullopt
                                        : std::optional(integers<3>(p["volume_dims"], pw + ".volume_dims"));
    if (p.contains("image_dims"))
      c.preprocessing.image_dims = p["image_dims"].is_null()
                                       ? std::nullopt
                                       : std::optional(integers<2>(p["image_dims"], pw + ".image_dims"));
    if (p.contains("normalize")) c.preprocessing.normalize = boolean(p["normalize"], pw + ".normalize");
  }

  OptimizerConfig& o = c.optimizer;
  if (j.contains("metric")) {
    const json& m = j["metric"];
    const std::string mw = w + ".metric";
    check_keys(m, {"kind", "kernel", "min_overlap"}, mw);
    if (m.contains("kind")) {
      const std::string k = text(m["kind"], mw + ".kind");
      if (k == "lncc")
        o.metric = MetricKind::Lncc;
      else if (k == "gncc")
        o.metric = MetricKind::Gncc;
      else
        invalid(mw + ".kind", "expected \"lncc\" or \"gncc\"");
    }
    if (m.contains("kernel")) o.kernel = static_cast<int>(integer(m["kernel"], mw + ".kernel"));
    if (m.contains("min_overlap")) {
      const long long v = integer(m["min_overlap"], mw + ".min_overlap");
      if (v < 1) invalid(mw + ".min_overlap", "must be >= 1");
      o.min_overlap = static_cast<std::size_t>(v);
    }
  }

  if (j.contains("loss_weights")) {
    const json& l = j["loss_weights"];
    const std::string lw = w + ".loss_weights";
    check_keys(l, {"alpha", "beta", "gamma"}, lw);
    if (l.contains("alpha")) c.loss_weights.alpha = number(l["alpha"], lw + ".alpha");
    if (l.contains("beta")) c.loss_weights.beta = number(l["beta"], lw + ".beta");
    if (l.contains("gamma")) c.loss_weights.gamma = number(l["gamma"], lw + ".gamma");
  }

  if (j.contains("optimizer")) {
    const json& p = j["optimizer"];
    const std::string ow = w + ".optimizer";
    check_keys(p,
               {"max_iters", "step_trans", "step_rot", "fd_step_trans", "fd_step_rot", "decay", "patience", "tol",
                "relaxation", "min_step_fraction", "coordinate_fraction", "pyramid_levels", "threads"},
               ow);
    const auto num = [&](const char* key, double& dst) {
      if (p.contains(key)) dst = number(p[key], ow + "." + key);
    };
    const auto whole = [&](const char* key, int& dst) {
      if (p.contains(key)) dst = static_cast<int>(integer(p[key], ow + "." + key));
    };
    whole("max_iters", o.max_iters);
    num("step_trans", o.step_trans);
    num("step_rot", o.step_rot);
    num("fd_step_trans", o.fd_step_trans);
    num("fd_step_rot", o.fd_step_rot);
    num("decay", o.decay);
    whole("patience", o.patience);
    num("tol", o.tol);
    num("relaxation", o.relaxation);
    num("min_step_fraction", o.min_step_fraction);
    num("coordinate_fraction", o.coordinate_fraction);
    whole("pyramid_levels", o.pyramid_levels);
    whole("threads", o.threads);
  }
  o.seed = c.seed;

  if (j.contains("workflow")) {
    const json& f = j["workflow"];
    const std::string fw = w + ".workflow";
    check_keys(f, {"failure_policy", "warm_start"}, fw);
    if (f.contains("failure_policy")) {
      const std::string p = text(f["failure_policy"], fw + ".failure_policy");
      if (p == "reset_to_identity")
        c.workflow.failure_policy = FailurePolicy::ResetToIdentity;
      else if (p == "carry_last_good")
        c.workflow.failure_policy = FailurePolicy::CarryLastGood;
      else
        invalid(fw + ".failure_policy", "expected \"reset_to_identity\" or \"carry_last_good\"");
    }
    if (f.contains("warm_start")) c.workflow.warm_start = boolean(f["warm_start"], fw + ".warm_start");
  }

  if (j.contains("paths")) {
    const json& p = j["paths"];
    const std::string pw = w + ".paths";
    check_keys(p, {"volume", "output_dir"}, pw);
    if (p.contains("volume")) c.volume_path = text(p["volume"], pw + ".volume");
    if (p.contains("output_dir")) c.output_dir = text(p["output_dir"], pw + ".output_dir");
  }

  c.validate();
  return c;
}

RunConfig read_run_config(const fs::path& path) {
  try {
    return run_config_from_json(read_json(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Validation) throw;
    throw Error(ErrorCode::Validation, path.string() + ": " + e.detail());
  }
}

// ---- landmarks -----------------------------------------------------------

namespace {

json landmark_json(const Landmark& l) {
  json j = {{"id", l.id},
            {"position_mm", vec_json(l.position)},
            {"frame", l.frame == LandmarkFrame::Volume ? "volume" : "slice"}};
  if (l.frame == LandmarkFrame::Slice) j["slice_index"] = l.slice_index;
  return j;
}

Landmark landmark_from(const json& j, const std::string& where) {
  check_keys(j, {"id", "position_mm", "frame", "slice_index"}, where);
  Landmark l;
  l.id = text(member(j, "id", where), where + ".id");
  if (l.id.empty()) invalid(where + ".id", "must not be empty");
  l.position = vec3(member(j, "position_mm", where), where + ".position_mm");
  if (j.contains("frame")) {
    const std::string f = text(j["frame"], where + ".frame");
    if (f == "volume")
      l.frame = LandmarkFrame::Volume;
    else if (f == "slice")
      l.frame = LandmarkFrame::Slice;
    else
      invalid(where + ".frame", "expected \"volume\" or \"slice\"");
  }
  if (j.contains("slice_index")) l.slice_index = static_cast<int>(integer(j["slice_index"], where + ".slice_index"));
  return l;
}

}  // namespace

json landmarks_to_json(const std::vector<Landmark>& landmarks) {
  json arr = json::array();
  for (const Landmark& l : landmarks) arr.push_back(landmark_json(l));
  return {{"schema_version", kSchemaVersion}, {"landmarks", arr}};
}

std::vector<Landmark> landmarks_from_json(const json& j) {
  const std::string w = "landmarks";
  check_keys(j, {"schema_version", "landmarks"}, w);
  check_schema(j, w);
  const json& arr = member(j, "landmarks", w);
  if (!arr.is_array()) invalid(w + ".landmarks", "expected an array");
  std::vector<Landmark> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(landmark_from(arr[i], w + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Landmark> read_landmarks(const fs::path& path) {
  try {
    return landmarks_from_json(read_json(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Validation) throw;
    throw Error(ErrorCode::Validation, path.string() + ": " + e.detail());
  }
}

// ---- phantom spec --------------------------------------------------------

json to_json(const PhantomSpec& s) {
  json tubes = json::array();
  for (const TubeSpec& t : s.tubes) {
    json line = json::array();
    for (const Vec3& p : t.centerline) line.push_back(vec_json(p));
    tubes.push_back({{"centerline_mm", line}, {"radius_mm", t.radius}, {"intensity", t.intensity}});
  }
  json ellipsoids = json::array();
  for (const EllipsoidSpec& e : s.ellipsoids)
    ellipsoids.push_back(
        {{"center_mm", vec_json(e.center)}, {"semi_axes_mm", vec_json(e.semi_axes)}, {"intensity", e.intensity}});
  json landmarks = json::array();
  for (const Landmark& l : s.landmarks) landmarks.push_back(landmark_json(l));
  return {{"schema_version", kSchemaVersion},
          {"dims", s.dims},
          {"spacing_mm", s.spacing},
          {"background", s.background},
          {"falloff_mm", s.falloff_mm},
          {"tubes", tubes},
          {"ellipsoids", ellipsoids},
          {"speckle",
           {{"seed", s.speckle.seed}, {"amplitude", s.speckle.amplitude}, {"correlation_mm", s.speckle.correlation_mm}}},
          {"landmarks", landmarks},
          {"mask_shape", s.mask_shape == MaskShape::Full ? "full" : "sector"},
          {"sector_half_angle_deg", s.sector_half_angle_deg}};
}

PhantomSpec phantom_spec_from_json(const json& j) {
  const std::string w = "phantom";
  check_keys(j,
             {"schema_version", "dims", "spacing_mm", "background", "falloff_mm", "tubes", "ellipsoids", "speckle",
              "landmarks", "mask_shape", "sector_half_angle_deg"},
             w);
  check_schema(j, w);
  PhantomSpec s;
  s.dims = integers<3>(member(j, "dims", w), w + ".dims");
  s.spacing = number(member(j, "spacing_mm", w), w + ".spacing_mm");
  if (!(s.spacing > 0.0)) invalid(w + ".spacing_mm", "must be > 0");
  if (j.contains("background")) s.background = number(j["background"], w + ".background");
  if (j.contains("falloff_mm")) s.falloff_mm = number(j["falloff_mm"], w + ".falloff_mm");

  const auto array_of = [&](const char* key) -> const json& {
    const json& a = j[key];
    if (!a.is_array()) invalid(w + "." + key, "expected an array");
    return a;
  };
  if (j.contains("tubes")) {
    const json& a = array_of("tubes");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string tw = w + ".tubes[" + std::to_string(i) + "]";
      check_keys(a[i], {"centerline_mm", "radius_mm", "intensity"}, tw);
      TubeSpec t;
      const json& line = member(a[i], "centerline_mm", tw);
      if (!line.is_array()) invalid(tw + ".centerline_mm", "expected an array of points");
      for (std::size_t p = 0; p < line.size(); ++p)
        t.centerline.push_back(vec3(line[p], tw + ".centerline_mm[" + std::to_string(p) + "]"));
      t.radius = number(member(a[i], "radius_mm", tw), tw + ".radius_mm");
      t.intensity = number(member(a[i], "intensity", tw), tw + ".intensity");
      s.tubes.push_back(std::move(t));
    }
  }
  if (j.contains("ellipsoids")) {
    const json& a = array_of("ellipsoids");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string ew = w + ".ellipsoids[" + std::to_string(i) + "]";
      check_keys(a[i], {"center_mm", "semi_axes_mm", "intensity"}, ew);
      s.ellipsoids.push_back({vec3(member(a[i], "center_mm", ew), ew + ".center_mm"),
                              vec3(member(a[i], "semi_axes_mm", ew), ew + ".semi_axes_mm"),
                              number(member(a[i], "intensity", ew), ew + ".intensity")});
    }
  }
  if (j.contains("speckle")) {
    const json& sp = j["speckle"];
    const std::string sw = w + ".speckle";
    check_keys(sp, {"seed", "amplitude", "correlation_mm"}, sw);
    if (sp.contains("seed")) {
      if (!sp["seed"].is_number_unsigned()) invalid(sw + ".seed", "expected a non-negative integer");
      s.speckle.seed = sp["seed"].get<std::uint64_t>();
    }
    if (sp.contains("amplitude")) s.speckle.amplitude = number(sp["amplitude"], sw + ".amplitude");
    if (sp.contains("correlation_mm")) s.speckle.correlation_mm = number(sp["correlation_mm"], sw + ".correlation_mm");
  }
  if (j.contains("landmarks")) {
    const json& a = array_of("landmarks");
    for (std::size_t i = 0; i < a.size(); ++i)
      s.landmarks.push_back(landmark_from(a[i], w + ".landmarks[" + std::to_string(i) + "]"));
  }
  if (j.contains("mask_shape")) {
    const std::string m = text(j["mask_shape"], w + ".mask_shape");
    if (m == "full")
      s.mask_shape = MaskShape::Full;
    else if (m == "sector")
      s.mask_shape = MaskShape::Sector;
    else
      invalid(w + ".mask_shape", "expected \"full\" or \"sector\"");
  }
  if (j.contains("sector_half_angle_deg"))
    s.sector_half_angle_deg = number(j["sector_half_angle_deg"], w + ".sector_half_angle_deg");
  return s;
}

// ---- rasters -------------------------------------------------------------

namespace {

fs::path sidecar_path(const fs::path& raster) { return fs::path(raster.string() + ".json"); }

fs::path mask_path(const fs::path& raster) {
  fs::path p = raster;
  p.replace_extension(".mask");
  return p;
}

void write_floats(const fs::path& path, std::size_t n, const auto& sample) {
  std::string bytes(n * 4, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(sample(i)));
    for (int b = 0; b < 4; ++b) bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  write_text(path, bytes);
}

std::vector<float> read_floats(const fs::path& path, std::size_t n) {
  const std::string bytes = read_text(path);
  if (bytes.size() != n * 4)
    throw Error(ErrorCode::Validation, path.string() + ": expected " + std::to_string(n * 4) + " bytes, found " +
                                           std::to_string(bytes.size()));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + static_cast<std::size_t>(b)])) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
    if (!std::isfinite(out[i])) throw Error(ErrorCode::Validation, path.string() + ": non-finite sample");
  }
  return out;
}

void write_mask(const fs::path& path, const std::vector<std::uint8_t>& mask) {
  std::string bytes(mask.size(), '\0');
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 1 : 0;
  write_text(path, bytes);
}

std::vector<std::uint8_t> read_mask(const fs::path& path, std::size_t n) {
  const std::string bytes = read_text(path);
  if (bytes.size() != n)
    throw Error(ErrorCode::Validation,
                path.string() + ": expected " + std::to_string(n) + " bytes, found " + std::to_string(bytes.size()));
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (bytes[i] != 0 && bytes[i] != 1) throw Error(ErrorCode::Validation, path.string() + ": mask bytes must be 0 or 1");
    out[i] = static_cast<std::uint8_t>(bytes[i]);
  }
  return out;
}

json sidecar_base(const char* kind, const fs::path& raster) {
  return {{"schema_version", kSchemaVersion},
          {"kind", kind},
          {"sample_type", "float32_le"},
          {"mask_file", mask_path(raster).filename().string()}};
}

struct Sidecar {
  json j;
  fs::path mask;
};

Sidecar read_sidecar(const fs::path& raster, const char* kind) {
  const fs::path path = sidecar_path(raster);
  const json j = read_json(path);
  const std::string w = path.string();
  check_keys(j, {"schema_version", "kind", "sample_type", "dims", "spacing_mm", "origin_mm", "axes", "mask_file"}, w);
  check_schema(j, w);
  if (text(member(j, "kind", w), w + ".kind") != kind) invalid(w + ".kind", std::string("expected \"") + kind + "\"");
  if (text(member(j, "sample_type", w), w + ".sample_type") != "float32_le")
    invalid(w + ".sample_type", "expected \"float32_le\"");
  const std::string mask = text(member(j, "mask_file", w), w + ".mask_file");
  return {j, raster.parent_path() / mask};
}

}  // namespace

void write_volume(const fs::path& path, const Volume3D& v) {
  const VolumeGeometry& g = v.geometry;
  json side = sidecar_base("volume", path);
  side["dims"] = g.dims;
  side["spacing_mm"] = vec_json(g.spacing);
  side["origin_mm"] = vec_json(g.origin);
  side["axes"] = json::array({vec_json(Vec3::UnitX()), vec_json(Vec3::UnitY()), vec_json(Vec3::UnitZ())});
  write_floats(path, v.intensities.size(), [&](std::size_t i) { return v.intensities[i]; });
  write_mask(mask_path(path), v.mask);
  write_json(sidecar_path(path), side);
}

Volume3D read_volume(const fs::path& path) {
  const Sidecar s = read_sidecar(path, "volume");
  const std::string w = sidecar_path(path).string();
  VolumeGeometry g;
  g.dims = integers<3>(member(s.j, "dims", w), w + ".dims");
  g.spacing = vec3(member(s.j, "spacing_mm", w), w + ".spacing_mm");
  g.origin = vec3(member(s.j, "origin_mm", w), w + ".origin_mm");
  const json& axes = member(s.j, "axes", w);
  if (!axes.is_array() || axes.size() != 3) invalid(w + ".axes", "expected three axis vectors");
  for (int a = 0; a < 3; ++a) {
    if (vec3(axes[static_cast<std::size_t>(a)], w + ".axes") != Vec3::Unit(a))
      invalid(w + ".axes", "volume axes must be the identity");
  }
  validate(g);
  Volume3D v(g);
  v.intensities = read_floats(path, g.voxel_count());
  v.mask = read_mask(s.mask, g.voxel_count());
  return v;
}

void write_image(const fs::path& path, const Image2D& img) {
  const SliceGeometry& g = img.geometry;
  json side = sidecar_base("image", path);
  side["dims"] = g.dims;
  side["spacing_mm"] = json::array({g.spacing.x(), g.spacing.y()});
  side["origin_mm"] = vec_json(g.origin);
  side["axes"] = json::array({vec_json(g.axis_u), vec_json(g.axis_v)});
  write_floats(path, img.intensities.size(), [&](std::size_t i) { return img.intensities[i]; });
  write_mask(mask_path(path), img.mask);
  write_json(sidecar_path(path), side);
}

Image2D read_image(const fs::path& path) {
  const Sidecar s = read_sidecar(path, "image");
  const std::string w = sidecar_path(path).string();
  SliceGeometry g;
  g.dims = integers<2>(member(s.j, "dims", w), w + ".dims");
  const auto sp = numbers<2>(member(s.j, "spacing_mm", w), w + ".spacing_mm");
  g.spacing = Vec2(sp[0], sp[1]);
  g.origin = vec3(member(s.j, "origin_mm", w), w + ".origin_mm");
  const json& axes = member(s.j, "axes", w);
  if (!axes.is_array() || axes.size() != 2) invalid(w + ".axes", "expected two axis vectors");
  g.axis_u = vec3(axes[0], w + ".axes[0]");
  g.axis_v = vec3(axes[1], w + ".axes[1]");
  validate(g);
  Image2D img(g);
  const std::vector<float> samples = read_floats(path, g.pixel_count());
  std::copy(samples.begin(), samples.end(), img.intensities.begin());
  img.mask = read_mask(s.mask, g.pixel_count());
  return img;
}

// ---- manifest ------------------------------------------------------------

json to_json(const Manifest& m) {
  json frames = json::array();
  for (const ManifestFrame& f : m.frames) {
    json j = {{"timestamp_s", f.timestamp}, {"image", f.image}, {"tracked", to_json(f.tracked)}};
    if (f.truth_pose) j["truth_pose"] = to_json(*f.truth_pose);
    frames.push_back(j);
  }
  json j = {{"schema_version", kSchemaVersion}, {"frames", frames}};
  if (m.landmarks) j["landmarks"] = *m.landmarks;
  return j;
}

Manifest manifest_from_json(const json& j) {
  const std::string w = "manifest";
  check_keys(j, {"schema_version", "frames", "landmarks"}, w);
  check_schema(j, w);
  Manifest m;
  const json& frames = member(j, "frames", w);
  if (!frames.is_array()) invalid(w + ".frames", "expected an array");
  if (frames.empty()) throw Error(ErrorCode::EmptyInput, w + ".frames: manifest lists no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string fw = w + ".frames[" + std::to_string(i) + "]";
    const json& f = frames[i];
    check_keys(f, {"timestamp_s", "image", "tracked", "truth_pose"}, fw);
    ManifestFrame mf;
    mf.timestamp = number(member(f, "timestamp_s", fw), fw + ".timestamp_s");
    mf.image = text(member(f, "image", fw), fw + ".image");
    mf.tracked = transform_from_json(member(f, "tracked", fw));
    if (f.contains("truth_pose")) mf.truth_pose = transform_from_json(f["truth_pose"]);
    m.frames.push_back(std::move(mf));
  }
  if (j.contains("landmarks")) m.landmarks = text(j["landmarks"], w + ".landmarks");
  return m;
}

// ---- tables --------------------------------------------------------------

namespace {

constexpr const char* kResultsHeader =
    "frame,tx,ty,tz,euclidean,rx,ry,rz,geodesic,tre_mean,tre_sd,success,runtime_ms,status";

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0." + std::string(static_cast<std::size_t>(digits), '0')) s.erase(0, 1);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw Error(ErrorCode::Parse, where + ": expected a number, found '" + s + "'");
  return v;
}

}  // namespace

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += kResultsHeader;
  out += "\n";
  for (const ResultRow& r : rows) {
    out += std::to_string(r.frame);
    if (r.error) {
      const PoseError& e = *r.error;
      for (double v : {e.tx, e.ty, e.tz, e.euclidean, e.rx, e.ry, e.rz, e.geodesic}) out += "," + fixed(v, 6);
    } else {
      out += ",,,,,,,,";
    }
    if (r.tre) {
      out += "," + fixed(r.tre->mean, 6) + "," + fixed(r.tre->sd, 6);
    } else {
      out += ",,";
    }
    out += r.success ? ",1" : ",0";
    out += "," + fixed(r.runtime_ms, 3);
    out += "," + r.status;
    out += "\n";
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& contents) {
  std::istringstream in(contents);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "results line " + std::to_string(line_no);
    if (line[0] == '#') {
      if (line.rfind("# schema_version=", 0) == 0 && line != "# schema_version=" + std::to_string(kSchemaVersion))
        throw Error(ErrorCode::Validation, where + ": unsupported schema_version");
      continue;
    }
    if (!header_seen) {
      if (line != kResultsHeader) throw Error(ErrorCode::Parse, where + ": unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    const std::vector<std::string> f = split(line);
    if (f.size() != 14) throw Error(ErrorCode::Parse, where + ": expected 14 fields, found " + std::to_string(f.size()));
    ResultRow r;
    r.frame = static_cast<int>(parse_double(f[0], where));
    if (!f[1].empty()) {
      PoseError e;
      double* dst[] = {&e.tx, &e.ty, &e.tz, &e.euclidean, &e.rx, &e.ry, &e.rz, &e.geodesic};
      for (std::size_t k = 0; k < 8; ++k) *dst[k] = parse_double(f[k + 1], where);
      r.error = e;
    }
    if (!f[9].empty()) {
      SummaryStats s;
      s.mean = parse_double(f[9], where);
      s.sd = parse_double(f[10], where);
      r.tre = s;
    }
    if (f[11] != "0" && f[11] != "1") throw Error(ErrorCode::Parse, where + ": success must be 0 or 1");
    r.success = f[11] == "1";
    r.runtime_ms = parse_double(f[12], where);
    r.status = f[13];
    if (r.status != "success" && r.status != "lost_overlap" && r.status != "diverged")
      throw Error(ErrorCode::Parse, where + ": unknown status '" + r.status + "'");
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorCode::Parse, "results: missing header line");
  return rows;
}

std::string cdf_csv(const std::vector<CdfPoint>& points) {
  std::string out = "error_mm,fraction\n";
  for (const CdfPoint& p : points) out += fixed(p.threshold, 6) + "," + fixed(p.fraction, 6) + "\n";
  return out;
}

std::string to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::Success:
      return "success";
    case FrameStatus::LostOverlap:
      return "lost_overlap";
    case FrameStatus::Diverged:
      return "diverged";
  }
  return "unknown";
}

}  // namespace s2v::io
