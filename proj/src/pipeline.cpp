#include "lcvd/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "lcvd/diffusion.hpp"
#include "lcvd/image_io.hpp"
#include "lcvd/toy_codec.hpp"
#include "lcvd/toy_denoiser.hpp"
#include "lcvd/training.hpp"

namespace lcvd {

namespace fs = std::filesystem;
using nlohmann::json;

const char* mode_name(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kRelightAnimate: return "relight-animate";
    case PipelineMode::kHintsOnly: return "hints-only";
    case PipelineMode::kAlign: return "align";
    case PipelineMode::kTrainToy: return "train-toy";
    case PipelineMode::kSampleOracle: return "sample-oracle";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config validation

namespace {

const std::map<std::string, PipelineMode> kModes = {
    {"relight-animate", PipelineMode::kRelightAnimate},
    {"hints-only", PipelineMode::kHintsOnly},
    {"align", PipelineMode::kAlign},
    {"train-toy", PipelineMode::kTrainToy},
    {"sample-oracle", PipelineMode::kSampleOracle},
};

const std::map<std::string, MaskPolarity> kPolarities = {
    {"portrait-is-one", MaskPolarity::kPortraitIsOne},
    {"portrait-is-zero", MaskPolarity::kPortraitIsZero},
};

const std::map<std::string, AlignmentMode> kAlignments = {
    {"relative", AlignmentMode::kRelative},
    {"scale-consistent", AlignmentMode::kScaleConsistent},
};

const std::map<std::string, Backend> kBackends = {
    {"oracle", Backend::kOracle},
    {"toy", Backend::kToy},
};

template <typename T>
std::string name_of(const std::map<std::string, T>& table, T value) {
  for (const auto& [k, v] : table)
    if (v == value) return k;
  return "?";
}

// Reads typed fields out of one JSON object and rejects whatever is left.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "$" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out, double lo, double hi) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      const double d = v->get<double>();
      if (!std::isfinite(d) || d < lo || d > hi) {
        throw ConfigError(path(key), "value " + v->dump() + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
      }
      out = d;
    }
  }

  template <typename U>
  void integer(const std::string& key, U& out, std::uint64_t lo, std::uint64_t hi) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                      v->get<std::int64_t>() < 0)) {
        throw ConfigError(path(key), "expected a non-negative integer");
      }
      const std::uint64_t u = v->get<std::uint64_t>();
      if (u < lo || u > hi) {
        throw ConfigError(path(key), "value " + v->dump() + " outside [" + std::to_string(lo) +
                                         ", " + std::to_string(hi) + "]");
      }
      out = static_cast<U>(u);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  std::optional<std::string> string(const std::string& key) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      return v->get<std::string>();
    }
    return std::nullopt;
  }

  template <typename T>
  void choice(const std::string& key, const std::map<std::string, T>& table, T& out) {
    if (auto s = string(key)) {
      auto it = table.find(*s);
      if (it == table.end()) {
        std::string allowed;
        for (const auto& [k, v] : table) allowed += (allowed.empty() ? "" : ", ") + k;
        throw ConfigError(path(key), "unknown value \"" + *s + "\" (expected one of: " + allowed + ")");
      }
      out = it->second;
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }
  }

 private:
  static std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

void require_file(const std::string& key, const fs::path& path) {
  if (path.empty()) throw ConfigError(key, "required for this mode");
  if (!fs::is_regular_file(path)) throw ConfigError(key, "file not found: " + path.string());
}

}  // namespace

PipelineConfig validate_config(const json& raw, const fs::path& base_dir) {
  PipelineConfig c;
  ObjectReader r(raw, "");
  r.choice("mode", kModes, c.mode);
  if (auto s = r.string("model")) c.model = resolve(base_dir, *s);
  if (auto s = r.string("driving")) c.driving = resolve(base_dir, *s);
  if (auto s = r.string("reference")) c.reference = resolve(base_dir, *s);
  if (auto s = r.string("lighting")) c.lighting = resolve(base_dir, *s);
  if (auto s = r.string("weights")) c.weights = resolve(base_dir, *s);
  if (auto s = r.string("output_dir")) c.output_dir = resolve(base_dir, *s);
  r.choice("backend", kBackends, c.backend);
  r.number("omega", c.omega, 0.0, 1e6);
  r.integer("steps", c.steps, 1, 1000);
  r.integer("window", c.window, 1, 4096);
  r.integer("overlap", c.overlap, 0, 4095);
  r.integer("seed", c.seed, 0, std::numeric_limits<std::uint64_t>::max());
  r.choice("mask_polarity", kPolarities, c.mask_polarity);
  r.choice("alignment", kAlignments, c.alignment);
  r.integer("resolution", c.resolution, 16, 4096);
  r.number("sigma0", c.sigma0, 0.0, 1e6);
  r.boolean("write_depth", c.write_depth);
  if (const json* t = r.find("training")) {
    ObjectReader tr(*t, "training");
    ToyRunConfig& s = c.training;
    tr.integer("steps", s.steps, 1, 1000000);
    tr.number("learning_rate", s.options.learning_rate, 1e-12, 1e3);
    tr.integer("batch_size", s.batch_size, 1, 1024);
    tr.integer("dataset_size", s.dataset_size, 1, 100000);
    tr.integer("image_size", s.synth.image_size, 16, 64);
    tr.integer("frames", s.synth.frames, 1, 64);
    if (const json* w = tr.find("fusion_weights")) {
      if (!w->is_array() || w->size() != 4) {
        throw ConfigError("training.fusion_weights", "expected 4 probabilities for (0,0), (0,1), (1,0), (1,1)");
      }
      double total = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        const json& e = (*w)[i];
        if (!e.is_number() || e.get<double>() < 0.0) {
          throw ConfigError("training.fusion_weights[" + std::to_string(i) + "]",
                            "expected a non-negative number");
        }
        s.options.fusion_weights[i] = e.get<double>();
        total += s.options.fusion_weights[i];
      }
      if (total <= 0.0) throw ConfigError("training.fusion_weights", "weights must not all be zero");
    }
    if (s.synth.image_size % kLatentDownsampling != 0) {
      throw ConfigError("training.image_size", "must be a multiple of 8");
    }
    tr.finish();
  }
  r.finish();

  if (c.overlap >= c.window) {
    throw ConfigError("overlap", "overlap " + std::to_string(c.overlap) +
                                     " must be smaller than window " + std::to_string(c.window));
  }
  if (c.resolution % kLatentDownsampling != 0) {
    throw ConfigError("resolution", "must be a multiple of 8");
  }
  if (c.model) require_file("model", *c.model);
  const bool needs_scene = c.mode != PipelineMode::kTrainToy;
  if (needs_scene) {
    require_file("driving", c.driving);
    require_file("reference", c.reference);
    require_file("lighting", c.lighting);
  }
  if (c.mode == PipelineMode::kSampleOracle && c.backend != Backend::kOracle) {
    throw ConfigError("backend", "sample-oracle mode requires the oracle backend");
  }
  if (c.backend == Backend::kToy && (c.mode == PipelineMode::kRelightAnimate)) {
    if (!c.weights) throw ConfigError("weights", "required by the toy backend");
    if (!fs::is_directory(*c.weights)) throw ConfigError("weights", "directory not found: " + c.weights->string());
  }
  return c;
}

json config_to_json(const PipelineConfig& c) {
  auto path_or_null = [](const fs::path& p) -> json { return p.empty() ? json() : json(p.string()); };
  json j = {
      {"mode", mode_name(c.mode)},
      {"model", c.model ? json(c.model->string()) : json()},
      {"driving", path_or_null(c.driving)},
      {"reference", path_or_null(c.reference)},
      {"lighting", path_or_null(c.lighting)},
      {"weights", c.weights ? json(c.weights->string()) : json()},
      {"output_dir", c.output_dir.string()},
      {"backend", name_of(kBackends, c.backend)},
      {"omega", c.omega},
      {"steps", c.steps},
      {"window", c.window},
      {"overlap", c.overlap},
      {"seed", c.seed},
      {"mask_polarity", name_of(kPolarities, c.mask_polarity)},
      {"alignment", name_of(kAlignments, c.alignment)},
      {"resolution", c.resolution},
      {"sigma0", c.sigma0},
      {"write_depth", c.write_depth},
      {"training",
       {{"steps", c.training.steps},
        {"learning_rate", c.training.options.learning_rate},
        {"batch_size", c.training.batch_size},
        {"dataset_size", c.training.dataset_size},
        {"image_size", c.training.synth.image_size},
        {"frames", c.training.synth.frames},
        {"fusion_weights", c.training.options.fusion_weights}}},
  };
  return j;
}

StageError::StageError(std::string stage, long frame, const std::string& message)
    : Error("stage '" + stage + "'" + (frame >= 0 ? " at frame " + std::to_string(frame) : "") +
            ": " + message),
      stage_(std::move(stage)),
      frame_(frame) {}

// ---------------------------------------------------------------------------
// Reference description

namespace {

Vec3 vec3_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path, "expected 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(path, "expected 3 numbers");
    v[i] = j[i].get<double>();
  }
  if (!v.allFinite()) throw ConfigError(path, "non-finite value");
  return v;
}

}  // namespace

ReferenceSpec reference_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("$", "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known = {"pose", "shape", "lighting", "albedo", "background"};
    if (!known.count(it.key())) throw ConfigError(it.key(), "unknown key");
  }
  ReferenceSpec ref;
  if (!j.contains("pose")) throw ConfigError("pose", "missing");
  if (!j.contains("shape")) throw ConfigError("shape", "missing");
  if (!j.contains("lighting")) throw ConfigError("lighting", "missing");
  ref.pose = pose_from_json(j.at("pose"));
  const json& s = j.at("shape");
  if (!s.is_array()) throw ConfigError("shape", "expected an array of numbers");
  ref.shape.resize(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i].is_number()) throw ConfigError("shape[" + std::to_string(i) + "]", "expected a number");
    ref.shape[static_cast<Eigen::Index>(i)] = s[i].get<double>();
  }
  ref.lighting = sh_from_json(j.at("lighting"));
  if (j.contains("albedo")) ref.albedo = vec3_from_json(j.at("albedo"), "albedo");
  if (j.contains("background")) ref.background = vec3_from_json(j.at("background"), "background");
  return ref;
}

json reference_to_json(const ReferenceSpec& ref) {
  return {{"pose", pose_to_json(ref.pose)},
          {"shape", std::vector<double>(ref.shape.data(), ref.shape.data() + ref.shape.size())},
          {"lighting", sh_to_json(ref.lighting)},
          {"albedo", {ref.albedo.x(), ref.albedo.y(), ref.albedo.z()}},
          {"background", {ref.background.x(), ref.background.y(), ref.background.z()}}};
}

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

// ---------------------------------------------------------------------------
// Pipeline stages

namespace {

constexpr std::uint64_t kAdapterStream = 0xADA9;
constexpr std::uint64_t kOracleStream = 0x0EAC;

template <typename Fn>
auto in_stage(const std::string& stage, long frame, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, frame, e.what());
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
}

std::string frame_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", prefix, i, ext);
  return buf;
}

// Tracks written files so the manifest can list their digests.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  fs::path path(const std::string& rel) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    files_.insert(rel);
    return p;
  }

  // Registers a file written by a helper that appends its own extension.
  void add(const std::string& rel) { files_.insert(rel); }

  void write_text(const std::string& rel, const std::string& text) {
    std::ofstream out(path(rel), std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + (root_ / rel).string());
  }

  json digests() const {
    json j = json::object();
    for (const std::string& f : files_) j[f] = file_sha256(root_ / f);
    return j;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::set<std::string> files_;
};

struct Scene {
  ParametricFaceModel model;
  DrivingSequence driving;
  ReferenceSpec reference;
  SHCoefficients target;
};

Scene load_scene(const PipelineConfig& c) {
  return in_stage("load_inputs", -1, [&] {
    Scene s{c.model ? model_from_json(read_json(*c.model)) : build_model(FaceModelConfig{}), {}, {}, {}};
    s.driving = driving_from_json(read_json(c.driving));
    s.reference = reference_from_json(read_json(c.reference));
    s.target = sh_from_json(read_json(c.lighting));
    if (static_cast<std::size_t>(s.reference.shape.size()) != s.model.shape_dims()) {
      throw ShapeError("reference shape has " + std::to_string(s.reference.shape.size()) +
                       " coefficients, model expects " + std::to_string(s.model.shape_dims()));
    }
    return s;
  });
}

AlignedSequence align_scene(const PipelineConfig& c, const Scene& s) {
  return in_stage("align", -1, [&] {
    AlignedSequence a = c.alignment == AlignmentMode::kRelative
                            ? align_relative(s.driving, s.reference.pose, s.reference.shape, s.target)
                            : align_scale_consistent(s.driving, s.reference.shape, s.target);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (static_cast<std::size_t>(a.expressions[i].size()) != s.model.expr_dims()) {
        throw StageError("align", static_cast<long>(i),
                         "expression has " + std::to_string(a.expressions[i].size()) +
                             " coefficients, model expects " + std::to_string(s.model.expr_dims()));
      }
    }
    return a;
  });
}

Resolution resolution_of(const PipelineConfig& c) { return {c.resolution, c.resolution}; }

std::vector<ShadingFrame> render_hints(const PipelineConfig& c, const Scene& s,
                                       const AlignedSequence& a, ArtifactWriter& out) {
  const Resolution res = resolution_of(c);
  const Camera camera = default_camera(res);
  std::vector<ShadingFrame> frames;
  for (std::size_t i = 0; i < a.size(); ++i) {
    frames.push_back(in_stage("render_hints", static_cast<long>(i), [&] {
      const Mesh mesh = forward(s.model, a.shape, a.poses[i], a.expressions[i]);
      ShadingFrame f = render_shading_hints(mesh, camera, a.lighting, res);
      write_hint_frame(out.path("hints/" + frame_name("hint", i, ".png")),
                       out.path("masks/" + frame_name("mask", i, ".png")), f);
      if (c.write_depth) {
        const std::string stem = "depth/" + frame_name("depth", i, "");
        write_depth(out.path(stem + ".f32").replace_extension(), f);
        out.add(stem + ".json");
      }
      return f;
    }));
  }
  return frames;
}

struct ReferenceInputs {
  FeatureStack image;    // 1 x 3 x H x W
  LatentSeq latent;      // 1 x h x w x 4, masked
};

ReferenceInputs prepare_reference(const PipelineConfig& c, const Scene& s) {
  return in_stage("reference", -1, [&] {
    const Resolution res = resolution_of(c);
    const Mesh mesh = forward(s.model, s.reference.shape, s.reference.pose,
                              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.model.expr_dims())));
    const std::vector<Vec3> albedo(mesh.vertices.size(), s.reference.albedo);
    const ShadingFrame f = render_albedo_shaded(mesh, default_camera(res), s.reference.lighting, res, albedo);
    ReferenceInputs r;
    r.image = FeatureStack(1, 3, res.height, res.width);
    for (std::size_t y = 0; y < res.height; ++y)
      for (std::size_t x = 0; x < res.width; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch)
          r.image(0, ch, y, x) = f.mask[f.index(y, x)] ? f.image[3 * f.index(y, x) + ch]
                                                       : s.reference.background[static_cast<Eigen::Index>(ch)];
    const MaskSeq mask = apply_polarity(downsample_mask(f, kLatentDownsampling), c.mask_polarity);
    r.latent = prepare_reference_latent(toy_encode(r.image), mask, 1);
    return r;
  });
}

LatentSeq replicate_latent(const LatentSeq& single, std::size_t frames) {
  LatentSeq out(frames, single.height(), single.width(), single.channels());
  for (std::size_t f = 0; f < frames; ++f) {
    std::copy(single.values().begin(), single.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(f * single.size()));
  }
  return out;
}

struct Nets {
  AdapterNet shading;
  AdapterNet reference;
  std::optional<ToyDenoiser> denoiser;
};

Nets load_nets(const PipelineConfig& c) {
  return in_stage("adapters", -1, [&] {
    Nets n;
    if (c.backend == Backend::kToy) {
      n.shading = load_adapter(*c.weights / "shading_adapter");
      n.reference = load_adapter(*c.weights / "reference_adapter");
      n.denoiser = load_denoiser(*c.weights / "denoiser");
      if (n.denoiser->feature_channels() != n.shading.out_channels() ||
          n.shading.out_channels() != n.reference.out_channels()) {
        throw ShapeError("adapter and denoiser channel counts do not match");
      }
      if (n.denoiser->latent_channels() != kLatentChannels) {
        throw ShapeError("denoiser predicts " + std::to_string(n.denoiser->latent_channels()) +
                         " channels, latents have " + std::to_string(kLatentChannels));
      }
    } else {
      Rng rng(derive_seed(c.seed, kAdapterStream));
      n.shading = AdapterNet::create(AdapterConfig{}, rng);
      n.reference = AdapterNet::create(AdapterConfig{}, rng);
    }
    return n;
  });
}

// Oracle mean: masked reference latent plus a fixed seeded 1x1 projection of
// the guidance features into latent channels.
class OracleMean {
 public:
  OracleMean(const LatentSeq& reference, std::size_t feature_channels, std::uint64_t seed)
      : reference_(reference), features_(feature_channels), proj_(feature_channels * kLatentChannels) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(feature_channels));
    for (double& v : proj_) v = scale * rng.normal();
  }

  LatentSeq operator()(const FeatureStack& guidance, std::size_t frames) const {
    LatentSeq mu = replicate_latent(reference_, frames);
    if (guidance.empty()) return mu;
    if (guidance.frames() != frames || guidance.channels() != features_ ||
        guidance.height() != mu.height() || guidance.width() != mu.width()) {
      throw ShapeError("oracle: guidance " + shape_string(guidance.shape()) +
                       " does not match latent " + shape_string(mu.shape()));
    }
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t y = 0; y < mu.height(); ++y)
        for (std::size_t x = 0; x < mu.width(); ++x)
          for (std::size_t ch = 0; ch < features_; ++ch) {
            const double g = guidance(f, ch, y, x);
            for (std::size_t k = 0; k < kLatentChannels; ++k) mu(f, y, x, k) += proj_[ch * kLatentChannels + k] * g;
          }
    return mu;
  }

 private:
  LatentSeq reference_;
  std::size_t features_;
  std::vector<double> proj_;
};

struct SamplingResult {
  LatentSeq video;
  LatentSeq mu_c1;
  LatentSeq mu_c2;
  WindowPlan plan;
  std::vector<std::uint64_t> window_seeds;
  json timing;
};

SamplingResult sample_video(const PipelineConfig& c, const std::vector<ShadingFrame>& hints,
                            const ReferenceInputs& ref, const Nets& nets) {
  const std::size_t total = hints.size();
  SamplingResult out;
  out.plan = in_stage("plan", -1, [&] { return plan_windows(total, c.window, c.overlap); });

  // Per-frame shading features; the reference features are computed once.
  FeatureStack f_s;
  for (std::size_t i = 0; i < total; ++i) {
    in_stage("adapters", static_cast<long>(i), [&] {
      const AdapterFeatures one = adapter_forward(nets.shading, frame_to_stack(hints[i]));
      if (f_s.empty()) f_s = FeatureStack(total, one.channels(), one.height(), one.width());
      std::copy(one.values().begin(), one.values().end(),
                f_s.values().begin() + static_cast<std::ptrdiff_t>(i * one.size()));
    });
  }
  const AdapterFeatures f_r = in_stage("adapters", -1, [&] { return adapter_forward(nets.reference, ref.image); });

  const NoiseSchedule schedule = default_schedule();
  const std::vector<std::size_t> steps = default_step_indices(schedule, c.steps);
  const OracleMean mean(ref.latent, f_r.channels(), derive_seed(c.seed, kOracleStream));

  Denoiser denoiser;
  std::size_t current_frames = 0;
  if (nets.denoiser) {
    const ToyDenoiser& net = *nets.denoiser;
    denoiser = [&net, &schedule, &ref, &current_frames](const LatentSeq& z, std::size_t t, const Condition& cond) {
      return net.forward(z, schedule.alpha_bars[t], replicate_latent(ref.latent, current_frames), cond.guidance);
    };
  } else {
    GaussianOracleSpec spec;
    spec.sigma0 = c.sigma0;
    spec.mu = [&mean, &current_frames](const Condition& cond) { return mean(cond.guidance, current_frames); };
    denoiser = make_oracle_denoiser(spec, schedule);
  }

  std::vector<LatentSeq> windows;
  json timing = json::array();
  double total_seconds = 0.0;
  for (std::size_t w = 0; w < out.plan.windows.size(); ++w) {
    const Window win = out.plan.windows[w];
    const std::uint64_t seed = derive_seed(c.seed, w);
    out.window_seeds.push_back(seed);
    const auto t0 = std::chrono::steady_clock::now();
    windows.push_back(in_stage("sample", static_cast<long>(win.start), [&] {
      current_frames = win.length();
      const FeatureStack s_win = slice_frames(f_s, win.start, win.end);
      const FeatureStack r_win = replicate_frames(f_r, win.length());
      const Condition c1{"reference", r_win};
      const Condition c2{"shading+reference", fuse(&s_win, &r_win, FusionCoefficients(1, 1))};
      DdimRequest req;
      req.shape = {win.length(), ref.latent.height(), ref.latent.width(), ref.latent.channels()};
      req.steps = steps;
      req.omega = c.omega;
      req.seed = seed;
      return ddim_sample(denoiser, schedule, req, c1, c2);
    }));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total_seconds += secs;
    timing.push_back({{"window", w}, {"start", win.start}, {"end", win.end}, {"seconds", secs}});
  }
  out.timing = {{"windows", timing}, {"total_seconds", total_seconds}};
  out.video = in_stage("blend", -1, [&] { return assemble_windows(out.plan, windows); });

  if (!nets.denoiser) {
    current_frames = total;
    const FeatureStack r_all = replicate_frames(f_r, total);
    out.mu_c1 = mean(r_all, total);
    out.mu_c2 = mean(fuse(&f_s, &r_all, FusionCoefficients(1, 1)), total);
  }
  return out;
}

json input_digests(const PipelineConfig& c) {
  json j = json::object();
  auto add = [&](const char* key, const fs::path& p) {
    if (!p.empty()) j[key] = file_sha256(p);
  };
  if (c.model) add("model", *c.model);
  add("driving", c.driving);
  add("reference", c.reference);
  add("lighting", c.lighting);
  if (c.weights && c.backend == Backend::kToy) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(*c.weights))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const fs::path& f : files) all += f.filename().string() + ":" + file_sha256(f) + "\n";
    j["weights"] = sha256_hex(all);
  }
  return j;
}

// Config with file paths replaced by content digests and the output location
// dropped, so identical inputs hash identically wherever they live.
json hashed_config(const PipelineConfig& c) {
  json j = config_to_json(c);
  j.erase("output_dir");
  const json digests = input_digests(c);
  for (const char* key : {"model", "driving", "reference", "lighting", "weights"}) {
    j[key] = digests.contains(key) ? json({{"sha256", digests[key]}}) : json();
  }
  return j;
}

void write_manifest(const PipelineConfig& c, ArtifactWriter& out, json extra) {
  const json cfg = hashed_config(c);
  json m = {
      {"tool", "lcvd"},
      {"version", kToolVersion},
      {"mode", mode_name(c.mode)},
      {"config", cfg},
      {"config_hash", sha256_hex(cfg.dump())},
      {"versions",
       {{"tool", kToolVersion},
        {"model_format", kModelFormatVersion},
        {"weight_format", kWeightFormatVersion},
        {"latent_format", 1}}},
  };
  m.update(extra);
  m["artifacts"] = out.digests();
  out.write_text("manifest.json", m.dump(2) + "\n");
}

void write_latent_artifact(ArtifactWriter& out, const std::string& stem, const LatentSeq& latent) {
  write_latent(out.path(stem + ".f32").replace_extension(), latent);
  out.add(stem + ".json");
}

void run_hints(const PipelineConfig& c) {
  ArtifactWriter out(c.output_dir);
  const Scene s = load_scene(c);
  const AlignedSequence a = align_scene(c, s);
  render_hints(c, s, a, out);
  write_manifest(c, out, {{"seeds", {{"master", c.seed}}}, {"frames", a.size()}});
}

void run_align(const PipelineConfig& c) {
  ArtifactWriter out(c.output_dir);
  const Scene s = load_scene(c);
  const AlignedSequence a = align_scene(c, s);
  in_stage("write", -1, [&] { out.write_text("aligned.json", aligned_to_json(a).dump(2) + "\n"); });
  write_manifest(c, out, {{"seeds", {{"master", c.seed}}}, {"frames", a.size()}});
}

void run_sampling(const PipelineConfig& c) {
  ArtifactWriter out(c.output_dir);
  const Scene s = load_scene(c);
  const AlignedSequence a = align_scene(c, s);
  in_stage("write", -1, [&] { out.write_text("aligned.json", aligned_to_json(a).dump(2) + "\n"); });
  const std::vector<ShadingFrame> hints = render_hints(c, s, a, out);
  const ReferenceInputs ref = prepare_reference(c, s);
  const Nets nets = load_nets(c);
  const SamplingResult r = sample_video(c, hints, ref, nets);

  in_stage("write", -1, [&] {
    write_latent_artifact(out, "latents/video", r.video);
    if (c.mode == PipelineMode::kSampleOracle) {
      write_latent_artifact(out, "latents/mu_c1", r.mu_c1);
      write_latent_artifact(out, "latents/mu_c2", r.mu_c2);
    }
  });
  if (c.mode == PipelineMode::kRelightAnimate) {
    const FeatureStack decoded = toy_decode(r.video);
    for (std::size_t i = 0; i < decoded.frames(); ++i) {
      in_stage("write", static_cast<long>(i), [&] {
        write_png(out.path("frames/" + frame_name("frame", i, ".png")), decoded.height(), decoded.width(), 3,
                  stack_frame_bytes(decoded, i));
      });
    }
  }
  // Timing varies run to run, so it stays out of the manifest.
  const fs::path timing = out.root() / "timing.json";
  std::ofstream(timing) << r.timing.dump(2) << "\n";

  write_manifest(c, out,
                 {{"seeds",
                   {{"master", c.seed},
                    {"windows", r.window_seeds},
                    {"adapters", c.backend == Backend::kOracle ? json(derive_seed(c.seed, kAdapterStream)) : json()},
                    {"oracle", c.backend == Backend::kOracle ? json(derive_seed(c.seed, kOracleStream)) : json()}}},
                  {"frames", hints.size()},
                  {"plan", plan_to_json(r.plan)},
                  {"sampling_steps", default_step_indices(default_schedule(), c.steps)},
                  {"timing_file", "timing.json"}});
}

void run_train(const PipelineConfig& c) {
  ArtifactWriter out(c.output_dir);
  ToyRunConfig run = c.training;
  run.options.polarity = c.mask_polarity;
  const ToyRunResult result = in_stage("train", -1, [&] { return run_toy_training(run, c.seed); });
  const ToyModel& model = result.model;

  std::string csv = "step,loss\n";
  for (std::size_t step = 0; step < result.losses.size(); ++step) {
    char line[64];
    std::snprintf(line, sizeof line, "%zu,%.17g\n", step, result.losses[step]);
    csv += line;
  }
  in_stage("write", -1, [&] {
    out.write_text("loss.csv", csv);
    for (const auto& [name, net] : {std::pair{"shading_adapter", &model.shading},
                                     std::pair{"reference_adapter", &model.reference}}) {
      save_adapter(out.path(std::string("weights/") + name + ".bin").replace_extension(), *net);
      out.add(std::string("weights/") + name + ".json");
    }
    save_denoiser(out.path("weights/denoiser.bin").replace_extension(), model.denoiser);
    out.add("weights/denoiser.json");
  });
  write_manifest(c, out,
                 {{"seeds",
                   {{"master", c.seed},
                    {"data", ToyRunSeeds(c.seed).data},
                    {"model", ToyRunSeeds(c.seed).model},
                    {"train", ToyRunSeeds(c.seed).train}}}});
}

}  // namespace

void run_pipeline(const PipelineConfig& config) {
  switch (config.mode) {
    case PipelineMode::kHintsOnly: return run_hints(config);
    case PipelineMode::kAlign: return run_align(config);
    case PipelineMode::kTrainToy: return run_train(config);
    case PipelineMode::kSampleOracle:
    case PipelineMode::kRelightAnimate: return run_sampling(config);
  }
}

}  // namespace lcvd
