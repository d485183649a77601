// lcvd: command-line driver for hint rendering, alignment, sampling and toy
// training. Each subcommand reads an optional JSON config; flags override it.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcvd/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> model, driving, reference, lighting, weights, output;
  std::optional<std::string> backend, mask_polarity, alignment;
  std::optional<double> omega, sigma0;
  std::optional<std::size_t> steps, window, overlap, resolution;
  std::optional<std::uint64_t> seed;
  bool write_depth = false;
};

void add_flags(CLI::App* cmd, Overrides& o, bool scene, bool sampling) {
  cmd->add_option("-c,--config", o.config, "JSON config file");
  cmd->add_option("-o,--output", o.output, "Output directory");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--mask-polarity", o.mask_polarity, "portrait-is-one | portrait-is-zero");
  if (scene) {
    cmd->add_option("--model", o.model, "Face model JSON");
    cmd->add_option("--driving", o.driving, "Driving sequence JSON");
    cmd->add_option("--reference", o.reference, "Reference portrait JSON");
    cmd->add_option("--lighting", o.lighting, "Target SH lighting JSON");
    cmd->add_option("--alignment", o.alignment, "relative | scale-consistent");
    cmd->add_option("--resolution", o.resolution, "Square render size in pixels");
    cmd->add_flag("--write-depth", o.write_depth, "Also dump depth buffers");
  }
  if (sampling) {
    cmd->add_option("--omega", o.omega, "Guidance weight");
    cmd->add_option("--steps", o.steps, "DDIM steps");
    cmd->add_option("--window", o.window, "Frames per sampling window");
    cmd->add_option("--overlap", o.overlap, "Frames shared by consecutive windows");
    cmd->add_option("--sigma0", o.sigma0, "Oracle data spread");
    cmd->add_option("--backend", o.backend, "oracle | toy");
    cmd->add_option("--weights", o.weights, "Weights directory from train-toy");
  }
}

json load_config(const Overrides& o, const std::string& mode, fs::path& base) {
  json raw = json::object();
  base = fs::current_path();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw lcvd::ConfigError("--config", "cannot open " + o.config);
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      throw lcvd::ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    base = fs::absolute(o.config).parent_path();
  }
  if (raw.is_object() && raw.contains("mode") && raw["mode"] != mode) {
    throw lcvd::ConfigError("mode", "config is for mode " + raw["mode"].dump() + ", subcommand runs \"" + mode + "\"");
  }
  if (raw.is_object()) raw["mode"] = mode;
  // Flag paths are relative to the working directory, not the config file.
  auto path = [&](const char* key, const std::optional<std::string>& v) {
    if (v) raw[key] = fs::absolute(*v).string();
  };
  path("model", o.model);
  path("driving", o.driving);
  path("reference", o.reference);
  path("lighting", o.lighting);
  path("weights", o.weights);
  path("output_dir", o.output);
  auto set = [&](const char* key, const auto& v) {
    if (v) raw[key] = *v;
  };
  set("backend", o.backend);
  set("mask_polarity", o.mask_polarity);
  set("alignment", o.alignment);
  set("omega", o.omega);
  set("sigma0", o.sigma0);
  set("steps", o.steps);
  set("window", o.window);
  set("overlap", o.overlap);
  set("resolution", o.resolution);
  set("seed", o.seed);
  if (o.write_depth) raw["write_depth"] = true;
  return raw;
}

int report(const std::string& type, const std::string& message, json extra = json::object()) {
  json err = {{"type", type}, {"message", message}};
  err.update(extra);
  std::cerr << json({{"error", err}}).dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lighting-controllable portrait animation toolkit"};
  app.require_subcommand(1);

  Overrides o;
  struct Sub {
    const char* name;
    const char* mode;
    const char* help;
    bool scene;
    bool sampling;
  };
  const Sub subs[] = {
      {"hints", "hints-only", "Render shading hints and masks for a driving sequence", true, false},
      {"align", "align", "Align driving motion to the reference portrait", true, false},
      {"sample", "sample-oracle", "Sample latents with the analytic oracle denoiser", true, true},
      {"train-toy", "train-toy", "Train the toy adapters and denoiser on synthetic videos", false, false},
      {"relight", "relight-animate", "Relight and animate the reference portrait", true, true},
  };
  std::string mode;
  for (const Sub& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_flags(cmd, o, s.scene, s.sampling);
    cmd->callback([&mode, m = s.mode] { mode = m; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what());
  }

  try {
    fs::path base;
    const json raw = load_config(o, mode, base);
    const lcvd::PipelineConfig config = lcvd::validate_config(raw, base);
    lcvd::run_pipeline(config);
  } catch (const lcvd::ConfigError& e) {
    return report("config", e.what(), {{"path", e.path()}});
  } catch (const lcvd::StageError& e) {
    return report("stage", e.what(), {{"stage", e.stage()}, {"frame", e.frame()}});
  } catch (const std::exception& e) {
    return report("internal", e.what());
  }
  return 0;
}
