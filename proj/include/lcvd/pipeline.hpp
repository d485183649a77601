#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "lcvd/adapters.hpp"
#include "lcvd/diffusion.hpp"
#include "lcvd/error.hpp"
#include "lcvd/motion_alignment.hpp"
#include "lcvd/training.hpp"
#include "lcvd/windowed_sampler.hpp"

namespace lcvd {

inline constexpr const char* kToolVersion = "0.1.0";

enum class PipelineMode { kRelightAnimate, kHintsOnly, kAlign, kTrainToy, kSampleOracle };
enum class Backend { kOracle, kToy };

const char* mode_name(PipelineMode mode);

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kRelightAnimate;
  std::optional<std::filesystem::path> model;  // default: built-in template model
  std::filesystem::path driving;
  std::filesystem::path reference;
  std::filesystem::path lighting;
  std::optional<std::filesystem::path> weights;  // directory written by train-toy
  Backend backend = Backend::kOracle;
  double omega = kDefaultGuidance;
  std::size_t steps = kDefaultSamplingSteps;
  std::size_t window = kDefaultWindowLength;
  std::size_t overlap = kDefaultWindowOverlap;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  MaskPolarity mask_polarity = MaskPolarity::kPortraitIsOne;
  AlignmentMode alignment = AlignmentMode::kRelative;
  std::size_t resolution = 512;
  double sigma0 = 0.0;
  bool write_depth = false;
  ToyRunConfig training;  // mask polarity comes from mask_polarity
};

// Strict validation: unknown keys, wrong types and out-of-range values throw
// ConfigError naming the offending path. Relative file paths resolve against
// `base_dir`; referenced files must exist.
PipelineConfig validate_config(const nlohmann::json& raw,
                               const std::filesystem::path& base_dir = ".");

// Canonical JSON of a validated config (every default filled in).
nlohmann::json config_to_json(const PipelineConfig& config);

// A failure inside one pipeline stage. `frame` is the first frame the stage
// was working on, or -1 when the failure is not tied to a frame.
class StageError : public Error {
 public:
  StageError(std::string stage, long frame, const std::string& message);
  const std::string& stage() const { return stage_; }
  long frame() const { return frame_; }

 private:
  std::string stage_;
  long frame_;
};

// Reference portrait description.
//   {"pose": {...}, "shape": [...], "lighting": {"sh": ...},
//    "albedo": [r, g, b], "background": [r, g, b]}
struct ReferenceSpec {
  PoseParams pose;
  Eigen::VectorXd shape;
  SHCoefficients lighting;
  Vec3 albedo = Vec3::Constant(0.8);
  Vec3 background = Vec3::Zero();
};

ReferenceSpec reference_from_json(const nlohmann::json& j);
nlohmann::json reference_to_json(const ReferenceSpec& ref);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

// Runs the configured mode and writes its artifacts under output_dir.
void run_pipeline(const PipelineConfig& config);

}  // namespace lcvd
