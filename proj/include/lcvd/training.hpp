#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "lcvd/adapters.hpp"
#include "lcvd/diffusion.hpp"
#include "lcvd/parametric_face.hpp"
#include "lcvd/rasterizer.hpp"
#include "lcvd/toy_denoiser.hpp"

namespace lcvd {

// mean((eps - pred)^2)
double ldm_loss(const LatentSeq& eps, const LatentSeq& pred);

// mean(((1 - M) (eps - pred))^2) with M (frames x h x w x 1) broadcast over
// latent channels. Residuals at M = 1 contribute nothing.
double masked_loss(const LatentSeq& eps, const LatentSeq& pred, const MaskSeq& mask);

// masked_loss + ldm_loss
double total_loss(const LatentSeq& eps, const LatentSeq& pred, const MaskSeq& mask);

// d(total_loss)/d(pred)
LatentSeq total_loss_grad(const LatentSeq& eps, const LatentSeq& pred, const MaskSeq& mask);

// One training video: F latent frames, F shading hints, the reference frame
// and per-frame portrait masks at latent resolution (1 = portrait).
struct TrainSample {
  LatentSeq video_latent;  // F x h x w x c
  FeatureStack hints;      // F x 3 x H x W
  FeatureStack reference;  // 1 x 3 x H x W
  MaskSeq masks;           // F x h x w x 1
};

struct TrainBatch {
  std::vector<TrainSample> samples;
};

struct ToyModel {
  AdapterNet shading;
  AdapterNet reference;
  ToyDenoiser denoiser;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

struct ToyModelConfig {
  AdapterConfig adapter{3, {4, 8, 8}, 8};
  ToyDenoiserConfig denoiser{4, 8, 16};
};

ToyModel make_toy_model(const ToyModelConfig& config, std::uint64_t seed);

struct ModelGrads {
  std::vector<ConvGrads> shading;
  std::vector<ConvGrads> reference;
  std::vector<ConvGrads> denoiser;

  explicit ModelGrads(const ToyModel& model);
};

// Random quantities of one training step for one sample.
struct StepDraws {
  std::size_t t = 0;
  LatentSeq eps;
  FusionCoefficients fusion;
};

struct TrainOptions {
  double learning_rate = 0.1;
  MaskPolarity polarity = MaskPolarity::kPortraitIsOne;
  // Probabilities of (alpha, beta) = (0,0), (0,1), (1,0), (1,1).
  std::array<double, 4> fusion_weights{0.25, 0.25, 0.25, 0.25};
  std::optional<FusionCoefficients> forced_fusion;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

std::vector<StepDraws> draw_step(const TrainBatch& batch, const NoiseSchedule& schedule,
                                 const TrainOptions& options, Rng& rng);

// Batch-mean total loss for fixed draws; accumulates exact gradients into
// `grads` when non-null.
double batch_loss(const ToyModel& model, const TrainBatch& batch,
                  const std::vector<StepDraws>& draws, const NoiseSchedule& schedule,
                  MaskPolarity polarity, ModelGrads* grads);

// Draws t, eps and (alpha, beta) per sample, evaluates the total loss and
// applies one plain gradient-descent update. Returns the pre-update loss.
double train_step(ToyModel& model, const TrainBatch& batch, const NoiseSchedule& schedule,
                  const TrainOptions& options, Rng& rng);

struct SynthConfig {
  std::size_t image_size = 64;  // latent is image_size / 8
  std::size_t frames = 4;
  FaceModelConfig face{162, 4, 2, 11};
};

// Procedural training videos: an SH-lit, albedo-textured sphere-like head
// under scripted pose and lighting. Deterministic per seed and index.
class SyntheticVideoStream {
 public:
  SyntheticVideoStream(std::uint64_t seed, SynthConfig config);

  struct Detail {
    TrainSample sample;
    std::vector<ShadingFrame> hint_frames;
    std::vector<SHCoefficients> lighting;  // per frame
  };

  Detail render(std::size_t index) const;
  TrainSample sample(std::size_t index) const { return render(index).sample; }
  TrainBatch batch(std::size_t first, std::size_t count) const;

  const SynthConfig& config() const { return config_; }

 private:
  std::uint64_t seed_;
  SynthConfig config_;
  ParametricFaceModel model_;
};

// `count` samples starting at index 0.
TrainBatch synth_dataset(std::uint64_t seed, std::size_t count, const SynthConfig& config);

// A complete toy training run: a fixed synthetic dataset cycled in order,
// `batch_size` samples per step.
struct ToyRunConfig {
  std::size_t steps = 200;
  std::size_t batch_size = 2;
  std::size_t dataset_size = 8;
  SynthConfig synth;
  ToyModelConfig model;
  TrainOptions options;
};

// Independent streams derived from one master seed.
struct ToyRunSeeds {
  std::uint64_t data;
  std::uint64_t model;
  std::uint64_t train;

  explicit ToyRunSeeds(std::uint64_t master);
};

struct ToyRunResult {
  ToyModel model;
  std::vector<double> losses;  // pre-update loss of every step
};

TrainBatch toy_run_dataset(const ToyRunConfig& config, std::uint64_t seed);
ToyRunResult run_toy_training(const ToyRunConfig& config, std::uint64_t seed);
// Same run on caller-supplied data.
ToyRunResult run_toy_training(const ToyRunConfig& config, std::uint64_t seed, const TrainBatch& data);

}  // namespace lcvd
