#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "lcvd/conv.hpp"
#include "lcvd/tensor.hpp"

namespace lcvd {

struct ToyDenoiserConfig {
  std::size_t latent_channels = 4;
  std::size_t feature_channels = 64;  // C', must match the adapters
  std::size_t hidden = 16;
};

// Small per-frame conv net predicting noise from
//   [noisy latent | masked reference latent | sqrt(abar) | sqrt(1 - abar)]
// with the fused adapter guidance added to its first-layer features before
// the nonlinearity:
//   a1 = leaky(conv_in(x) + guidance)
//   a2 = leaky(conv_hidden(a1))
//   eps = conv_out(a2)
class ToyDenoiser {
 public:
  static constexpr std::size_t kLayers = 3;

  ToyDenoiser() = default;
  explicit ToyDenoiser(std::vector<Conv2d> layers);
  static ToyDenoiser create(const ToyDenoiserConfig& config, Rng& rng);

  struct Trace {
    std::vector<FeatureStack> inputs;  // input of each layer
    std::vector<FeatureStack> pre;     // linear output (+ guidance for layer 0)
  };

  struct Gradients {
    std::array<ConvGrads, kLayers> layers;
    FeatureStack guidance;  // d(loss)/d(guidance); empty if no guidance was given
  };

  std::size_t latent_channels() const { return layers_.back().spec.out_channels; }
  std::size_t feature_channels() const { return layers_.front().spec.out_channels; }

  // `guidance` is F x C' x h x w or empty (no guidance).
  LatentSeq forward(const LatentSeq& z_t, double alpha_bar, const LatentSeq& reference,
                    const FeatureStack& guidance, Trace* trace = nullptr) const;

  Gradients backward(const Trace& trace, const LatentSeq& grad_output, bool has_guidance) const;

  const std::vector<Conv2d>& layers() const { return layers_; }
  std::vector<Conv2d>& layers() { return layers_; }

  friend bool operator==(const ToyDenoiser&, const ToyDenoiser&) = default;

 private:
  std::vector<Conv2d> layers_;
};

void save_denoiser(const std::filesystem::path& stem, const ToyDenoiser& net);
ToyDenoiser load_denoiser(const std::filesystem::path& stem);

}  // namespace lcvd
