#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lcvd/conv.hpp"
#include "lcvd/rasterizer.hpp"
#include "lcvd/tensor.hpp"

namespace lcvd {

// Channel plan of an adapter: three stride-2 stages and one stride-1 stage of
// 3x3 convolutions (3 -> widths[0] -> widths[1] -> widths[2] -> out_channels),
// then a linear 1x1 projection. Total downsampling is 8.
struct AdapterConfig {
  std::size_t in_channels = 3;
  std::vector<std::size_t> widths{16, 32, 64};
  std::size_t out_channels = 64;  // denoiser first-layer channel count C'
};

inline constexpr std::size_t kAdapterDownsampling = 8;

class AdapterNet {
 public:
  AdapterNet() = default;
  explicit AdapterNet(std::vector<Conv2d> layers);

  // Seeded random weights for the standard plan.
  static AdapterNet create(const AdapterConfig& config, Rng& rng);

  const std::vector<Conv2d>& layers() const { return layers_; }
  std::vector<Conv2d>& layers() { return layers_; }
  std::size_t in_channels() const { return layers_.front().spec.in_channels; }
  std::size_t out_channels() const { return layers_.back().spec.out_channels; }
  std::size_t downsampling() const;

  friend bool operator==(const AdapterNet&, const AdapterNet&) = default;

 private:
  std::vector<Conv2d> layers_;
};

struct AdapterTrace {
  std::vector<FeatureStack> inputs;  // input of each layer
  std::vector<FeatureStack> pre;     // linear output of each layer
  AdapterFeatures output;
};

// input: F x 3 x H x W, H and W divisible by 8. Output F x C' x H/8 x W/8.
AdapterFeatures adapter_forward(const AdapterNet& net, const FeatureStack& input);
AdapterTrace adapter_forward_traced(const AdapterNet& net, const FeatureStack& input);

struct AdapterGradients {
  std::vector<ConvGrads> layers;
  FeatureStack input;
};

// Exact reverse-mode gradients of sum(upstream * adapter_forward(net, input)).
AdapterGradients adapter_backward(const AdapterNet& net, const FeatureStack& input,
                                  const AdapterFeatures& upstream);
AdapterGradients adapter_backward(const AdapterNet& net, const AdapterTrace& trace,
                                  const AdapterFeatures& upstream);

// Single reference frame repeated F times along the frame axis.
FeatureStack replicate_frames(const FeatureStack& single, std::size_t frames);

struct FusionCoefficients {
  int alpha = 1;
  int beta = 1;

  FusionCoefficients() = default;
  FusionCoefficients(int a, int b);
};

// alpha * F_s + beta * F_r. A null pointer is an absent feature and counts as
// zero. Returns an empty stack when both are absent and both coefficients are 0.
AdapterFeatures fuse(const AdapterFeatures* shading, const AdapterFeatures* reference,
                     FusionCoefficients coeffs);

enum class MaskPolarity { kPortraitIsOne, kPortraitIsZero };

// Binary masks at latent resolution: frames x h x w x 1, values in {0, 1}.
struct MaskSeq : Tensor4 {
  MaskSeq() = default;
  MaskSeq(std::size_t frames, std::size_t h, std::size_t w, double fill = 0.0)
      : Tensor4({frames, h, w, 1}, fill) {}

  std::size_t frames() const { return dim(0); }
  std::size_t height() const { return dim(1); }
  std::size_t width() const { return dim(2); }
  bool is_binary() const;
};

// Portrait mask at the configured polarity: with kPortraitIsZero the
// rasterizer mask is inverted.
MaskSeq apply_polarity(const MaskSeq& portrait, MaskPolarity polarity);

// Max-pools a rasterizer mask by `factor` (any covered pixel marks the cell).
MaskSeq downsample_mask(const ShadingFrame& frame, std::size_t factor);

// Zeroes cells where mask == 1 in a 1 x h x w x c reference latent and
// replicates the result over `frames`.
LatentSeq prepare_reference_latent(const LatentSeq& ref_latent, const MaskSeq& mask,
                                   std::size_t frames);

// Channel concatenation of two F x h x w x c_i latents.
LatentSeq concat_channels(const LatentSeq& a, const LatentSeq& b);

void save_adapter(const std::filesystem::path& stem, const AdapterNet& net);
AdapterNet load_adapter(const std::filesystem::path& stem);

}  // namespace lcvd
