#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "lcvd/rng.hpp"
#include "lcvd/tensor.hpp"

namespace lcvd {

inline constexpr double kLeakySlope = 0.1;

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  bool activation = true;  // leaky rectifier on the output

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// 2D convolution over channel-first stacks with "same" padding (kernel / 2),
// so the output extent is ceil(in / stride) for odd kernels.
struct Conv2d {
  ConvSpec spec;
  std::vector<double> weight;  // out x in x k x k
  std::vector<double> bias;    // out

  Conv2d() = default;
  explicit Conv2d(const ConvSpec& s);

  std::size_t weight_index(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return ((o * spec.in_channels + i) * spec.kernel + ky) * spec.kernel + kx;
  }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

struct ConvGrads {
  std::vector<double> weight;
  std::vector<double> bias;

  ConvGrads() = default;
  explicit ConvGrads(const Conv2d& layer)
      : weight(layer.weight.size(), 0.0), bias(layer.bias.size(), 0.0) {}
};

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride);

// Uniform fan-in scaled initialization; biases start at zero.
void init_conv(Conv2d& layer, Rng& rng);

double leaky(double x);
double leaky_grad(double x);

// Linear part of the layer (no activation).
FeatureStack conv_linear(const Conv2d& layer, const FeatureStack& input);

// Full layer; `pre_activation` receives the linear output when non-null.
FeatureStack conv_forward(const Conv2d& layer, const FeatureStack& input,
                          FeatureStack* pre_activation = nullptr);

// Gradient through the linear part given d(loss)/d(linear output).
// Accumulates into `grads` and returns d(loss)/d(input).
FeatureStack conv_linear_backward(const Conv2d& layer, const FeatureStack& input,
                                  const FeatureStack& grad_linear, ConvGrads& grads);

// Gradient through the full layer. `pre_activation` is the linear output of
// the matching forward call.
FeatureStack conv_backward(const Conv2d& layer, const FeatureStack& input,
                           const FeatureStack& pre_activation, const FeatureStack& grad_output,
                           ConvGrads& grads);

inline constexpr int kWeightFormatVersion = 1;

// `<stem>.bin` (little-endian float64 weights then biases per layer) plus a
// `<stem>.json` manifest with layer specs, offsets and format version.
void save_conv_stack(const std::filesystem::path& stem, const std::vector<Conv2d>& layers);
std::vector<Conv2d> load_conv_stack(const std::filesystem::path& stem);

}  // namespace lcvd
