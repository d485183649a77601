#include "lcvd/toy_denoiser.hpp"

#include <cmath>
#include <string>

#include "lcvd/adapters.hpp"
#include "lcvd/error.hpp"

namespace lcvd {

ToyDenoiser::ToyDenoiser(std::vector<Conv2d> layers) : layers_(std::move(layers)) {
  if (layers_.size() != kLayers) throw Error("toy denoiser: expected 3 layers");
  for (std::size_t i = 1; i < layers_.size(); ++i)
    if (layers_[i].spec.in_channels != layers_[i - 1].spec.out_channels)
      throw ShapeError("toy denoiser: layer channel chain broken at layer " + std::to_string(i));
  for (const Conv2d& l : layers_)
    if (l.spec.stride != 1) throw Error("toy denoiser: layers must have stride 1");
  if (layers_[0].spec.in_channels != 2 * layers_[2].spec.out_channels + 2) {
    throw ShapeError("toy denoiser: input layer must take 2c + 2 channels");
  }
}

ToyDenoiser ToyDenoiser::create(const ToyDenoiserConfig& config, Rng& rng) {
  const std::size_t c = config.latent_channels;
  std::vector<Conv2d> layers;
  layers.emplace_back(ConvSpec{2 * c + 2, config.feature_channels, 3, 1, false});
  layers.emplace_back(ConvSpec{config.feature_channels, config.hidden, 3, 1, true});
  layers.emplace_back(ConvSpec{config.hidden, c, 3, 1, false});
  for (Conv2d& l : layers) init_conv(l, rng);
  // Small output layer so the untrained model predicts near-zero noise.
  for (double& w : layers.back().weight) w *= 0.1;
  return ToyDenoiser(std::move(layers));
}

LatentSeq ToyDenoiser::forward(const LatentSeq& z_t, double alpha_bar, const LatentSeq& reference,
                               const FeatureStack& guidance, Trace* trace) const {
  const std::size_t c = latent_channels();
  if (z_t.channels() != c) throw ShapeError("toy denoiser: latent channel mismatch");
  FeatureStack x = to_channel_first(concat_channels(z_t, reference));
  if (x.channels() + 2 != layers_[0].spec.in_channels) {
    throw ShapeError("toy denoiser: reference latent channel mismatch");
  }
  {
    FeatureStack full(x.frames(), x.channels() + 2, x.height(), x.width());
    const double planes[2] = {std::sqrt(alpha_bar), std::sqrt(1.0 - alpha_bar)};
    for (std::size_t f = 0; f < x.frames(); ++f)
      for (std::size_t ch = 0; ch < full.channels(); ++ch)
        for (std::size_t y = 0; y < x.height(); ++y)
          for (std::size_t xx = 0; xx < x.width(); ++xx)
            full(f, ch, y, xx) = ch < x.channels() ? x(f, ch, y, xx) : planes[ch - x.channels()];
    x = std::move(full);
  }

  FeatureStack pre0 = conv_linear(layers_[0], x);
  if (!guidance.empty()) {
    require_same_shape(pre0, guidance, "toy denoiser: guidance");
    auto p = pre0.values();
    auto g = guidance.values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += g[i];
  }
  FeatureStack a0 = pre0;
  for (double& v : a0.values()) v = leaky(v);
  FeatureStack pre1;
  FeatureStack a1 = conv_forward(layers_[1], a0, &pre1);
  FeatureStack pre2;
  FeatureStack out = conv_forward(layers_[2], a1, &pre2);
  if (trace) {
    trace->inputs = {std::move(x), a0, a1};
    trace->pre = {std::move(pre0), std::move(pre1), std::move(pre2)};
  }
  return to_channel_last(out);
}

ToyDenoiser::Gradients ToyDenoiser::backward(const Trace& trace, const LatentSeq& grad_output,
                                             bool has_guidance) const {
  if (trace.inputs.size() != kLayers || trace.pre.size() != kLayers) {
    throw Error("toy denoiser backward: missing forward trace");
  }
  Gradients g;
  for (std::size_t i = 0; i < kLayers; ++i) g.layers[i] = ConvGrads(layers_[i]);
  FeatureStack grad = to_channel_first(grad_output);
  grad = conv_backward(layers_[2], trace.inputs[2], trace.pre[2], grad, g.layers[2]);
  grad = conv_backward(layers_[1], trace.inputs[1], trace.pre[1], grad, g.layers[1]);
  // Layer 0: leaky applied after the guidance sum.
  {
    auto gv = grad.values();
    auto pre = trace.pre[0].values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= leaky_grad(pre[i]);
  }
  if (has_guidance) g.guidance = grad;
  conv_linear_backward(layers_[0], trace.inputs[0], grad, g.layers[0]);
  return g;
}

void save_denoiser(const std::filesystem::path& stem, const ToyDenoiser& net) {
  save_conv_stack(stem, net.layers());
}

ToyDenoiser load_denoiser(const std::filesystem::path& stem) {
  return ToyDenoiser(load_conv_stack(stem));
}

}  // namespace lcvd
