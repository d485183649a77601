#include "lcvd/adapters.hpp"

#include <algorithm>
#include <string>

#include "lcvd/error.hpp"

namespace lcvd {

AdapterNet::AdapterNet(std::vector<Conv2d> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error("adapter: no layers");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].spec.in_channels != layers_[i - 1].spec.out_channels) {
      throw ShapeError("adapter: layer " + std::to_string(i) + " expects " +
                       std::to_string(layers_[i].spec.in_channels) + " channels, previous emits " +
                       std::to_string(layers_[i - 1].spec.out_channels));
    }
  }
}

std::size_t AdapterNet::downsampling() const {
  std::size_t factor = 1;
  for (const Conv2d& l : layers_) factor *= l.spec.stride;
  return factor;
}

AdapterNet AdapterNet::create(const AdapterConfig& config, Rng& rng) {
  if (config.widths.size() != 3) throw Error("adapter: expected three stage widths");
  std::vector<Conv2d> layers;
  std::size_t in = config.in_channels;
  const std::size_t strides[] = {2, 2, 2, 1};
  const std::size_t outs[] = {config.widths[0], config.widths[1], config.widths[2],
                              config.out_channels};
  for (std::size_t s = 0; s < 4; ++s) {
    layers.emplace_back(ConvSpec{in, outs[s], 3, strides[s], true});
    in = outs[s];
  }
  layers.emplace_back(ConvSpec{in, config.out_channels, 1, 1, false});
  for (Conv2d& l : layers) init_conv(l, rng);
  AdapterNet net(std::move(layers));
  if (net.downsampling() != kAdapterDownsampling) throw Error("adapter: downsampling must be 8");
  return net;
}

AdapterTrace adapter_forward_traced(const AdapterNet& net, const FeatureStack& input) {
  if (net.layers().empty()) throw Error("adapter_forward: empty network");
  const std::size_t factor = net.downsampling();
  if (input.height() % factor != 0 || input.width() % factor != 0) {
    throw ShapeError("adapter_forward: spatial dims " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()) + " not divisible by " + std::to_string(factor));
  }
  if (input.channels() != net.in_channels()) {
    throw ShapeError("adapter_forward: expected " + std::to_string(net.in_channels()) +
                     " channels, got " + std::to_string(input.channels()));
  }
  if (!input.all_finite()) throw Error("adapter_forward: input contains NaN/Inf");
  AdapterTrace trace;
  FeatureStack x = input;
  for (const Conv2d& layer : net.layers()) {
    FeatureStack pre;
    FeatureStack y = conv_forward(layer, x, &pre);
    trace.inputs.push_back(std::move(x));
    trace.pre.push_back(std::move(pre));
    x = std::move(y);
  }
  trace.output = std::move(x);
  return trace;
}

AdapterFeatures adapter_forward(const AdapterNet& net, const FeatureStack& input) {
  return adapter_forward_traced(net, input).output;
}

AdapterGradients adapter_backward(const AdapterNet& net, const AdapterTrace& trace,
                                  const AdapterFeatures& upstream) {
  require_same_shape(trace.output, upstream, "adapter_backward");
  AdapterGradients out;
  out.layers.reserve(net.layers().size());
  for (const Conv2d& l : net.layers()) out.layers.emplace_back(l);
  FeatureStack grad = upstream;
  for (std::size_t i = net.layers().size(); i-- > 0;) {
    grad = conv_backward(net.layers()[i], trace.inputs[i], trace.pre[i], grad, out.layers[i]);
  }
  out.input = std::move(grad);
  return out;
}

AdapterGradients adapter_backward(const AdapterNet& net, const FeatureStack& input,
                                  const AdapterFeatures& upstream) {
  return adapter_backward(net, adapter_forward_traced(net, input), upstream);
}

FeatureStack replicate_frames(const FeatureStack& single, std::size_t frames) {
  if (single.frames() != 1) throw ShapeError("replicate_frames: expected a single frame");
  FeatureStack out(frames, single.channels(), single.height(), single.width());
  const auto src = single.values();
  auto dst = out.values();
  for (std::size_t f = 0; f < frames; ++f) {
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(f * src.size()));
  }
  return out;
}

FusionCoefficients::FusionCoefficients(int a, int b) : alpha(a), beta(b) {
  if ((a != 0 && a != 1) || (b != 0 && b != 1)) {
    throw Error("fusion coefficients must be 0 or 1");
  }
}

AdapterFeatures fuse(const AdapterFeatures* shading, const AdapterFeatures* reference,
                     FusionCoefficients coeffs) {
  if (shading && reference) require_same_shape(*shading, *reference, "fuse");
  const AdapterFeatures* any = shading ? shading : reference;
  if (!any) {
    if (coeffs.alpha != 0 || coeffs.beta != 0) {
      throw Error("fuse: both features absent with a nonzero coefficient");
    }
    return {};
  }
  AdapterFeatures out(Tensor4(any->shape(), 0.0));
  auto o = out.values();
  if (shading && coeffs.alpha != 0) {
    auto s = shading->values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += s[i];
  }
  if (reference && coeffs.beta != 0) {
    auto r = reference->values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += r[i];
  }
  return out;
}

bool MaskSeq::is_binary() const {
  return std::all_of(values().begin(), values().end(), [](double v) { return v == 0.0 || v == 1.0; });
}

MaskSeq apply_polarity(const MaskSeq& portrait, MaskPolarity polarity) {
  MaskSeq out = portrait;
  if (polarity == MaskPolarity::kPortraitIsZero) {
    for (double& v : out.values()) v = 1.0 - v;
  }
  return out;
}

MaskSeq downsample_mask(const ShadingFrame& frame, std::size_t factor) {
  if (factor == 0 || frame.height % factor != 0 || frame.width % factor != 0) {
    throw ShapeError("downsample_mask: frame size not divisible by " + std::to_string(factor));
  }
  MaskSeq out(1, frame.height / factor, frame.width / factor);
  for (std::size_t y = 0; y < frame.height; ++y)
    for (std::size_t x = 0; x < frame.width; ++x)
      if (frame.mask[frame.index(y, x)]) out(0, y / factor, x / factor, 0) = 1.0;
  return out;
}

LatentSeq prepare_reference_latent(const LatentSeq& ref_latent, const MaskSeq& mask,
                                   std::size_t frames) {
  if (ref_latent.frames() != 1) throw ShapeError("prepare_reference_latent: expected 1 frame");
  if (mask.frames() != 1 || mask.height() != ref_latent.height() ||
      mask.width() != ref_latent.width()) {
    throw ShapeError("prepare_reference_latent: mask " + shape_string(mask.shape()) +
                     " does not match latent " + shape_string(ref_latent.shape()));
  }
  if (!mask.is_binary()) throw Error("prepare_reference_latent: mask must be binary");
  LatentSeq masked(ref_latent);
  for (std::size_t y = 0; y < masked.height(); ++y)
    for (std::size_t x = 0; x < masked.width(); ++x)
      if (mask(0, y, x, 0) == 1.0)
        for (std::size_t c = 0; c < masked.channels(); ++c) masked(0, y, x, c) = 0.0;

  LatentSeq out(frames, masked.height(), masked.width(), masked.channels());
  const auto src = masked.values();
  auto dst = out.values();
  for (std::size_t f = 0; f < frames; ++f) {
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(f * src.size()));
  }
  return out;
}

LatentSeq concat_channels(const LatentSeq& a, const LatentSeq& b) {
  if (a.frames() != b.frames() || a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  LatentSeq out(a.frames(), a.height(), a.width(), a.channels() + b.channels());
  for (std::size_t f = 0; f < a.frames(); ++f)
    for (std::size_t y = 0; y < a.height(); ++y)
      for (std::size_t x = 0; x < a.width(); ++x) {
        for (std::size_t c = 0; c < a.channels(); ++c) out(f, y, x, c) = a(f, y, x, c);
        for (std::size_t c = 0; c < b.channels(); ++c)
          out(f, y, x, a.channels() + c) = b(f, y, x, c);
      }
  return out;
}

void save_adapter(const std::filesystem::path& stem, const AdapterNet& net) {
  save_conv_stack(stem, net.layers());
}

AdapterNet load_adapter(const std::filesystem::path& stem) { return AdapterNet(load_conv_stack(stem)); }

}  // namespace lcvd
