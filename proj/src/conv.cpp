#include "lcvd/conv.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "lcvd/error.hpp"

namespace lcvd {

namespace {

// Output columns [lo, hi) whose input tap ox * stride + k - pad lies in [0, in).
void tap_range(std::size_t in, std::size_t out, std::size_t stride, std::size_t k, std::size_t pad,
               std::size_t& lo, std::size_t& hi) {
  lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  hi = out;
  // need ox * stride + k - pad <= in - 1
  if (in + pad < k + 1) {
    hi = 0;
  } else {
    const std::size_t max_ox = (in + pad - k - 1) / stride;
    if (max_ox + 1 < hi) hi = max_ox + 1;
  }
  if (lo > hi) lo = hi;
}

void check_input(const Conv2d& layer, const FeatureStack& input) {
  if (input.channels() != layer.spec.in_channels) {
    throw ShapeError("conv: expected " + std::to_string(layer.spec.in_channels) +
                     " input channels, got " + std::to_string(input.channels()));
  }
}

}  // namespace

Conv2d::Conv2d(const ConvSpec& s)
    : spec(s), weight(s.out_channels * s.in_channels * s.kernel * s.kernel, 0.0),
      bias(s.out_channels, 0.0) {
  if (s.in_channels == 0 || s.out_channels == 0 || s.kernel == 0 || s.stride == 0) {
    throw Error("conv: channels, kernel and stride must be positive");
  }
  if (s.kernel % 2 == 0) throw Error("conv: kernel size must be odd for same padding");
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
  const std::size_t pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

void init_conv(Conv2d& layer, Rng& rng) {
  const double fan_in =
      static_cast<double>(layer.spec.in_channels * layer.spec.kernel * layer.spec.kernel);
  const double bound = std::sqrt(3.0 / fan_in);
  for (double& w : layer.weight) w = rng.uniform(-bound, bound);
  for (double& b : layer.bias) b = 0.0;
}

double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

FeatureStack conv_linear(const Conv2d& layer, const FeatureStack& input) {
  check_input(layer, input);
  const auto& s = layer.spec;
  const std::size_t pad = s.kernel / 2;
  const std::size_t oh = conv_output_extent(input.height(), s.kernel, s.stride);
  const std::size_t ow = conv_output_extent(input.width(), s.kernel, s.stride);
  FeatureStack out(input.frames(), s.out_channels, oh, ow);
  const std::size_t ih = input.height();
  const std::size_t iw = input.width();

  for (std::size_t n = 0; n < input.frames(); ++n) {
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      double* dst = &out(n, o, 0, 0);
      for (std::size_t p = 0; p < oh * ow; ++p) dst[p] = layer.bias[o];
      for (std::size_t i = 0; i < s.in_channels; ++i) {
        const double* src = input.values().data() + input.offset(n, i, 0, 0);
        for (std::size_t ky = 0; ky < s.kernel; ++ky) {
          std::size_t y_lo, y_hi;
          tap_range(ih, oh, s.stride, ky, pad, y_lo, y_hi);
          for (std::size_t kx = 0; kx < s.kernel; ++kx) {
            std::size_t x_lo, x_hi;
            tap_range(iw, ow, s.stride, kx, pad, x_lo, x_hi);
            const double w = layer.weight[layer.weight_index(o, i, ky, kx)];
            for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
              const double* row = src + (oy * s.stride + ky - pad) * iw;
              double* drow = dst + oy * ow;
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                drow[ox] += w * row[ox * s.stride + kx - pad];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureStack conv_forward(const Conv2d& layer, const FeatureStack& input,
                          FeatureStack* pre_activation) {
  FeatureStack out = conv_linear(layer, input);
  if (pre_activation) *pre_activation = out;
  if (layer.spec.activation) {
    for (double& v : out.values()) v = leaky(v);
  }
  return out;
}

FeatureStack conv_linear_backward(const Conv2d& layer, const FeatureStack& input,
                                  const FeatureStack& grad_linear, ConvGrads& grads) {
  check_input(layer, input);
  const auto& s = layer.spec;
  const std::size_t pad = s.kernel / 2;
  const std::size_t oh = conv_output_extent(input.height(), s.kernel, s.stride);
  const std::size_t ow = conv_output_extent(input.width(), s.kernel, s.stride);
  if (grad_linear.frames() != input.frames() || grad_linear.channels() != s.out_channels ||
      grad_linear.height() != oh || grad_linear.width() != ow) {
    throw ShapeError("conv backward: upstream gradient shape " +
                     shape_string(grad_linear.shape()) + " does not match layer output");
  }
  if (grads.weight.size() != layer.weight.size() || grads.bias.size() != layer.bias.size()) {
    throw ShapeError("conv backward: gradient buffers do not match layer");
  }
  const std::size_t ih = input.height();
  const std::size_t iw = input.width();
  FeatureStack grad_input(input.frames(), s.in_channels, ih, iw);

  for (std::size_t n = 0; n < input.frames(); ++n) {
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      const double* g = grad_linear.values().data() + grad_linear.offset(n, o, 0, 0);
      double bsum = 0.0;
      for (std::size_t p = 0; p < oh * ow; ++p) bsum += g[p];
      grads.bias[o] += bsum;
      for (std::size_t i = 0; i < s.in_channels; ++i) {
        const double* src = input.values().data() + input.offset(n, i, 0, 0);
        double* gin = &grad_input(n, i, 0, 0);
        for (std::size_t ky = 0; ky < s.kernel; ++ky) {
          std::size_t y_lo, y_hi;
          tap_range(ih, oh, s.stride, ky, pad, y_lo, y_hi);
          for (std::size_t kx = 0; kx < s.kernel; ++kx) {
            std::size_t x_lo, x_hi;
            tap_range(iw, ow, s.stride, kx, pad, x_lo, x_hi);
            const std::size_t wi = layer.weight_index(o, i, ky, kx);
            const double w = layer.weight[wi];
            double wsum = 0.0;
            for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
              const std::size_t row_off = (oy * s.stride + ky - pad) * iw;
              const double* grow = g + oy * ow;
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
                const std::size_t ii = row_off + ox * s.stride + kx - pad;
                wsum += grow[ox] * src[ii];
                gin[ii] += w * grow[ox];
              }
            }
            grads.weight[wi] += wsum;
          }
        }
      }
    }
  }
  return grad_input;
}

FeatureStack conv_backward(const Conv2d& layer, const FeatureStack& input,
                           const FeatureStack& pre_activation, const FeatureStack& grad_output,
                           ConvGrads& grads) {
  require_same_shape(pre_activation, grad_output, "conv backward");
  if (!layer.spec.activation) return conv_linear_backward(layer, input, grad_output, grads);
  FeatureStack grad_linear(grad_output);
  auto g = grad_linear.values();
  auto pre = pre_activation.values();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] *= leaky_grad(pre[k]);
  return conv_linear_backward(layer, input, grad_linear, grads);
}

void save_conv_stack(const std::filesystem::path& stem, const std::vector<Conv2d>& layers) {
  static_assert(std::endian::native == std::endian::little, "weight blob assumes little-endian host");
  std::ofstream blob(stem.string() + ".bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw Error("cannot write " + stem.string() + ".bin");
  nlohmann::json specs = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Conv2d& l : layers) {
    specs.push_back({{"in_channels", l.spec.in_channels},
                     {"out_channels", l.spec.out_channels},
                     {"kernel", l.spec.kernel},
                     {"stride", l.spec.stride},
                     {"activation", l.spec.activation},
                     {"weight_offset", offset},
                     {"weight_count", l.weight.size()},
                     {"bias_offset", offset + l.weight.size()},
                     {"bias_count", l.bias.size()}});
    blob.write(reinterpret_cast<const char*>(l.weight.data()),
               static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
    blob.write(reinterpret_cast<const char*>(l.bias.data()),
               static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    offset += l.weight.size() + l.bias.size();
  }
  nlohmann::json manifest = {{"version", kWeightFormatVersion},
                             {"dtype", "float64"},
                             {"endianness", "little"},
                             {"parameter_count", offset},
                             {"layers", specs}};
  std::ofstream meta(stem.string() + ".json", std::ios::trunc);
  if (!meta) throw Error("cannot write " + stem.string() + ".json");
  meta << manifest.dump(2) << '\n';
}

std::vector<Conv2d> load_conv_stack(const std::filesystem::path& stem) {
  std::ifstream meta(stem.string() + ".json");
  if (!meta) throw Error("cannot open " + stem.string() + ".json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(stem.string() + ".json", e.what());
  }
  if (manifest.value("version", -1) != kWeightFormatVersion) {
    throw ConfigError("version", "unsupported weight format version");
  }
  const auto count = manifest.at("parameter_count").get<std::size_t>();
  std::vector<double> values(count);
  std::ifstream blob(stem.string() + ".bin", std::ios::binary);
  blob.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!blob) throw Error("weight blob truncated: " + stem.string() + ".bin");

  std::vector<Conv2d> layers;
  for (const auto& l : manifest.at("layers")) {
    Conv2d layer(ConvSpec{l.at("in_channels").get<std::size_t>(),
                          l.at("out_channels").get<std::size_t>(), l.at("kernel").get<std::size_t>(),
                          l.at("stride").get<std::size_t>(), l.at("activation").get<bool>()});
    const auto w_off = l.at("weight_offset").get<std::size_t>();
    const auto b_off = l.at("bias_offset").get<std::size_t>();
    if (l.at("weight_count").get<std::size_t>() != layer.weight.size() ||
        l.at("bias_count").get<std::size_t>() != layer.bias.size() ||
        w_off + layer.weight.size() > count || b_off + layer.bias.size() > count) {
      throw ConfigError("layers", "inconsistent weight counts in manifest");
    }
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(w_off), layer.weight.size(),
                layer.weight.begin());
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(b_off), layer.bias.size(),
                layer.bias.begin());
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace lcvd
