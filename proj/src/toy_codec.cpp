#include "lcvd/toy_codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lcvd/error.hpp"
#include "lcvd/image_io.hpp"

namespace lcvd {

LatentSeq toy_encode(const FeatureStack& images) {
  if (images.channels() != 3) throw ShapeError("toy_encode: expected RGB stack");
  const std::size_t k = kLatentDownsampling;
  if (images.height() % k != 0 || images.width() % k != 0) {
    throw ShapeError("toy_encode: image size must be divisible by 8");
  }
  const std::size_t h = images.height() / k;
  const std::size_t w = images.width() / k;
  LatentSeq out(images.frames(), h, w, kLatentChannels);
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t f = 0; f < images.frames(); ++f)
    for (std::size_t by = 0; by < h; ++by)
      for (std::size_t bx = 0; bx < w; ++bx) {
        double sum[3] = {0, 0, 0};
        double luma_sum = 0.0, luma_sq = 0.0;
        for (std::size_t y = by * k; y < (by + 1) * k; ++y)
          for (std::size_t x = bx * k; x < (bx + 1) * k; ++x) {
            const double r = images(f, 0, y, x), g = images(f, 1, y, x), b = images(f, 2, y, x);
            sum[0] += r;
            sum[1] += g;
            sum[2] += b;
            const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
            luma_sum += luma;
            luma_sq += luma * luma;
          }
        for (std::size_t c = 0; c < 3; ++c) out(f, by, bx, c) = 2.0 * sum[c] * inv - 1.0;
        const double mean = luma_sum * inv;
        out(f, by, bx, 3) = 4.0 * std::sqrt(std::max(0.0, luma_sq * inv - mean * mean));
      }
  return out;
}

FeatureStack toy_decode(const LatentSeq& latent) {
  if (latent.channels() < 3) throw ShapeError("toy_decode: need at least 3 latent channels");
  const std::size_t k = kLatentDownsampling;
  FeatureStack out(latent.frames(), 3, latent.height() * k, latent.width() * k);
  for (std::size_t f = 0; f < latent.frames(); ++f)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x)
          out(f, c, y, x) = std::clamp((latent(f, y / k, x / k, c) + 1.0) / 2.0, 0.0, 1.0);
  return out;
}

FeatureStack frame_to_stack(const ShadingFrame& frame) {
  FeatureStack out(1, 3, frame.height, frame.width);
  for (std::size_t y = 0; y < frame.height; ++y)
    for (std::size_t x = 0; x < frame.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out(0, c, y, x) = frame.image[3 * frame.index(y, x) + c];
  return out;
}

std::vector<std::uint8_t> stack_frame_bytes(const FeatureStack& images, std::size_t f) {
  if (images.channels() != 3 || f >= images.frames()) {
    throw ShapeError("stack_frame_bytes: expected an RGB stack containing frame " + std::to_string(f));
  }
  std::vector<std::uint8_t> out(images.height() * images.width() * 3);
  for (std::size_t y = 0; y < images.height(); ++y)
    for (std::size_t x = 0; x < images.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out[(y * images.width() + x) * 3 + c] = to_byte(images(f, c, y, x));
  return out;
}

}  // namespace lcvd
