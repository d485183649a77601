#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lcvd/rasterizer.hpp"
#include "lcvd/tensor.hpp"

namespace lcvd {

inline constexpr std::size_t kLatentChannels = 4;
inline constexpr std::size_t kLatentDownsampling = 8;

// Stand-in for a learned VAE. Each 8x8 RGB block maps to 4 latent channels:
// 2 * mean(R, G, B) - 1 and 4 * std(luma). decode() inverts the first three
// with nearest-neighbour upsampling.
LatentSeq toy_encode(const FeatureStack& images);
FeatureStack toy_decode(const LatentSeq& latent);

// H x W x 3 frame -> 1 x 3 x H x W stack.
FeatureStack frame_to_stack(const ShadingFrame& frame);
// Appends frame `f` of `images` as interleaved 8-bit RGB.
std::vector<std::uint8_t> stack_frame_bytes(const FeatureStack& images, std::size_t f);

}  // namespace lcvd
