#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lcvd/rasterizer.hpp"

namespace lcvd {

// [0, 1] -> round(255 v), clamped.
std::uint8_t to_byte(double v);

std::vector<std::uint8_t> image_bytes(const ShadingFrame& frame);
std::vector<std::uint8_t> mask_bytes(const ShadingFrame& frame);  // {0, 255}

// 8-bit PNG writers; channels is 1 (gray) or 3 (RGB).
void write_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
               int channels, std::span<const std::uint8_t> pixels);

// Binary PPM (P6), used for golden comparisons.
void write_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> rgb);
std::vector<std::uint8_t> read_ppm(const std::filesystem::path& path, std::size_t& height,
                                   std::size_t& width);

// Depth as little-endian float32 `<stem>.f32` plus `<stem>.json` header
// {"height", "width", "dtype", "endianness"}.
void write_depth(const std::filesystem::path& stem, const ShadingFrame& frame);

void write_hint_frame(const std::filesystem::path& image_path,
                      const std::filesystem::path& mask_path, const ShadingFrame& frame);

}  // namespace lcvd
