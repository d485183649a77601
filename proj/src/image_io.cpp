#include "lcvd/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "lcvd/error.hpp"

namespace lcvd {

namespace {

std::ofstream open_binary(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::vector<std::uint8_t> image_bytes(const ShadingFrame& frame) {
  std::vector<std::uint8_t> out(frame.image.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(frame.image[i]);
  return out;
}

std::vector<std::uint8_t> mask_bytes(const ShadingFrame& frame) {
  std::vector<std::uint8_t> out(frame.mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = frame.mask[i] ? 255 : 0;
  return out;
}

void write_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
               int channels, std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) throw Error("write_png: channels must be 1 or 3");
  if (pixels.size() != height * width * static_cast<std::size_t>(channels)) {
    throw ShapeError("write_png: pixel buffer size mismatch for " + path.string());
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error("write_png: " + path.string() + ": " + msg);
  }
}

void write_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> rgb) {
  if (rgb.size() != height * width * 3) throw ShapeError("write_ppm: buffer size mismatch");
  auto out = open_binary(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

std::vector<std::uint8_t> read_ppm(const std::filesystem::path& path, std::size_t& height,
                                   std::size_t& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  in.get();
  if (magic != "P6" || maxval != 255) throw Error("read_ppm: unsupported format in " + path.string());
  std::vector<std::uint8_t> data(height * width * 3);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!in) throw Error("read_ppm: truncated file " + path.string());
  return data;
}

void write_depth(const std::filesystem::path& stem, const ShadingFrame& frame) {
  static_assert(std::endian::native == std::endian::little, "depth dump assumes little-endian host");
  std::vector<float> values(frame.depth.begin(), frame.depth.end());
  auto raw = open_binary(stem.string() + ".f32");
  raw.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  nlohmann::json header = {{"height", frame.height},
                           {"width", frame.width},
                           {"dtype", "float32"},
                           {"endianness", "little"}};
  auto meta = open_binary(stem.string() + ".json");
  meta << header.dump(2) << '\n';
}

void write_hint_frame(const std::filesystem::path& image_path,
                      const std::filesystem::path& mask_path, const ShadingFrame& frame) {
  write_png(image_path, frame.height, frame.width, 3, image_bytes(frame));
  write_png(mask_path, frame.height, frame.width, 1, mask_bytes(frame));
}

}  // namespace lcvd
