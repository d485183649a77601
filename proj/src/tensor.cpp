#include "lcvd/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lcvd/error.hpp"

namespace lcvd {

Tensor4::Tensor4(Shape shape, double fill)
    : shape_(shape), data_(shape[0] * shape[1] * shape[2] * shape[3], fill) {}

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Tensor4::Shape& shape) {
  return "[" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," +
         std::to_string(shape[2]) + "," + std::to_string(shape[3]) + "]";
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

FeatureStack to_channel_first(const LatentSeq& latent) {
  FeatureStack out(latent.frames(), latent.channels(), latent.height(), latent.width());
  for (std::size_t f = 0; f < latent.frames(); ++f)
    for (std::size_t y = 0; y < latent.height(); ++y)
      for (std::size_t x = 0; x < latent.width(); ++x)
        for (std::size_t c = 0; c < latent.channels(); ++c) out(f, c, y, x) = latent(f, y, x, c);
  return out;
}

LatentSeq to_channel_last(const FeatureStack& features) {
  LatentSeq out(features.frames(), features.height(), features.width(), features.channels());
  for (std::size_t f = 0; f < features.frames(); ++f)
    for (std::size_t c = 0; c < features.channels(); ++c)
      for (std::size_t y = 0; y < features.height(); ++y)
        for (std::size_t x = 0; x < features.width(); ++x) out(f, y, x, c) = features(f, c, y, x);
  return out;
}

}  // namespace lcvd
