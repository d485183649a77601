#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lcvd {

// Dense rank-4 array of doubles, row-major. Layout meaning is carried by the
// strong wrappers below, not by Tensor4 itself.
class Tensor4 {
 public:
  using Shape = std::array<std::size_t, 4>;

  Tensor4() = default;
  explicit Tensor4(Shape shape, double fill = 0.0);

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return ((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }
  double& operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[offset(a, b, c, d)];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[offset(a, b, c, d)];
  }

  bool same_shape(const Tensor4& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const Tensor4& a, const Tensor4& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

std::string shape_string(const Tensor4::Shape& shape);

// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what);

// Latent video: frames x h x w x c (channel-last).
struct LatentSeq : Tensor4 {
  LatentSeq() = default;
  LatentSeq(std::size_t frames, std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : Tensor4({frames, h, w, c}, fill) {}
  explicit LatentSeq(Tensor4 t) : Tensor4(std::move(t)) {}

  std::size_t frames() const { return dim(0); }
  std::size_t height() const { return dim(1); }
  std::size_t width() const { return dim(2); }
  std::size_t channels() const { return dim(3); }
};

// Image or feature stack: frames x channels x h x w (channel-first). Used for
// shading-hint stacks, reference stacks and adapter outputs.
struct FeatureStack : Tensor4 {
  FeatureStack() = default;
  FeatureStack(std::size_t frames, std::size_t channels, std::size_t h, std::size_t w,
               double fill = 0.0)
      : Tensor4({frames, channels, h, w}, fill) {}
  explicit FeatureStack(Tensor4 t) : Tensor4(std::move(t)) {}

  std::size_t frames() const { return dim(0); }
  std::size_t channels() const { return dim(1); }
  std::size_t height() const { return dim(2); }
  std::size_t width() const { return dim(3); }
};

using AdapterFeatures = FeatureStack;

// Channel-last latent <-> channel-first feature layout conversions.
FeatureStack to_channel_first(const LatentSeq& latent);
LatentSeq to_channel_last(const FeatureStack& features);

}  // namespace lcvd
