#pragma once

#include <array>
#include <cstddef>
#include <span>

#include <Eigen/Core>
#include <json.hpp>

#include "lcvd/error.hpp"

namespace lcvd {

inline constexpr std::size_t kShCount = 9;

// Real SH normalization constants, second order.
//   Y00 = 0.2820948                      (1/2 sqrt(1/pi))
//   Y1m = 0.4886025 * {y, z, x}          (sqrt(3/(4 pi)))
//   Y2m = 1.0925484 * {xy, yz}, 0.3153916 * (3z^2 - 1),
//         1.0925484 * xz, 0.5462742 * (x^2 - y^2)
inline constexpr double kShY00 = 0.28209479177387814;
inline constexpr double kShY1 = 0.48860251190291992;
inline constexpr double kShY2 = 1.0925484305920792;
inline constexpr double kShY20 = 0.31539156525252005;
inline constexpr double kShY22 = 0.54627421529603959;

using ShBasis = std::array<double, kShCount>;

// Lighting as 9 SH weights per RGB channel, indexed coeffs[channel][basis].
// Band order: l=0; l=1: y, z, x; l=2: xy, yz, 3z^2-1, xz, x^2-y^2.
struct SHCoefficients {
  std::array<std::array<double, kShCount>, 3> coeffs{};

  static SHCoefficients dc(double r, double g, double b);
  static SHCoefficients gray(const ShBasis& weights);

  SHCoefficients operator*(double s) const;
  SHCoefficients operator+(const SHCoefficients& o) const;
  bool all_finite() const;
  double norm() const;

  friend bool operator==(const SHCoefficients&, const SHCoefficients&) = default;
};

double relative_error(const SHCoefficients& estimate, const SHCoefficients& truth);

// Rejects |n| further than 1e-6 from 1.
ShBasis sh_basis(const Eigen::Vector3d& n);

Eigen::Vector3d shade_unclamped(const Eigen::Vector3d& n, const SHCoefficients& l);
// Per channel dot(sh_basis(n), coeffs[channel]) clamped to [0, 1].
Eigen::Vector3d shade(const Eigen::Vector3d& n, const SHCoefficients& l);

struct ShSample {
  Eigen::Vector3d normal;
  Eigen::Vector3d radiance;
};

struct ShEstimate {
  SHCoefficients lighting;
  double residual_rms = 0.0;
};

class RankDeficientError : public Error {
 public:
  RankDeficientError(int rank, int deficiency);
  int rank() const { return rank_; }
  int deficiency() const { return deficiency_; }

 private:
  int rank_;
  int deficiency_;
};

// Least-squares SH fit. Samples must be unclamped and span all 9 basis
// functions; otherwise RankDeficientError reports the missing dimension.
ShEstimate estimate_sh(std::span<const ShSample> samples);

nlohmann::json sh_to_json(const SHCoefficients& l);
SHCoefficients sh_from_json(const nlohmann::json& j);

}  // namespace lcvd
