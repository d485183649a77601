#include "lcvd/sh_shading.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/QR>

namespace lcvd {

SHCoefficients SHCoefficients::dc(double r, double g, double b) {
  SHCoefficients l;
  l.coeffs[0][0] = r;
  l.coeffs[1][0] = g;
  l.coeffs[2][0] = b;
  return l;
}

SHCoefficients SHCoefficients::gray(const ShBasis& weights) {
  SHCoefficients l;
  for (auto& channel : l.coeffs) channel = weights;
  return l;
}

SHCoefficients SHCoefficients::operator*(double s) const {
  SHCoefficients out = *this;
  for (auto& channel : out.coeffs)
    for (double& v : channel) v *= s;
  return out;
}

SHCoefficients SHCoefficients::operator+(const SHCoefficients& o) const {
  SHCoefficients out = *this;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < kShCount; ++k) out.coeffs[c][k] += o.coeffs[c][k];
  return out;
}

bool SHCoefficients::all_finite() const {
  for (const auto& channel : coeffs)
    for (double v : channel)
      if (!std::isfinite(v)) return false;
  return true;
}

double SHCoefficients::norm() const {
  double s = 0.0;
  for (const auto& channel : coeffs)
    for (double v : channel) s += v * v;
  return std::sqrt(s);
}

double relative_error(const SHCoefficients& estimate, const SHCoefficients& truth) {
  double diff = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < kShCount; ++k) {
      const double d = estimate.coeffs[c][k] - truth.coeffs[c][k];
      diff += d * d;
    }
  const double denom = truth.norm();
  return denom > 0.0 ? std::sqrt(diff) / denom : std::sqrt(diff);
}

ShBasis sh_basis(const Eigen::Vector3d& n) {
  const double len = n.norm();
  if (!(std::abs(len - 1.0) <= 1e-6)) {
    throw Error("sh_basis: normal must be unit length (|n| = " + std::to_string(len) + ")");
  }
  const double x = n.x(), y = n.y(), z = n.z();
  return {kShY00,
          kShY1 * y,
          kShY1 * z,
          kShY1 * x,
          kShY2 * x * y,
          kShY2 * y * z,
          kShY20 * (3.0 * z * z - 1.0),
          kShY2 * x * z,
          kShY22 * (x * x - y * y)};
}

Eigen::Vector3d shade_unclamped(const Eigen::Vector3d& n, const SHCoefficients& l) {
  const ShBasis b = sh_basis(n);
  Eigen::Vector3d out;
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < kShCount; ++k) acc += b[k] * l.coeffs[c][k];
    out[static_cast<Eigen::Index>(c)] = acc;
  }
  return out;
}

Eigen::Vector3d shade(const Eigen::Vector3d& n, const SHCoefficients& l) {
  return shade_unclamped(n, l).cwiseMax(0.0).cwiseMin(1.0);
}

RankDeficientError::RankDeficientError(int rank, int deficiency)
    : Error("estimate_sh: design matrix is rank deficient (rank " + std::to_string(rank) +
            " of 9, deficient subspace dimension " + std::to_string(deficiency) + ")"),
      rank_(rank),
      deficiency_(deficiency) {}

ShEstimate estimate_sh(std::span<const ShSample> samples) {
  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(kShCount));
  Eigen::MatrixXd observed(rows, 3);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const ShBasis b = sh_basis(samples[static_cast<std::size_t>(i)].normal);
    for (std::size_t k = 0; k < kShCount; ++k) design(i, static_cast<Eigen::Index>(k)) = b[k];
    observed.row(i) = samples[static_cast<std::size_t>(i)].radiance.transpose();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const int rank = rows == 0 ? 0 : static_cast<int>(qr.rank());
  if (rank < static_cast<int>(kShCount)) {
    throw RankDeficientError(rank, static_cast<int>(kShCount) - rank);
  }

  const Eigen::MatrixXd solution = qr.solve(observed);
  ShEstimate est;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < kShCount; ++k)
      est.lighting.coeffs[c][k] =
          solution(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
  const Eigen::MatrixXd residual = design * solution - observed;
  est.residual_rms = std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()));
  return est;
}

nlohmann::json sh_to_json(const SHCoefficients& l) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& channel : l.coeffs) channels.push_back(channel);
  return {{"sh", channels}};
}

SHCoefficients sh_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("sh")) throw ConfigError("sh", "missing \"sh\" block");
  const auto& channels = j.at("sh");
  if (!channels.is_array() || channels.size() != 3) {
    throw ConfigError("sh", "expected 3 channel arrays");
  }
  SHCoefficients l;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& row = channels[c];
    if (!row.is_array() || row.size() != kShCount) {
      throw ConfigError("sh[" + std::to_string(c) + "]", "expected 9 coefficients");
    }
    for (std::size_t k = 0; k < kShCount; ++k) {
      if (!row[k].is_number()) {
        throw ConfigError("sh[" + std::to_string(c) + "][" + std::to_string(k) + "]",
                          "expected a number");
      }
      l.coeffs[c][k] = row[k].get<double>();
    }
  }
  if (!l.all_finite()) throw ConfigError("sh", "coefficients must be finite");
  return l;
}

}  // namespace lcvd
