#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcvd/tensor.hpp"

namespace lcvd {

struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> alpha_bars;  // alpha_bars[t] = prod_{i <= t} (1 - betas[i])

  std::size_t steps() const { return betas.size(); }
};

inline constexpr std::size_t kDefaultTrainSteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;
inline constexpr std::size_t kDefaultSamplingSteps = 25;
inline constexpr double kDefaultGuidance = 4.5;

// Linearly spaced betas in [beta_start, beta_end].
NoiseSchedule make_schedule(std::size_t steps, double beta_start, double beta_end);
NoiseSchedule default_schedule();

nlohmann::json schedule_to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
LatentSeq forward_diffuse(const LatentSeq& z0, std::size_t t, const LatentSeq& eps,
                          const NoiseSchedule& schedule);

// Closed-form inverse of forward_diffuse given the noise.
LatentSeq recover_clean(const LatentSeq& zt, std::size_t t, const LatentSeq& eps,
                        const NoiseSchedule& schedule);

// Multi-condition guidance: eps_c1 + omega * (eps_c2 - eps_c1), evaluated with
// std::lerp so omega = 0 and omega = 1 return the inputs bit for bit.
LatentSeq mc_cfg(const LatentSeq& eps_c1, const LatentSeq& eps_c2, double omega);

// A condition set as seen by the denoiser: the fused adapter guidance added
// after its first layer. An empty guidance tensor is the unconditional branch.
struct Condition {
  std::string name;
  FeatureStack guidance;
};

using Denoiser =
    std::function<LatentSeq(const LatentSeq& z_t, std::size_t t, const Condition& condition)>;

// Data distribution N(mu(c), sigma0^2 I); its MMSE noise predictor is closed
// form and stands in for a learned network.
struct GaussianOracleSpec {
  std::function<LatentSeq(const Condition&)> mu;
  double sigma0 = 0.0;
};

// eps*(z_t) = sqrt(1 - abar) (z_t - sqrt(abar) mu) / (abar sigma0^2 + 1 - abar)
LatentSeq analytic_eps(const LatentSeq& z_t, std::size_t t, const GaussianOracleSpec& spec,
                       const Condition& condition, const NoiseSchedule& schedule);

Denoiser make_oracle_denoiser(GaussianOracleSpec spec, NoiseSchedule schedule);

// Evenly spaced descending indices k * (T / count), k = count-1 .. 0.
std::vector<std::size_t> default_step_indices(const NoiseSchedule& schedule,
                                              std::size_t count = kDefaultSamplingSteps);

struct DdimRequest {
  Tensor4::Shape shape;  // frames, h, w, c
  std::vector<std::size_t> steps;
  double omega = kDefaultGuidance;
  std::uint64_t seed = 0;
};

// Deterministic (eta = 0) DDIM. Initial noise is drawn once from `seed`; every
// step guides with mc_cfg(denoiser(z, c1), denoiser(z, c2), omega) and the
// clean-latent prediction of the last step is returned.
LatentSeq ddim_sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                      const DdimRequest& request, const Condition& c1, const Condition& c2);

// Raw little-endian float32 `<stem>.f32` plus `<stem>.json` {frames, h, w, c}.
void write_latent(const std::filesystem::path& stem, const LatentSeq& latent);
LatentSeq read_latent(const std::filesystem::path& stem);

}  // namespace lcvd
