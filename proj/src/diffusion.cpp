#include "lcvd/diffusion.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "lcvd/error.hpp"
#include "lcvd/rng.hpp"

namespace lcvd {

namespace {

void check_step(std::size_t t, const NoiseSchedule& schedule, const char* what) {
  if (t >= schedule.steps()) {
    throw Error(std::string(what) + ": step " + std::to_string(t) + " outside schedule of " +
                std::to_string(schedule.steps()) + " steps");
  }
}

}  // namespace

NoiseSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1 || steps > 10000) throw Error("make_schedule: steps must be in [1, 10000]");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw Error("make_schedule: require 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.betas.resize(steps);
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    s.betas[i] = beta_start + frac * (beta_end - beta_start);
    prod *= 1.0 - s.betas[i];
    s.alpha_bars[i] = prod;
  }
  return s;
}

NoiseSchedule default_schedule() {
  return make_schedule(kDefaultTrainSteps, kDefaultBetaStart, kDefaultBetaEnd);
}

nlohmann::json schedule_to_json(const NoiseSchedule& s) {
  return {{"steps", s.steps()}, {"betas", s.betas}, {"alpha_bars", s.alpha_bars}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  NoiseSchedule s;
  s.betas = j.at("betas").get<std::vector<double>>();
  double prod = 1.0;
  for (double b : s.betas) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("betas", "values must lie in (0, 1)");
    prod *= 1.0 - b;
    s.alpha_bars.push_back(prod);
  }
  if (j.contains("alpha_bars")) {
    const auto stored = j.at("alpha_bars").get<std::vector<double>>();
    if (stored.size() != s.alpha_bars.size()) throw ConfigError("alpha_bars", "length mismatch");
    for (std::size_t i = 0; i < stored.size(); ++i)
      if (std::abs(stored[i] - s.alpha_bars[i]) > 1e-12) {
        throw ConfigError("alpha_bars[" + std::to_string(i) + "]", "inconsistent with betas");
      }
  }
  return s;
}

LatentSeq forward_diffuse(const LatentSeq& z0, std::size_t t, const LatentSeq& eps,
                          const NoiseSchedule& schedule) {
  require_same_shape(z0, eps, "forward_diffuse");
  check_step(t, schedule, "forward_diffuse");
  const double a = std::sqrt(schedule.alpha_bars[t]);
  const double b = std::sqrt(1.0 - schedule.alpha_bars[t]);
  LatentSeq out(z0);
  auto o = out.values();
  auto e = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * o[i] + b * e[i];
  return out;
}

LatentSeq recover_clean(const LatentSeq& zt, std::size_t t, const LatentSeq& eps,
                        const NoiseSchedule& schedule) {
  require_same_shape(zt, eps, "recover_clean");
  check_step(t, schedule, "recover_clean");
  const double a = std::sqrt(schedule.alpha_bars[t]);
  const double b = std::sqrt(1.0 - schedule.alpha_bars[t]);
  LatentSeq out(zt);
  auto o = out.values();
  auto e = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (o[i] - b * e[i]) / a;
  return out;
}

LatentSeq mc_cfg(const LatentSeq& eps_c1, const LatentSeq& eps_c2, double omega) {
  require_same_shape(eps_c1, eps_c2, "mc_cfg");
  LatentSeq out(eps_c1);
  auto o = out.values();
  auto e2 = eps_c2.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::lerp(o[i], e2[i], omega);
  return out;
}

LatentSeq analytic_eps(const LatentSeq& z_t, std::size_t t, const GaussianOracleSpec& spec,
                       const Condition& condition, const NoiseSchedule& schedule) {
  check_step(t, schedule, "analytic_eps");
  const LatentSeq mu = spec.mu(condition);
  require_same_shape(z_t, mu, "analytic_eps");
  const double abar = schedule.alpha_bars[t];
  const double sqrt_abar = std::sqrt(abar);
  const double gain = std::sqrt(1.0 - abar) / (abar * spec.sigma0 * spec.sigma0 + 1.0 - abar);
  LatentSeq out(z_t);
  auto o = out.values();
  auto m = mu.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = gain * (o[i] - sqrt_abar * m[i]);
  return out;
}

Denoiser make_oracle_denoiser(GaussianOracleSpec spec, NoiseSchedule schedule) {
  return [spec = std::move(spec), schedule = std::move(schedule)](
             const LatentSeq& z, std::size_t t, const Condition& c) {
    return analytic_eps(z, t, spec, c, schedule);
  };
}

std::vector<std::size_t> default_step_indices(const NoiseSchedule& schedule, std::size_t count) {
  if (count < 1 || count > schedule.steps()) {
    throw Error("default_step_indices: count must be in [1, " + std::to_string(schedule.steps()) +
                "]");
  }
  const std::size_t ratio = schedule.steps() / count;
  std::vector<std::size_t> steps(count);
  for (std::size_t k = 0; k < count; ++k) steps[k] = (count - 1 - k) * ratio;
  return steps;
}

LatentSeq ddim_sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                      const DdimRequest& request, const Condition& c1, const Condition& c2) {
  const auto& steps = request.steps;
  if (steps.empty()) throw Error("ddim_sample: no step indices");
  for (std::size_t k = 0; k < steps.size(); ++k) {
    check_step(steps[k], schedule, "ddim_sample");
    if (k > 0 && !(steps[k] < steps[k - 1])) {
      throw Error("ddim_sample: step indices must be strictly decreasing (index " +
                  std::to_string(k) + ")");
    }
  }

  Rng rng(request.seed);
  LatentSeq z(Tensor4(request.shape));
  rng.fill_normal(z);

  LatentSeq clean;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::size_t t = steps[k];
    const LatentSeq eps = mc_cfg(denoiser(z, t, c1), denoiser(z, t, c2), request.omega);
    require_same_shape(z, eps, "ddim_sample: denoiser output");
    clean = recover_clean(z, t, eps, schedule);
    if (k + 1 == steps.size()) break;
    const double abar_prev = schedule.alpha_bars[steps[k + 1]];
    const double a = std::sqrt(abar_prev);
    const double b = std::sqrt(1.0 - abar_prev);
    auto zv = z.values();
    auto cv = clean.values();
    auto ev = eps.values();
    for (std::size_t i = 0; i < zv.size(); ++i) zv[i] = a * cv[i] + b * ev[i];
  }
  return clean;
}

void write_latent(const std::filesystem::path& stem, const LatentSeq& latent) {
  static_assert(std::endian::native == std::endian::little, "latent dump assumes little-endian host");
  std::vector<float> values(latent.values().begin(), latent.values().end());
  std::ofstream raw(stem.string() + ".f32", std::ios::binary | std::ios::trunc);
  if (!raw) throw Error("cannot write " + stem.string() + ".f32");
  raw.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  nlohmann::json meta = {{"frames", latent.frames()},
                         {"h", latent.height()},
                         {"w", latent.width()},
                         {"c", latent.channels()}};
  std::ofstream side(stem.string() + ".json", std::ios::trunc);
  if (!side) throw Error("cannot write " + stem.string() + ".json");
  side << meta.dump(2) << '\n';
}

LatentSeq read_latent(const std::filesystem::path& stem) {
  std::ifstream side(stem.string() + ".json");
  if (!side) throw Error("cannot open " + stem.string() + ".json");
  const auto meta = nlohmann::json::parse(side);
  LatentSeq out(meta.at("frames").get<std::size_t>(), meta.at("h").get<std::size_t>(),
                meta.at("w").get<std::size_t>(), meta.at("c").get<std::size_t>());
  std::vector<float> values(out.size());
  std::ifstream raw(stem.string() + ".f32", std::ios::binary);
  raw.read(reinterpret_cast<char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!raw) throw Error("latent payload truncated: " + stem.string() + ".f32");
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i];
  return out;
}

}  // namespace lcvd
