#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "diffusion_oracle.hpp"
#include "lcvd/diffusion.hpp"
#include "lcvd/error.hpp"
#include "lcvd/rng.hpp"

using namespace lcvd;

namespace {

LatentSeq random_latent(Rng& rng, std::size_t f = 2, std::size_t h = 3, std::size_t w = 3, std::size_t c = 4) {
  LatentSeq z(f, h, w, c);
  rng.fill_normal(z);
  return z;
}

GaussianOracleSpec two_means(const LatentSeq& a, const LatentSeq& b, double sigma0) {
  GaussianOracleSpec spec;
  spec.sigma0 = sigma0;
  spec.mu = [a, b](const Condition& c) { return c.name == "c1" ? a : b; };
  return spec;
}

}  // namespace

TEST(Schedule, SmallCases) {
  const auto s = make_schedule(2, 0.1, 0.1);
  EXPECT_NEAR(s.alpha_bars[0], 0.9, 1e-15);
  EXPECT_NEAR(s.alpha_bars[1], 0.81, 1e-15);
  EXPECT_EQ(make_schedule(1, 0.5, 0.5).alpha_bars, std::vector<double>{0.5});
  EXPECT_THROW(make_schedule(10, 0.1, 1.0), Error);
  EXPECT_THROW(make_schedule(10, 0.2, 0.1), Error);
  EXPECT_THROW(make_schedule(0, 0.1, 0.2), Error);
}

TEST(Schedule, DefaultMatchesExtendedPrecisionProducts) {
  const auto s = default_schedule();
  const auto ref = oracle::alpha_bars(1000, 1e-4, 0.02);
  ASSERT_EQ(s.steps(), 1000u);
  for (std::size_t t = 0; t < 1000; ++t) EXPECT_NEAR(s.alpha_bars[t], static_cast<double>(ref[t]), 1e-13);
  for (std::size_t t = 1; t < 1000; ++t) EXPECT_LT(s.alpha_bars[t], s.alpha_bars[t - 1]);
}

TEST(Schedule, JsonRoundTrip) {
  const auto s = make_schedule(50, 1e-3, 0.05);
  const auto back = schedule_from_json(schedule_to_json(s));
  EXPECT_EQ(back.betas, s.betas);
  EXPECT_EQ(back.alpha_bars, s.alpha_bars);
  auto j = schedule_to_json(s);
  j["alpha_bars"][3] = 0.5;
  EXPECT_THROW(schedule_from_json(j), Error);
}

TEST(ForwardDiffuse, ZeroSignalAndLoopOracle) {
  Rng rng(1);
  const auto s = make_schedule(2, 0.1, 0.1);
  const auto eps = random_latent(rng);
  const LatentSeq zero(Tensor4(eps.shape()));
  const auto zt = forward_diffuse(zero, 1, eps, s);
  for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_EQ(zt[i], std::sqrt(1 - s.alpha_bars[1]) * eps[i]);

  const auto z0 = random_latent(rng);
  const auto z = forward_diffuse(z0, 1, eps, s);
  for (std::size_t i = 0; i < z0.size(); ++i) EXPECT_NEAR(z[i], 0.9 * z0[i] + std::sqrt(0.19) * eps[i], 1e-12);
}

TEST(ForwardDiffuse, NearUnitAlphaBarKeepsSignal) {
  Rng rng(2);
  const auto s = make_schedule(10, 1e-12, 1e-12);
  const auto z0 = random_latent(rng), eps = random_latent(rng);
  const auto z = forward_diffuse(z0, 0, eps, s);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(z[i], z0[i], 1e-5);
}

TEST(ForwardDiffuse, RejectsMismatch) {
  Rng rng(3);
  const auto s = default_schedule();
  EXPECT_THROW(forward_diffuse(random_latent(rng), 0, random_latent(rng, 1), s), ShapeError);
  EXPECT_THROW(forward_diffuse(random_latent(rng), 1000, random_latent(rng), s), Error);
}

TEST(ForwardDiffuse, InversionRecoversAllSteps) {
  Rng rng(4);
  const auto s = default_schedule();
  const auto z0 = random_latent(rng), eps = random_latent(rng);
  for (std::size_t t = 0; t < s.steps(); ++t) {
    const auto back = recover_clean(forward_diffuse(z0, t, eps, s), t, eps, s);
    for (std::size_t i = 0; i < z0.size(); ++i) ASSERT_NEAR(back[i], z0[i], 1e-9) << "t=" << t;
  }
}

TEST(ForwardDiffuse, VariancePreserving) {
  Rng rng(5);
  const auto s = default_schedule();
  const auto z0 = random_latent(rng, 1, 50, 50, 4), eps = random_latent(rng, 1, 50, 50, 4);
  for (std::size_t t : {0u, 100u, 500u, 999u}) {
    const auto z = forward_diffuse(z0, t, eps, s);
    double m = 0, v = 0;
    for (double x : z.values()) m += x;
    m /= double(z.size());
    for (double x : z.values()) v += (x - m) * (x - m);
    v /= double(z.size());
    EXPECT_NEAR(v, 1.0, 0.05) << "t=" << t;
  }
}

TEST(McCfg, CollapseAndAffinity) {
  Rng rng(6);
  const auto a = random_latent(rng), b = random_latent(rng);
  EXPECT_EQ(mc_cfg(a, b, 0.0), a);
  EXPECT_EQ(mc_cfg(a, b, 1.0), b);
  const LatentSeq zero(Tensor4(a.shape()));
  const auto g = mc_cfg(zero, b, 4.5);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 4.5 * b[i]);
  for (double w : {0.5, 2.0, 4.5, 8.0}) {
    const auto out = mc_cfg(a, b, w);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(out[i] - a[i], w * (b[i] - a[i]), 1e-14);
  }
  EXPECT_THROW(mc_cfg(a, random_latent(rng, 1), 1.0), ShapeError);
}

TEST(AnalyticEps, DeterministicDataAndOnMean) {
  Rng rng(7);
  const auto s = default_schedule();
  const auto mu = random_latent(rng), zt = random_latent(rng);
  const auto spec = two_means(mu, mu, 0.0);
  const std::size_t t = 400;
  const double ab = s.alpha_bars[t];
  const auto e = analytic_eps(zt, t, spec, {"c1", {}}, s);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], (zt[i] - std::sqrt(ab) * mu[i]) / std::sqrt(1 - ab), 1e-12);
  LatentSeq on_mean = mu;
  for (double& v : on_mean.values()) v *= std::sqrt(ab);
  const auto out = analytic_eps(on_mean, t, spec, {"c1", {}}, s);
  for (double v : out.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(AnalyticEps, MatchesNumericalPosteriorMean) {
  // One pixel, sigma0 = 1, abar = 0.5: E[eps | z] by quadrature over z0.
  const auto s = make_schedule(1, 0.5, 0.5);
  const double mu = 0.3, z = 0.9, ab = 0.5;
  double num = 0, den = 0;
  for (int k = -40000; k <= 40000; ++k) {
    const double x0 = mu + k * 2e-4;
    const double prior = std::exp(-0.5 * (x0 - mu) * (x0 - mu));
    const double eps = (z - std::sqrt(ab) * x0) / std::sqrt(1 - ab);
    const double like = std::exp(-0.5 * eps * eps);
    num += eps * prior * like;
    den += prior * like;
  }
  LatentSeq zt(1, 1, 1, 1, z), m(1, 1, 1, 1, mu);
  GaussianOracleSpec spec{[m](const Condition&) { return m; }, 1.0};
  EXPECT_NEAR(analytic_eps(zt, 0, spec, {}, s)[0], num / den, 1e-8);
}

TEST(StepIndices, LeadingSpacing) {
  const auto s = default_schedule();
  const auto idx = default_step_indices(s);
  ASSERT_EQ(idx.size(), 25u);
  EXPECT_EQ(idx.front(), 960u);
  EXPECT_EQ(idx.back(), 0u);
  for (std::size_t k = 1; k < idx.size(); ++k) EXPECT_EQ(idx[k - 1] - idx[k], 40u);
  EXPECT_THROW(default_step_indices(s, 0), Error);
}

TEST(Ddim, DeterministicOracleCollapsesToMean) {
  Rng rng(8);
  const auto s = default_schedule();
  const auto mu = random_latent(rng);
  const Denoiser d = make_oracle_denoiser(two_means(mu, mu, 0.0), s);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    DdimRequest req{mu.shape(), default_step_indices(s), 1.0, seed};
    const auto out = ddim_sample(d, s, req, {"c1", {}}, {"c2", {}});
    for (std::size_t i = 0; i < mu.size(); ++i) ASSERT_NEAR(out[i], mu[i], 1e-6);
  }
}

TEST(Ddim, GuidedOracleFollowsLinearPushforward) {
  Rng rng(9);
  const auto s = default_schedule();
  const auto a = random_latent(rng), b = random_latent(rng);
  const Denoiser d = make_oracle_denoiser(two_means(a, b, 0.0), s);
  for (double w : {0.0, 1.0, 2.0, 4.5, 8.0}) {
    DdimRequest req{a.shape(), default_step_indices(s), w, 42};
    const auto out = ddim_sample(d, s, req, {"c1", {}}, {"c2", {}});
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(out[i], a[i] + w * (b[i] - a[i]), 1e-4);
  }
}

TEST(Ddim, MatchesScalarReferenceWithSpreadData) {
  Rng rng(10);
  const auto s = default_schedule();
  const auto a = random_latent(rng, 1, 2, 2, 2), b = random_latent(rng, 1, 2, 2, 2);
  const double sigma0 = 0.7;
  const auto spec = two_means(a, b, sigma0);
  const Denoiser d = make_oracle_denoiser(spec, s);
  const auto steps = default_step_indices(s, 10);
  DdimRequest req{a.shape(), steps, 3.0, 5};
  const auto out = ddim_sample(d, s, req, {"c1", {}}, {"c2", {}});

  Rng noise(5);
  LatentSeq z0(Tensor4(a.shape()));
  noise.fill_normal(z0);
  const auto abar = oracle::alpha_bars(1000, 1e-4, 0.02);
  auto eps = [&](const std::vector<double>& z, std::size_t t, int cond) {
    const LatentSeq& mu = cond == 1 ? a : b;
    const double ab = static_cast<double>(abar[t]);
    std::vector<double> e(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      e[i] = std::sqrt(1 - ab) * (z[i] - std::sqrt(ab) * mu[i]) / (ab * sigma0 * sigma0 + 1 - ab);
    return e;
  };
  const auto ref = oracle::ddim_reference({z0.values().begin(), z0.values().end()}, steps, abar, eps, 3.0);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-9);
}

TEST(Ddim, EqualConditionsAtUnitGuidance) {
  Rng rng(11);
  const auto s = default_schedule();
  const auto a = random_latent(rng), b = random_latent(rng);
  const Denoiser d = make_oracle_denoiser(two_means(a, b, 0.5), s);
  DdimRequest req{a.shape(), default_step_indices(s, 8), 1.0, 3};
  EXPECT_EQ(ddim_sample(d, s, req, {"c2", {}}, {"c2", {}}), ddim_sample(d, s, req, {"c1", {}}, {"c2", {}}));
}

TEST(Ddim, RejectsBadSteps) {
  const auto s = default_schedule();
  LatentSeq mu(1, 1, 1, 1);
  const Denoiser d = make_oracle_denoiser({[mu](const Condition&) { return mu; }, 0.0}, s);
  EXPECT_THROW(ddim_sample(d, s, {mu.shape(), {}, 1.0, 0}, {}, {}), Error);
  EXPECT_THROW(ddim_sample(d, s, {mu.shape(), {10, 20}, 1.0, 0}, {}, {}), Error);
  EXPECT_THROW(ddim_sample(d, s, {mu.shape(), {1000}, 1.0, 0}, {}, {}), Error);
}

TEST(LatentIo, Float32RoundTrip) {
  Rng rng(12);
  const auto z = random_latent(rng);
  const auto stem = std::filesystem::temp_directory_path() / "lcvd_latent_roundtrip";
  write_latent(stem, z);
  const auto back = read_latent(stem);
  ASSERT_EQ(back.shape(), z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(z[i])));
  EXPECT_EQ(std::filesystem::file_size(stem.string() + ".f32"), z.size() * 4);
}
