#include <gtest/gtest.h>

#include <cmath>

#include "conv_oracle.hpp"
#include "gradcheck.hpp"
#include "lcvd/error.hpp"
#include "lcvd/training.hpp"

using namespace lcvd;

namespace {

LatentSeq random_latent(Rng& rng, std::size_t f, std::size_t h, std::size_t w, std::size_t c) {
  LatentSeq z(f, h, w, c);
  rng.fill_normal(z);
  return z;
}

MaskSeq random_mask(Rng& rng, std::size_t f, std::size_t h, std::size_t w) {
  MaskSeq m(f, h, w);
  for (double& v : m.values()) v = rng.uniform(0, 1) < 0.4 ? 1.0 : 0.0;
  return m;
}

SynthConfig small_synth() {
  SynthConfig c;
  c.image_size = 16;
  c.frames = 2;
  return c;
}

}  // namespace

TEST(Losses, MatchLoopOracles) {
  Rng rng(1);
  const auto e = random_latent(rng, 2, 3, 3, 4), p = random_latent(rng, 2, 3, 3, 4);
  const auto m = random_mask(rng, 2, 3, 3);
  double ldm = 0, masked = 0;
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t c = 0; c < 4; ++c) {
          const double r = e(f, y, x, c) - p(f, y, x, c);
          ldm += r * r;
          masked += (1 - m(f, y, x, 0)) * r * (1 - m(f, y, x, 0)) * r;
        }
  ldm /= double(e.size());
  masked /= double(e.size());
  EXPECT_NEAR(ldm_loss(e, p), ldm, 1e-14);
  EXPECT_NEAR(masked_loss(e, p, m), masked, 1e-14);
  EXPECT_NEAR(total_loss(e, p, m), ldm + masked, 1e-14);
  EXPECT_EQ(ldm_loss(e, e), 0.0);
}

TEST(Losses, MaskedResidualsExcluded) {
  Rng rng(2);
  const auto e = random_latent(rng, 3, 4, 4, 4), p = random_latent(rng, 3, 4, 4, 4);
  const auto m = random_mask(rng, 3, 4, 4);
  const double base = masked_loss(e, p, m);
  for (int trial = 0; trial < 5; ++trial) {
    LatentSeq q = p;
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
          if (m(f, y, x, 0) == 1.0)
            for (std::size_t c = 0; c < 4; ++c) q(f, y, x, c) += rng.normal() * 1e3;
    EXPECT_LE(std::abs(masked_loss(e, q, m) - base), 1e-12);
  }
  EXPECT_EQ(masked_loss(e, p, MaskSeq(3, 4, 4, 1.0)), 0.0);
  EXPECT_EQ(masked_loss(e, p, MaskSeq(3, 4, 4, 0.0)), ldm_loss(e, p));
}

TEST(Losses, RejectBadMasks) {
  Rng rng(3);
  const auto e = random_latent(rng, 1, 2, 2, 4), p = random_latent(rng, 1, 2, 2, 4);
  EXPECT_THROW(masked_loss(e, p, MaskSeq(1, 2, 2, 0.5)), Error);
  EXPECT_THROW(masked_loss(e, p, MaskSeq(2, 2, 2)), ShapeError);
  EXPECT_THROW(ldm_loss(e, random_latent(rng, 1, 2, 2, 3)), ShapeError);
}

TEST(Losses, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const auto e = random_latent(rng, 2, 2, 2, 4);
  auto p = random_latent(rng, 2, 2, 2, 4);
  const auto m = random_mask(rng, 2, 2, 2);
  const auto g = total_loss_grad(e, p, m);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + 1e-4;
    const double up = total_loss(e, p, m);
    p[i] = saved - 1e-4;
    const double down = total_loss(e, p, m);
    p[i] = saved;
    EXPECT_NEAR((up - down) / 2e-4, g[i], 1e-9);
  }
}

TEST(ToyDenoiserGrad, LayersAndGuidanceMatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    ToyDenoiser net = ToyDenoiser::create({4, 6, 8}, rng);
    for (auto& l : net.layers())
      for (double& b : l.bias) b = rng.uniform(-0.1, 0.1);
    const auto z = random_latent(rng, 2, 3, 3, 4), ref = random_latent(rng, 2, 3, 3, 4);
    FeatureStack guidance(2, 6, 3, 3);
    rng.fill_normal(guidance);
    const auto up = random_latent(rng, 2, 3, 3, 4);
    ToyDenoiser::Trace trace;
    net.forward(z, 0.4, ref, guidance, &trace);
    const auto g = net.backward(trace, up, true);
    auto f = [&]() {
      ToyDenoiser::Trace t;
      const auto out = net.forward(z, 0.4, ref, guidance, &t);
      oracle::Eval e{0.0, {}};
      for (std::size_t i = 0; i < out.size(); ++i) e.value += up[i] * out[i];
      // The first layer's rectifier is applied after the guidance is added,
      // so every layer but the output one has a kink.
      for (std::size_t l = 0; l + 1 < ToyDenoiser::kLayers; ++l) testing_support::append_signs(e.signs, t.pre[l]);
      return e;
    };
    for (std::size_t l = 0; l < ToyDenoiser::kLayers; ++l)
      EXPECT_LT(testing_support::layer_rel_error(net.layers()[l], g.layers[l], f), 1e-4)
          << "seed " << seed << " layer " << l;
    std::vector<double> fd, an;
    for (std::size_t i = 0; i < guidance.size(); ++i) {
      fd.push_back(oracle::central_difference(guidance[i], f));
      an.push_back(g.guidance[i]);
    }
    EXPECT_LT(oracle::max_norm_rel_error(fd, an), 1e-4) << "seed " << seed;
  }
}

TEST(ToyDenoiser, NoGuidanceEqualsZeroGuidance) {
  Rng rng(5);
  const ToyDenoiser net = ToyDenoiser::create({4, 6, 8}, rng);
  const auto z = random_latent(rng, 2, 2, 2, 4), ref = random_latent(rng, 2, 2, 2, 4);
  EXPECT_EQ(net.forward(z, 0.3, ref, {}), net.forward(z, 0.3, ref, FeatureStack(2, 6, 2, 2)));
  EXPECT_THROW(net.forward(z, 0.3, ref, FeatureStack(2, 5, 2, 2)), ShapeError);
}

TEST(BatchLoss, GradientSpotChecks) {
  const TrainBatch data = synth_dataset(11, 2, small_synth());
  ToyModel model = make_toy_model({}, 12);
  const NoiseSchedule schedule = default_schedule();
  TrainOptions options;
  options.forced_fusion = FusionCoefficients(1, 1);
  Rng rng(13);
  const auto draws = draw_step(data, schedule, options, rng);
  ModelGrads grads(model);
  batch_loss(model, data, draws, schedule, options.polarity, &grads);

  auto loss = [&]() { return batch_loss(model, data, draws, schedule, options.polarity, nullptr); };
  auto check = [&](std::vector<Conv2d>& layers, const std::vector<ConvGrads>& g, const char* name) {
    Rng pick(17);
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (int k = 0; k < 5; ++k) {
        const std::size_t i = static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(layers[l].weight.size()) - 1));
        double& w = layers[l].weight[i];
        const double saved = w;
        w = saved + 1e-6;
        const double up = loss();
        w = saved - 1e-6;
        const double down = loss();
        w = saved;
        const double fd = (up - down) / 2e-6;
        EXPECT_NEAR(fd, g[l].weight[i], 1e-6 + 1e-4 * std::abs(fd)) << name << " layer " << l;
      }
  };
  check(model.shading.layers(), grads.shading, "shading");
  check(model.reference.layers(), grads.reference, "reference");
  check(model.denoiser.layers(), grads.denoiser, "denoiser");
}

TEST(TrainStep, ZeroLearningRateIsNoOp) {
  const TrainBatch data = synth_dataset(21, 2, small_synth());
  ToyModel model = make_toy_model({}, 22);
  const ToyModel before = model;
  TrainOptions options;
  options.learning_rate = 0.0;
  Rng rng(23);
  const double loss = train_step(model, data, default_schedule(), options, rng);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_EQ(model, before);
}

TEST(TrainStep, UnconditionedStepLeavesAdaptersUntouched) {
  const TrainBatch data = synth_dataset(31, 2, small_synth());
  ToyModel model = make_toy_model({}, 32);
  const ToyModel before = model;
  TrainOptions options;
  options.forced_fusion = FusionCoefficients(0, 0);
  Rng rng(33);
  train_step(model, data, default_schedule(), options, rng);
  EXPECT_EQ(model.shading, before.shading);
  EXPECT_EQ(model.reference, before.reference);
  EXPECT_NE(model.denoiser, before.denoiser);
}

TEST(TrainStep, DivergenceIsReported) {
  TrainBatch data = synth_dataset(41, 1, small_synth());
  data.samples[0].video_latent[0] = NAN;
  ToyModel model = make_toy_model({}, 42);
  Rng rng(43);
  EXPECT_THROW(train_step(model, data, default_schedule(), {}, rng), TrainingDiverged);
}

TEST(DrawStep, FusionFrequenciesFollowWeights) {
  const TrainBatch data = synth_dataset(51, 1, small_synth());
  TrainOptions options;
  options.fusion_weights = {0.1, 0.2, 0.3, 0.4};
  Rng rng(52);
  std::array<int, 4> counts{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto d = draw_step(data, default_schedule(), options, rng)[0];
    ++counts[static_cast<std::size_t>(d.fusion.alpha * 2 + d.fusion.beta)];
    ASSERT_LT(d.t, 1000u);
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(counts[k] / double(n), options.fusion_weights[k], 0.015);
}

TEST(ToyRun, DeterministicPerSeed) {
  ToyRunConfig cfg;
  cfg.steps = 6;
  cfg.dataset_size = 3;
  cfg.synth = small_synth();
  const auto a = run_toy_training(cfg, 5), b = run_toy_training(cfg, 5), c = run_toy_training(cfg, 6);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.model, b.model);
  EXPECT_NE(a.losses, c.losses);
}

TEST(ToyRun, UnconditionedRunIgnoresConditions) {
  ToyRunConfig cfg;
  cfg.steps = 6;
  cfg.dataset_size = 2;
  cfg.synth = small_synth();
  cfg.options.forced_fusion = FusionCoefficients(0, 0);
  const TrainBatch data = toy_run_dataset(cfg, 9);
  TrainBatch scrambled = data;
  Rng rng(10);
  for (auto& s : scrambled.samples) {
    rng.fill_normal(s.hints);
    rng.fill_normal(s.reference);
  }
  const auto a = run_toy_training(cfg, 9, data), b = run_toy_training(cfg, 9, scrambled);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.model, b.model);
}

TEST(Synth, ShapesAndMaskConsistency) {
  const SyntheticVideoStream stream(61, small_synth());
  const auto d = stream.render(0);
  EXPECT_EQ(d.sample.video_latent.shape(), (Tensor4::Shape{2, 2, 2, 4}));
  EXPECT_EQ(d.sample.hints.shape(), (Tensor4::Shape{2, 3, 16, 16}));
  EXPECT_EQ(d.sample.reference.shape(), (Tensor4::Shape{1, 3, 16, 16}));
  EXPECT_TRUE(d.sample.masks.is_binary());
  for (std::size_t f = 0; f < 2; ++f) {
    const auto m = downsample_mask(d.hint_frames[f], 8);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(d.sample.masks[f * m.size() + i], m[i]);
  }
  EXPECT_EQ(stream.sample(0).video_latent, SyntheticVideoStream(61, small_synth()).sample(0).video_latent);
  EXPECT_THROW(SyntheticVideoStream(1, SynthConfig{20, 2, {}}), Error);
}

TEST(Synth, LightingRecoverableFromHints) {
  const SyntheticVideoStream stream(71, SynthConfig{});
  for (std::size_t index = 0; index < 3; ++index) {
    const auto d = stream.render(index);
    for (std::size_t f = 0; f < d.hint_frames.size(); ++f) {
      const ShadingFrame& h = d.hint_frames[f];
      std::vector<ShSample> samples;
      for (std::size_t i = 0; i < h.height * h.width; ++i) {
        if (!h.mask[i]) continue;
        const Eigen::Vector3d rad(h.image[3 * i], h.image[3 * i + 1], h.image[3 * i + 2]);
        if (rad.minCoeff() <= 1e-9 || rad.maxCoeff() >= 1 - 1e-9) continue;
        samples.push_back({h.normal(i / h.width, i % h.width), rad});
      }
      const auto est = estimate_sh(samples);
      EXPECT_LT(relative_error(est.lighting, d.lighting[f]), 5e-2) << index << "/" << f;
    }
  }
}
