#include "lcvd/training.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <random>
#include <string>

#include "lcvd/error.hpp"
#include "lcvd/toy_codec.hpp"

namespace lcvd {

namespace {

void check_mask(const LatentSeq& eps, const MaskSeq& mask) {
  if (mask.frames() != eps.frames() || mask.height() != eps.height() ||
      mask.width() != eps.width()) {
    throw ShapeError("masked_loss: mask " + shape_string(mask.shape()) +
                     " not broadcastable to latent " + shape_string(eps.shape()));
  }
  if (!mask.is_binary()) throw Error("masked_loss: mask must be binary");
}

}  // namespace

double ldm_loss(const LatentSeq& eps, const LatentSeq& pred) {
  require_same_shape(eps, pred, "ldm_loss");
  auto e = eps.values();
  auto p = pred.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double r = e[i] - p[i];
    sum += r * r;
  }
  return e.empty() ? 0.0 : sum / static_cast<double>(e.size());
}

double masked_loss(const LatentSeq& eps, const LatentSeq& pred, const MaskSeq& mask) {
  require_same_shape(eps, pred, "masked_loss");
  check_mask(eps, mask);
  const std::size_t c = eps.channels();
  auto e = eps.values();
  auto p = pred.values();
  auto m = mask.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double r = (1.0 - m[i / c]) * (e[i] - p[i]);
    sum += r * r;
  }
  return e.empty() ? 0.0 : sum / static_cast<double>(e.size());
}

double total_loss(const LatentSeq& eps, const LatentSeq& pred, const MaskSeq& mask) {
  return masked_loss(eps, pred, mask) + ldm_loss(eps, pred);
}

LatentSeq total_loss_grad(const LatentSeq& eps, const LatentSeq& pred, const MaskSeq& mask) {
  require_same_shape(eps, pred, "total_loss_grad");
  check_mask(eps, mask);
  const std::size_t c = eps.channels();
  LatentSeq grad(Tensor4(eps.shape()));
  auto g = grad.values();
  auto e = eps.values();
  auto p = pred.values();
  auto m = mask.values();
  const double scale = 2.0 / static_cast<double>(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double keep = 1.0 - m[i / c];
    g[i] = -scale * (e[i] - p[i]) * (1.0 + keep * keep);
  }
  return grad;
}

ToyModel make_toy_model(const ToyModelConfig& config, std::uint64_t seed) {
  if (config.adapter.out_channels != config.denoiser.feature_channels) {
    throw Error("toy model: adapter output channels must equal denoiser feature channels");
  }
  Rng rng(seed);
  ToyModel model;
  model.shading = AdapterNet::create(config.adapter, rng);
  model.reference = AdapterNet::create(config.adapter, rng);
  model.denoiser = ToyDenoiser::create(config.denoiser, rng);
  return model;
}

ModelGrads::ModelGrads(const ToyModel& model) {
  for (const Conv2d& l : model.shading.layers()) shading.emplace_back(l);
  for (const Conv2d& l : model.reference.layers()) reference.emplace_back(l);
  for (const Conv2d& l : model.denoiser.layers()) denoiser.emplace_back(l);
}

std::vector<StepDraws> draw_step(const TrainBatch& batch, const NoiseSchedule& schedule,
                                 const TrainOptions& options, Rng& rng) {
  std::discrete_distribution<int> pick(options.fusion_weights.begin(), options.fusion_weights.end());
  std::vector<StepDraws> draws;
  draws.reserve(batch.samples.size());
  for (const TrainSample& s : batch.samples) {
    StepDraws d;
    d.t = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(schedule.steps()) - 1));
    d.eps = LatentSeq(Tensor4(s.video_latent.shape()));
    rng.fill_normal(d.eps);
    const int combo = pick(rng.engine());
    d.fusion = options.forced_fusion ? *options.forced_fusion
                                     : FusionCoefficients(combo >> 1, combo & 1);
    draws.push_back(std::move(d));
  }
  return draws;
}

namespace {

void accumulate(std::vector<ConvGrads>& into, const std::vector<ConvGrads>& from) {
  for (std::size_t l = 0; l < into.size(); ++l) {
    for (std::size_t i = 0; i < into[l].weight.size(); ++i) into[l].weight[i] += from[l].weight[i];
    for (std::size_t i = 0; i < into[l].bias.size(); ++i) into[l].bias[i] += from[l].bias[i];
  }
}

void validate_sample(const TrainSample& s, std::size_t index) {
  const std::string where = "train batch sample " + std::to_string(index);
  const std::size_t frames = s.video_latent.frames();
  if (s.hints.frames() != frames || s.masks.frames() != frames) {
    throw ShapeError(where + ": hints, masks and latents disagree on frame count");
  }
  if (s.reference.frames() != 1) throw ShapeError(where + ": expected one reference frame");
  if (!s.masks.is_binary()) throw Error(where + ": masks must be binary");
}

}  // namespace

double batch_loss(const ToyModel& model, const TrainBatch& batch,
                  const std::vector<StepDraws>& draws, const NoiseSchedule& schedule,
                  MaskPolarity polarity, ModelGrads* grads) {
  if (batch.samples.empty()) throw Error("train: empty batch");
  if (draws.size() != batch.samples.size()) throw Error("train: draws do not match batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.samples.size());
  double loss = 0.0;

  for (std::size_t b = 0; b < batch.samples.size(); ++b) {
    const TrainSample& s = batch.samples[b];
    const StepDraws& d = draws[b];
    validate_sample(s, b);
    const std::size_t frames = s.video_latent.frames();
    const MaskSeq mask = apply_polarity(s.masks, polarity);

    const LatentSeq z_t = forward_diffuse(s.video_latent, d.t, d.eps, schedule);

    // The reference latent path uses the first video frame, masked.
    LatentSeq first(1, s.video_latent.height(), s.video_latent.width(), s.video_latent.channels());
    std::copy_n(s.video_latent.values().begin(), first.size(), first.values().begin());
    MaskSeq first_mask(1, mask.height(), mask.width());
    std::copy_n(mask.values().begin(), first_mask.size(), first_mask.values().begin());
    const LatentSeq ref_cond = prepare_reference_latent(first, first_mask, frames);

    std::optional<AdapterTrace> shading_trace;
    std::optional<AdapterTrace> reference_trace;
    if (d.fusion.alpha) shading_trace = adapter_forward_traced(model.shading, s.hints);
    if (d.fusion.beta) {
      reference_trace = adapter_forward_traced(model.reference, replicate_frames(s.reference, frames));
    }
    const AdapterFeatures guidance =
        fuse(shading_trace ? &shading_trace->output : nullptr,
             reference_trace ? &reference_trace->output : nullptr, d.fusion);

    ToyDenoiser::Trace trace;
    const LatentSeq pred =
        model.denoiser.forward(z_t, schedule.alpha_bars[d.t], ref_cond, guidance, &trace);
    loss += total_loss(d.eps, pred, mask) * inv_batch;

    if (grads) {
      LatentSeq g = total_loss_grad(d.eps, pred, mask);
      for (double& v : g.values()) v *= inv_batch;
      const auto dg = model.denoiser.backward(trace, g, !guidance.empty());
      accumulate(grads->denoiser, {dg.layers.begin(), dg.layers.end()});
      if (shading_trace) {
        accumulate(grads->shading, adapter_backward(model.shading, *shading_trace, dg.guidance).layers);
      }
      if (reference_trace) {
        accumulate(grads->reference,
                   adapter_backward(model.reference, *reference_trace, dg.guidance).layers);
      }
    }
  }
  return loss;
}

namespace {

void sgd(std::vector<Conv2d>& layers, const std::vector<ConvGrads>& grads, double lr) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].weight.size(); ++i) layers[l].weight[i] -= lr * grads[l].weight[i];
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= lr * grads[l].bias[i];
  }
}

}  // namespace

double train_step(ToyModel& model, const TrainBatch& batch, const NoiseSchedule& schedule,
                  const TrainOptions& options, Rng& rng) {
  const std::vector<StepDraws> draws = draw_step(batch, schedule, options, rng);
  ModelGrads grads(model);
  const double loss = batch_loss(model, batch, draws, schedule, options.polarity, &grads);
  if (!std::isfinite(loss)) {
    std::string detail;
    for (const StepDraws& d : draws) {
      detail += " (t=" + std::to_string(d.t) + ", alpha=" + std::to_string(d.fusion.alpha) +
                ", beta=" + std::to_string(d.fusion.beta) + ")";
    }
    throw TrainingDiverged("train_step: loss is not finite; draws:" + detail +
                           "; lower the learning rate");
  }
  sgd(model.shading.layers(), grads.shading, options.learning_rate);
  sgd(model.reference.layers(), grads.reference, options.learning_rate);
  sgd(model.denoiser.layers(), grads.denoiser, options.learning_rate);
  return loss;
}

SyntheticVideoStream::SyntheticVideoStream(std::uint64_t seed, SynthConfig config)
    : seed_(seed), config_(config), model_(build_model(config.face)) {
  if (config_.image_size > 64 || config_.image_size % kLatentDownsampling != 0 ||
      config_.image_size < 16) {
    throw Error("synthetic stream: image size must be a multiple of 8 in [16, 64]");
  }
  if (config_.frames < 1) throw Error("synthetic stream: need at least one frame");
}

SyntheticVideoStream::Detail SyntheticVideoStream::render(std::size_t index) const {
  Rng rng(derive_seed(seed_, index));
  const Resolution res{config_.image_size, config_.image_size};
  const Camera camera = default_camera(res);
  const std::size_t frames = config_.frames;
  const double two_pi = 2.0 * std::numbers::pi;

  Eigen::VectorXd shape(static_cast<Eigen::Index>(model_.shape_dims()));
  for (auto& v : shape) v = rng.uniform(-1.0, 1.0);
  const Vec3 base_color(rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0));
  const double pattern_freq = rng.uniform(2.0, 5.0);
  const double pattern_phase = rng.uniform(0.0, two_pi);
  const Vec3 background(rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3));
  const double yaw_amp = rng.uniform(0.1, 0.5);
  const double pitch_amp = rng.uniform(0.0, 0.2);
  const double motion_phase = rng.uniform(0.0, two_pi);
  const double light_angle = rng.uniform(0.0, two_pi);
  const double light_speed = rng.uniform(-0.6, 0.6);
  const double light_strength = rng.uniform(0.2, 0.5);
  Vec3 dc(rng.uniform(1.5, 1.9), rng.uniform(1.5, 1.9), rng.uniform(1.5, 1.9));
  ShBasis band2{};
  for (std::size_t k = 4; k < kShCount; ++k) band2[k] = rng.uniform(-0.1, 0.1);

  std::vector<Vec3> albedo(model_.vertex_count());
  for (std::size_t i = 0; i < albedo.size(); ++i) {
    const Vec3& v = model_.template_vertices()[i];
    const double stripe = 0.8 + 0.2 * std::sin(pattern_freq * v.x() + pattern_phase) *
                                    std::cos(pattern_freq * v.y());
    albedo[i] = base_color * stripe;
  }

  Detail out;
  out.sample.video_latent = LatentSeq(frames, res.height / 8, res.width / 8, kLatentChannels);
  out.sample.hints = FeatureStack(frames, 3, res.height, res.width);
  out.sample.masks = MaskSeq(frames, res.height / 8, res.width / 8);
  FeatureStack video(frames, 3, res.height, res.width);

  for (std::size_t f = 0; f < frames; ++f) {
    const double phase = motion_phase + two_pi * static_cast<double>(f) / static_cast<double>(frames);
    PoseParams pose;
    pose.rotation = {pitch_amp * std::sin(phase), yaw_amp * std::sin(phase), 0.0};
    pose.translation = {0.05 * std::cos(phase), 0.05 * std::sin(phase), 0.0};
    Eigen::VectorXd expr(static_cast<Eigen::Index>(model_.expr_dims()));
    for (Eigen::Index k = 0; k < expr.size(); ++k) expr[k] = std::sin(phase + static_cast<double>(k));
    const Mesh mesh = forward(model_, shape, pose, expr);

    const double angle = light_angle + light_speed * static_cast<double>(f);
    SHCoefficients light;
    for (std::size_t c = 0; c < 3; ++c) {
      light.coeffs[c] = band2;
      light.coeffs[c][0] = dc[static_cast<Eigen::Index>(c)];
      light.coeffs[c][1] = light_strength * 0.3;               // y
      light.coeffs[c][2] = light_strength * std::cos(angle);   // z
      light.coeffs[c][3] = light_strength * std::sin(angle);   // x
    }
    out.lighting.push_back(light);

    ShadingFrame hint = render_shading_hints(mesh, camera, light, res);
    const ShadingFrame lit = render_albedo_shaded(mesh, camera, light, res, albedo);
    for (std::size_t y = 0; y < res.height; ++y)
      for (std::size_t x = 0; x < res.width; ++x) {
        const std::size_t idx = hint.index(y, x);
        for (std::size_t c = 0; c < 3; ++c) {
          out.sample.hints(f, c, y, x) = hint.image[3 * idx + c];
          video(f, c, y, x) =
              lit.mask[idx] ? lit.image[3 * idx + c] : background[static_cast<Eigen::Index>(c)];
        }
      }
    const MaskSeq m = downsample_mask(hint, kLatentDownsampling);
    std::copy(m.values().begin(), m.values().end(),
              out.sample.masks.values().begin() + static_cast<std::ptrdiff_t>(f * m.size()));
    out.hint_frames.push_back(std::move(hint));
  }

  out.sample.video_latent = toy_encode(video);
  out.sample.reference = FeatureStack(1, 3, res.height, res.width);
  std::copy_n(video.values().begin(), out.sample.reference.size(),
              out.sample.reference.values().begin());
  return out;
}

TrainBatch SyntheticVideoStream::batch(std::size_t first, std::size_t count) const {
  TrainBatch b;
  for (std::size_t i = 0; i < count; ++i) b.samples.push_back(sample(first + i));
  return b;
}

TrainBatch synth_dataset(std::uint64_t seed, std::size_t count, const SynthConfig& config) {
  return SyntheticVideoStream(seed, config).batch(0, count);
}

ToyRunSeeds::ToyRunSeeds(std::uint64_t master)
    : data(derive_seed(master, 0xDA7A)), model(derive_seed(master, 0x30DE)), train(derive_seed(master, 0x7EA1)) {}

TrainBatch toy_run_dataset(const ToyRunConfig& config, std::uint64_t seed) {
  return synth_dataset(ToyRunSeeds(seed).data, config.dataset_size, config.synth);
}

ToyRunResult run_toy_training(const ToyRunConfig& config, std::uint64_t seed) {
  return run_toy_training(config, seed, toy_run_dataset(config, seed));
}

ToyRunResult run_toy_training(const ToyRunConfig& config, std::uint64_t seed, const TrainBatch& data) {
  if (data.samples.empty()) throw Error("toy training: empty dataset");
  if (config.batch_size < 1) throw Error("toy training: batch size must be positive");
  const ToyRunSeeds seeds(seed);
  ToyRunResult result{make_toy_model(config.model, seeds.model), {}};
  const NoiseSchedule schedule = default_schedule();
  Rng rng(seeds.train);
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    TrainBatch batch;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      batch.samples.push_back(data.samples[cursor]);
      cursor = (cursor + 1) % data.samples.size();
    }
    result.losses.push_back(train_step(result.model, batch, schedule, config.options, rng));
  }
  return result;
}

}  // namespace lcvd
