#include <gtest/gtest.h>

#include <cmath>

#include "diffmvr/dataio/synth.hpp"
#include "diffmvr/diffusion/inpaint.hpp"

using namespace diffmvr;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.side = 16;
  cfg.embed_dim = 16;
  cfg.token_count = 4;
  cfg.token_width = 8;
  cfg.unet_channels0 = 8;
  cfg.unet_channels1 = 8;
  cfg.time_dim = 8;
  cfg.t_max = 6;
  return cfg;
}

std::vector<VideoSequence> tiny_dataset(std::size_t n) {
  std::vector<VideoSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    SynthConfig s;
    s.side = 16;
    s.frames = 3;
    s.seed = 100 + i;
    out.push_back(generate_clip(s));
  }
  return out;
}

LatentMap<double> scalar_latent(double v) { return {Tensor64::full({1}, v), LatentKind::kClean, std::nullopt}; }

NoiseSchedule hand_schedule(double alpha, double alpha_bar) {
  NoiseSchedule s;
  s.t_max = 1;
  s.beta = {0.0, 1.0 - alpha};
  s.alpha = {1.0, alpha};
  s.alpha_bar = {1.0, alpha_bar};
  s.sigma = {0.0, 0.0};
  return s;
}

}  // namespace

TEST(Schedule, HandCases) {
  const auto one = build_schedule(1, 0.3, 0.3);
  EXPECT_DOUBLE_EQ(one.alpha_bar[1], 0.7);
  const auto half = build_schedule(2, 0.5, 0.5);
  EXPECT_EQ(half.alpha_bar[1], 0.5);
  EXPECT_EQ(half.alpha_bar[2], 0.25);
  EXPECT_EQ(half.alpha_bar[0], 1.0);
  EXPECT_EQ(half.sigma[1], 0.0);
  EXPECT_DOUBLE_EQ(half.sigma[2], std::sqrt(0.5));
}

TEST(Schedule, DefaultsAndErrors) {
  const auto s = build_schedule();
  ASSERT_EQ(s.t_max, 50);
  EXPECT_DOUBLE_EQ(s.beta[1], 1e-4);
  EXPECT_DOUBLE_EQ(s.beta[50], 0.02);
  for (int t = 1; t <= 50; ++t) {
    EXPECT_GT(s.beta[t], 0.0);
    EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]);
  }
  EXPECT_EQ(s.hash(), build_schedule().hash());
  EXPECT_NE(s.hash(), build_schedule(40).hash());
  EXPECT_THROW(build_schedule(10, 0.0, 0.02), ConfigError);
  EXPECT_THROW(build_schedule(10, 0.03, 0.02), ConfigError);
  EXPECT_THROW(build_schedule(10, 0.01, 1.0), ConfigError);
  EXPECT_THROW(build_schedule(0), ConfigError);
}

TEST(ForwardDiffuse, HandCasesAndErrors) {
  const auto s = build_schedule(2, 0.5, 0.5);
  const auto y = forward_diffuse(scalar_latent(2.0), 2, Tensor64::full({1}, 1.0), s);
  EXPECT_NEAR(y.values[0], 1.86603, 1e-5);
  EXPECT_EQ(y.kind, LatentKind::kNoisy);
  EXPECT_EQ(*y.timestep, 2);
  const auto same = forward_diffuse(scalar_latent(2.0), 0, Tensor64::full({1}, 5.0), s);
  EXPECT_EQ(same.values[0], 2.0);
  EXPECT_THROW(forward_diffuse(scalar_latent(2.0), 3, Tensor64::full({1}, 1.0), s), ContractError);
  EXPECT_THROW(forward_diffuse(scalar_latent(2.0), 1, Tensor64::full({2}, 1.0), s), DimensionError);
}

TEST(ForwardDiffuse, MonteCarloMoments) {
  // 10k latent-sized noise draws, statistics pooled over the latent entries.
  const auto s = build_schedule();
  Rng rng(21);
  const double y0 = 1.5;
  const LatentMap<double> y{Tensor64::full({4, 8, 8}, y0), LatentKind::kClean, std::nullopt};
  for (int T : {5, 25, 50}) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < 10000; ++i) {
      const LatentMap<double> noisy = forward_diffuse(y, T, rng.normal_tensor<double>({4, 8, 8}), s);
      for (double v : noisy.values.data()) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, std::sqrt(s.alpha_bar[T]) * y0, 0.02 * std::sqrt(s.alpha_bar[T]) * y0) << T;
    EXPECT_NEAR(var, 1.0 - s.alpha_bar[T], 0.02 * (1.0 - s.alpha_bar[T])) << T;
  }
}

TEST(ReverseStep, HandCases) {
  const auto s = hand_schedule(0.99, 0.5);
  LatentMap<double> y{Tensor64::full({1}, 1.0), LatentKind::kNoisy, 1};
  const auto out = reverse_step(y, 1, Tensor64::full({1}, 0.2), s, Tensor64::full({1}, 9.0));
  const double expect = (1.0 / std::sqrt(0.99)) * (1.0 - (0.01 / std::sqrt(0.5)) * 0.2);
  EXPECT_NEAR(out.values[0], expect, 1e-12);
  EXPECT_NEAR(out.values[0], 1.002195, 1e-6);
  EXPECT_EQ(out.kind, LatentKind::kClean);
  const auto pure = reverse_step(y, 1, Tensor64::full({1}, 0.0), s, Tensor64::full({1}, 9.0));
  EXPECT_DOUBLE_EQ(pure.values[0], 1.0 / std::sqrt(0.99));
  EXPECT_THROW(reverse_step(y, 0, Tensor64::full({1}, 0.0), s, Tensor64::full({1}, 0.0)), ContractError);
}

TEST(ReverseStep, RecoverX0Identity) {
  const auto s = build_schedule();
  Rng rng(22);
  for (int T : {1, 10, 50}) {
    const LatentMap<float> y{rng.normal_tensor<float>({4, 8, 8}), LatentKind::kClean, std::nullopt};
    const Tensor eps = rng.normal_tensor<float>({4, 8, 8});
    const Tensor back = recover_x0(forward_diffuse(y, T, eps, s), eps, s);
    for (std::size_t i = 0; i < back.numel(); ++i) EXPECT_NEAR(back[i], y.values[i], 1e-5);
  }
}

TEST(LossMotion, HandCasesAndProperties) {
  std::vector<Tensor64> two{Tensor64::from({2}, {0.0, 0.0}), Tensor64::from({2}, {1.0, 1.0})};
  EXPECT_EQ(loss_motion(two).item(), 2.0);

  Rng rng(23);
  std::vector<Tensor64> three;
  for (int i = 0; i < 3; ++i) three.push_back(rng.normal_tensor<double>({5}));
  const double base = loss_motion(three).item();
  std::vector<Tensor64> shifted;
  for (const auto& t : three) shifted.push_back(add_scalar(t, 3.7));
  EXPECT_NEAR(loss_motion(shifted).item(), base, 1e-10);
  const std::vector<Tensor64> swapped{three[2], three[1], three[0]};
  const std::vector<Tensor64> reordered{three[0], three[2], three[1]};
  EXPECT_NE(loss_motion(reordered).item(), base);
  EXPECT_NEAR(loss_motion(swapped).item(), base, 1e-12);
  const std::vector<Tensor64> same(3, three[0]);
  EXPECT_EQ(loss_motion(same).item(), 0.0);
  EXPECT_THROW(loss_motion(std::vector<Tensor64>{three[0]}), ContractError);

  std::vector<LatentMap<double>> mixed{{three[0], LatentKind::kNoisy, 3}, {three[1], LatentKind::kNoisy, 4}};
  EXPECT_THROW(loss_motion(mixed), ContractError);
}

TEST(LossDiff, HandCases) {
  Rng rng(24);
  const std::vector<Tensor64> eps{rng.normal_tensor<double>({64}), rng.normal_tensor<double>({64})};
  EXPECT_EQ(loss_diff(eps, eps).item(), 0.0);
  const std::vector<Tensor64> zero(2, Tensor64::zeros({64}));
  double expect = 0.0;
  for (const auto& e : eps) {
    for (double v : e.data()) expect += v * v / 2.0;
  }
  EXPECT_NEAR(loss_diff(eps, zero).item(), expect, 1e-10);

  // Mean over frames of |eps|^2 approaches the element count.
  double acc = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::vector<Tensor64> e{rng.normal_tensor<double>({64})};
    acc += loss_diff(e, std::vector<Tensor64>{Tensor64::zeros({64})}).item();
  }
  EXPECT_NEAR(acc / 200.0, 64.0, 64.0 * 0.05);
}

TEST(LossTotal, Composition) {
  // Diff 0.5 (one frame, |eps|^2 = 0.5) and motion 2 with lambda 1.
  const std::vector<Tensor64> eps{Tensor64::from({2}, {0.5, 0.5})};
  const std::vector<Tensor64> zero{Tensor64::zeros({2})};
  const double diff = loss_diff(eps, zero).item();
  const std::vector<Tensor64> frames{Tensor64::from({2}, {0.0, 0.0}), Tensor64::from({2}, {1.0, 1.0})};
  const double motion = loss_motion(frames).item();
  EXPECT_EQ(diff + 1.0 * motion, 2.5);

  const ModelConfig cfg = tiny_config();
  const auto sched = build_schedule(cfg.t_max);
  auto params = ModelParams<float>::init(cfg, 3);
  const auto data = tiny_dataset(1);
  const PreparedClip clip = prepare_clip(params.vae, data[0], kDefaultCleanThreshold);
  ClipBatch<float> batch;
  batch.timestep = 4;
  Rng rng(25);
  for (std::size_t i = 0; i < clip.clean.size(); ++i) {
    batch.frames.push_back({clip.clean[i], clip.cond[i], clip.guides[i], rng.normal_tensor<float>(clip.clean[i].values.shape())});
  }
  const auto on = loss_total(batch, params, sched, GuidanceMode::kDual, 1.0);
  EXPECT_NEAR(on.total.item(), on.diff.item() + on.motion.item(), 1e-4 * on.total.item());
  const auto zero_l = loss_total(batch, params, sched, GuidanceMode::kDual, 0.0);
  EXPECT_EQ(zero_l.total.item(), zero_l.diff.item());
  const auto off = loss_total(batch, params, sched, GuidanceMode::kDual, 1.0, false);
  EXPECT_EQ(off.total.item(), off.diff.item());
  EXPECT_GT(off.motion.item(), 0.0);
  EXPECT_THROW(loss_total(batch, params, sched, GuidanceMode::kDual, -1.0), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  const ModelConfig cfg = tiny_config();
  const auto sched = build_schedule(cfg.t_max);
  auto params = ModelParams<float>::init(cfg, 4);
  const auto before = ModelParams<float>::init(cfg, 4);
  TrainConfig tc;
  tc.steps = 3;
  tc.lr = 0.0;
  train(tiny_dataset(2), params, sched, tc);
  const auto a = params.all_parameters(), b = before.all_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].tensor.numel(); ++j) ASSERT_EQ(a[i].tensor[j], b[i].tensor[j]) << a[i].name;
  }
}

TEST(Train, DeterministicUnderSeed) {
  const ModelConfig cfg = tiny_config();
  const auto sched = build_schedule(cfg.t_max);
  const auto data = tiny_dataset(2);
  TrainConfig tc;
  tc.steps = 4;
  tc.seed = 9;
  auto p1 = ModelParams<float>::init(cfg, 5);
  auto p2 = ModelParams<float>::init(cfg, 5);
  const auto r1 = train(data, p1, sched, tc);
  const auto r2 = train(data, p2, sched, tc);
  ASSERT_EQ(r1.steps.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r1.steps[i].total, r2.steps[i].total);
    EXPECT_EQ(r1.steps[i].timestep, r2.steps[i].timestep);
    EXPECT_GE(r1.steps[i].timestep, 1);
    EXPECT_LE(r1.steps[i].timestep, cfg.t_max);
    EXPECT_GE(r1.steps[i].diff, 0.0);
  }
  const auto pa = p1.diffusion_parameters(), pb = p2.diffusion_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j) ASSERT_EQ(pa[i].tensor[j], pb[i].tensor[j]);
  }
  EXPECT_DOUBLE_EQ(mean_total(r1, 1, 2), (r1.steps[0].total + r1.steps[1].total) / 2.0);
}

TEST(Inpaint, UnoccludedClipPassesThroughBitwise) {
  const ModelConfig cfg = tiny_config();
  const auto sched = build_schedule(cfg.t_max);
  const auto params = ModelParams<float>::init(cfg, 6);
  SynthConfig s;
  s.side = 16;
  s.frames = 3;
  s.coverage = {0.0, 0.0, 0.0};
  const VideoSequence v = generate_clip(s);
  const auto r = inpaint_clip(v, params, sched, InpaintConfig{});
  for (std::size_t t = 0; t < v.size(); ++t) {
    EXPECT_FALSE(r.restored[t]);
    for (std::size_t i = 0; i < v.frames[t].numel(); ++i) ASSERT_EQ(r.video.frames[t][i], v.frames[t][i]);
  }
}

TEST(Inpaint, CompositePreservesVisiblePixelsAndIsDeterministic) {
  const ModelConfig cfg = tiny_config();
  const auto sched = build_schedule(cfg.t_max);
  const auto params = ModelParams<float>::init(cfg, 7);
  const VideoSequence v = tiny_dataset(1)[0];
  InpaintConfig ic;
  ic.seed = 3;
  const auto r1 = inpaint_clip(v, params, sched, ic);
  const auto r2 = inpaint_clip(v, params, sched, ic);
  const std::size_t plane = 16 * 16;
  for (std::size_t t = 0; t < v.size(); ++t) {
    EXPECT_EQ(r1.restored[t], v.occluded(t));
    for (std::size_t i = 0; i < v.frames[t].numel(); ++i) {
      ASSERT_EQ(r1.video.frames[t][i], r2.video.frames[t][i]);
      if (v.masks[t][i % plane] == 0.0f) {
        ASSERT_EQ(r1.video.frames[t][i], v.frames[t][i]);
      }
    }
  }

  Rng rng(8);
  const Tensor frame = rng.uniform_tensor<float>({3, 4, 4}, 0, 1);
  const Tensor fill = rng.uniform_tensor<float>({3, 4, 4}, 0, 1);
  Tensor mask = Tensor::zeros({1, 4, 4});
  mask.mutable_data()[5] = 1.0f;
  const Tensor c = composite(frame, mask, fill);
  for (std::size_t i = 0; i < c.numel(); ++i) EXPECT_EQ(c[i], i % 16 == 5 ? fill[i] : frame[i]);
}
