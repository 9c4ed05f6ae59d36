#include <gtest/gtest.h>

#include <cmath>

#include "diffmvr/dataio/synth.hpp"
#include "diffmvr/metrics/metrics.hpp"

using namespace diffmvr;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.side = 16;
  cfg.embed_dim = 8;
  cfg.token_count = 4;
  cfg.token_width = 8;
  cfg.unet_channels0 = 8;
  cfg.unet_channels1 = 8;
  cfg.time_dim = 8;
  return cfg;
}

std::vector<VideoSequence> clips(std::size_t n, std::uint64_t seed0) {
  std::vector<VideoSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    SynthConfig s;
    s.side = 16;
    s.frames = 4;
    s.seed = seed0 + i;
    out.push_back(generate_clip(s));
  }
  return out;
}

VideoSequence zero_filled(const VideoSequence& v) {
  VideoSequence z = v;
  const std::size_t plane = v.masks[0].numel();
  for (std::size_t t = 0; t < v.size(); ++t) {
    z.frames[t] = v.frames[t].detach();
    auto d = z.frames[t].mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (v.masks[t][i % plane] != 0.0f) d[i] = 0.0f;
    }
  }
  return z;
}

}  // namespace

TEST(Ssim, IdentityConstantsSymmetry) {
  Rng rng(1);
  const Tensor a = rng.uniform_tensor<float>({3, 12, 12}, 0, 1);
  const Tensor b = rng.uniform_tensor<float>({3, 12, 12}, 0, 1);
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_GE(ssim(a, b), -1.0);
  const double expect = kSsimC1 * kSsimC2 / ((1.0 + kSsimC1) * kSsimC2);
  EXPECT_NEAR(ssim(Tensor::zeros({1, 8, 8}), Tensor::full({1, 8, 8}, 1.0f)), expect, 1e-12);
  EXPECT_NEAR(expect, 1e-4, 1e-7);
  EXPECT_THROW(ssim(a, Tensor::zeros({3, 12, 11})), DimensionError);
}

TEST(Ssim, ConstantShiftBarelyMatters) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = rng.uniform_tensor<float>({3, 16, 16}, 0.2, 0.7);
    const Tensor b = rng.uniform_tensor<float>({3, 16, 16}, 0.2, 0.7);
    const float c = static_cast<float>(rng.uniform(0.0, 0.3));
    EXPECT_LT(std::abs(ssim(add_scalar(a, c), add_scalar(b, c)) - ssim(a, b)), 1e-3);
  }
}

TEST(Ssim, MaskedRestrictsToOccludedWindows) {
  Rng rng(3);
  const Tensor a = rng.uniform_tensor<float>({1, 20, 20}, 0, 1);
  Tensor b = a.detach();
  Tensor mask = Tensor::zeros({1, 20, 20});
  // Corrupt the top-left corner and mask the bottom-right one.
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) b.mutable_data()[y * 20 + x] = 1.0f - a[y * 20 + x];
  }
  for (std::size_t y = 17; y < 20; ++y) {
    for (std::size_t x = 17; x < 20; ++x) mask.mutable_data()[y * 20 + x] = 1.0f;
  }
  EXPECT_NEAR(ssim_masked(a, b, mask), 1.0, 1e-9);
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_DOUBLE_EQ(ssim_masked(a, b, Tensor::zeros({1, 20, 20})), ssim(a, b));
}

TEST(TemporalConsistency, HandCases) {
  VideoSequence v;
  for (int t = 0; t < 3; ++t) {
    v.frames.push_back(Tensor::full({1, 4, 4}, 0.3f));
    v.masks.push_back(Tensor::zeros({1, 4, 4}));
  }
  EXPECT_EQ(tc_score(v), 0.0);

  VideoSequence two;
  two.frames = {Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 4, 4})};
  two.masks = {Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 4, 4})};
  for (std::size_t i : {0u, 1u, 4u, 5u}) {
    two.frames[1].mutable_data()[i] = 0.5f;
    two.masks[i < 2 ? 0 : 1].mutable_data()[i] = 1.0f;
  }
  EXPECT_DOUBLE_EQ(tc_score(two), 0.5);

  VideoSequence one;
  one.frames = {Tensor::zeros({1, 4, 4})};
  one.masks = {Tensor::zeros({1, 4, 4})};
  EXPECT_THROW(tc_score(one), ContractError);
}

TEST(TemporalConsistency, NoiseIncreasesScore) {
  Rng rng(4);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SynthConfig s;
    s.side = 16;
    s.seed = 1000 + static_cast<std::uint64_t>(trial);
    const VideoSequence truth = truth_sequence(generate_clip(s));
    VideoSequence noisy = truth;
    for (auto& f : noisy.frames) f = add(f, rng.normal_tensor<float>(f.shape(), 0.05));
    wins += tc_score(truth) <= tc_score(noisy);
  }
  EXPECT_GE(wins, 95);
}

TEST(Frechet, IdentityAndOneDimensionalOracle) {
  Rng rng(5);
  FeatureSet a;
  for (int i = 0; i < 50; ++i) a.push_back({rng.normal(), rng.normal(), rng.normal()});
  EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-6);

  // Two points at +-1/sqrt(2) have mean 0 and unbiased variance 1.
  const double s = 1.0 / std::sqrt(2.0);
  const FeatureSet n01{{-s}, {s}}, n11{{1.0 - s}, {1.0 + s}};
  EXPECT_NEAR(frechet_distance(n01, n11), 1.0, 1e-6);
  EXPECT_EQ(frechet_gaussian_1d(0, 1, 1, 1), 1.0);
  EXPECT_EQ(frechet_gaussian_1d(0, 1, 0, 3), 4.0);
  EXPECT_THROW(frechet_distance({}, a), ContractError);
  EXPECT_THROW(frechet_distance(n01, a), DimensionError);
}

TEST(Frechet, DiagonalOracleSymmetryAndNonNegativity) {
  // Axis-aligned point sets: covariance diagonal, so the distance is
  // |mu_a - mu_b|^2 + sum_i (s_ai - s_bi)^2 per axis.
  const auto cross = [](double cx, double cy, double rx, double ry) {
    return FeatureSet{{cx + rx, cy}, {cx - rx, cy}, {cx, cy + ry}, {cx, cy - ry}};
  };
  const FeatureSet a = cross(0, 0, 1, 2), b = cross(1, -1, 3, 0.5);
  const double sa_x = std::sqrt(2.0 / 3.0), sa_y = std::sqrt(8.0 / 3.0);
  const double sb_x = std::sqrt(18.0 / 3.0), sb_y = std::sqrt(0.5 / 3.0);
  const double expect = 2.0 + (sa_x - sb_x) * (sa_x - sb_x) + (sa_y - sb_y) * (sa_y - sb_y);
  EXPECT_NEAR(frechet_distance(a, b), expect, 1e-6);
  EXPECT_NEAR(frechet_distance(b, a), frechet_distance(a, b), 1e-6);

  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureSet x, y;
    for (int i = 0; i < 20; ++i) {
      x.push_back({rng.normal(), 2.0 * rng.normal(), rng.normal()});
      y.push_back({1.0 + rng.normal(), rng.normal(), 0.5 * rng.normal()});
    }
    EXPECT_GE(frechet_distance(x, y), 0.0);
    EXPECT_NEAR(frechet_distance(x, y), frechet_distance(y, x), 1e-6);
  }
}

TEST(Features, DimensionsAndProxyOrdering) {
  const ModelConfig cfg = tiny_config();
  const auto enc = ModelParams<float>::init(cfg, 7);
  std::vector<VideoSequence> real;
  for (const auto& c : clips(8, 50)) real.push_back(truth_sequence(c));
  const FeatureSet frames = extract_features(real, enc, FeatureLevel::kFrame);
  ASSERT_EQ(frames.size(), 8u * 4u);
  EXPECT_EQ(frames[0].size(), cfg.embed_dim);
  EXPECT_EQ(extract_features(real, enc, FeatureLevel::kFrame), frames);
  const FeatureSet video = extract_features(real, enc, FeatureLevel::kVideo);
  ASSERT_EQ(video.size(), 8u);
  EXPECT_EQ(video[0].size(), kVideoFeatureFrames * cfg.embed_dim);

  Rng rng(8);
  std::vector<VideoSequence> first(real.begin(), real.begin() + 4), second(real.begin() + 4, real.end());
  std::vector<VideoSequence> noise = first;
  for (auto& v : noise) {
    for (auto& f : v.frames) f = rng.uniform_tensor<float>(f.shape(), 0, 1);
  }
  const auto fa = extract_features(first, enc, FeatureLevel::kFrame);
  EXPECT_LT(frechet_distance(fa, extract_features(second, enc, FeatureLevel::kFrame)),
            frechet_distance(fa, extract_features(noise, enc, FeatureLevel::kFrame)));
}

TEST(Evaluate, TruthScoresPerfectAndZeroFillScoresWorse) {
  const ModelConfig cfg = tiny_config();
  const auto enc = ModelParams<float>::init(cfg, 9);
  const auto data = clips(4, 70);
  std::vector<VideoSequence> truth, zero;
  for (const auto& c : data) {
    truth.push_back(truth_sequence(c));
    zero.push_back(zero_filled(truth.back()));
  }
  const MetricReport perfect = evaluate(truth, truth, enc, {"a", "b", "c", "d"}, "fp");
  EXPECT_EQ(perfect.ssim, 1.0);
  EXPECT_EQ(perfect.ssim_masked, 1.0);
  EXPECT_EQ(perfect.tc, perfect.tc_truth);
  EXPECT_NEAR(perfect.fid_proxy, 0.0, 1e-6);
  ASSERT_EQ(perfect.clips.size(), 4u);
  EXPECT_EQ(perfect.clips[2].clip_id, "c");
  EXPECT_EQ(perfect.fingerprint, "fp");

  const MetricReport base = evaluate(zero, truth, enc);
  EXPECT_LT(base.ssim, perfect.ssim);
  EXPECT_LT(base.ssim_masked, perfect.ssim_masked);
  const MetricReport again = evaluate(zero, truth, enc);
  EXPECT_EQ(format_report_table(base), format_report_table(again));
  EXPECT_THROW(evaluate(zero, {truth[0]}, enc), ContractError);
}
