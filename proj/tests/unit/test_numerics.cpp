#include <gtest/gtest.h>

#include <cmath>

#include "diffmvr/numerics/adam.hpp"
#include "diffmvr/numerics/ops.hpp"
#include "diffmvr/numerics/rng.hpp"
#include "grad_cases.hpp"

using namespace diffmvr;
using diffmvr::oracle::gradcheck;

namespace {

Tensor t2(std::size_t r, std::size_t c, std::vector<float> v) { return Tensor::from({r, c}, std::move(v)); }

void expect_values(const Tensor& t, const std::vector<float>& expected, float tol = 0.0f) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t[i], expected[i], tol) << "index " << i;
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::from({2, 0}, {}), DimensionError);
}

TEST(Tensor, BackwardNeedsScalarLoss) {
  Tensor x = Tensor::full({2}, 1.0f, true);
  EXPECT_THROW(backward(square(x)), ContractError);
  EXPECT_THROW(backward(sum(Tensor::full({2}, 1.0f))), ContractError);
}

TEST(Matmul, HandCases) {
  const Tensor a = t2(2, 2, {1, 2, 3, 4});
  expect_values(matmul(t2(2, 2, {1, 0, 0, 1}), a), {1, 2, 3, 4});
  expect_values(matmul(a, t2(2, 2, {1, 0, 0, 1})), {1, 2, 3, 4});
  expect_values(matmul(a, t2(2, 1, {5, 6})), {17, 39});
  EXPECT_THROW(matmul(a, t2(3, 1, {1, 2, 3})), DimensionError);
}

TEST(Matmul, IdentityAssociativity) {
  Rng rng(4);
  const Tensor a = rng.normal_tensor<float>({3, 4});
  const Tensor b = rng.normal_tensor<float>({4, 2});
  Tensor eye = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.mutable_data()[i * 5] = 1.0f;
  const Tensor left = matmul(matmul(a, eye), b);
  const Tensor right = matmul(a, matmul(eye, b));
  for (std::size_t i = 0; i < left.numel(); ++i) EXPECT_FLOAT_EQ(left[i], right[i]);
}

TEST(Conv2d, HandCases) {
  Rng rng(5);
  const Tensor x = rng.uniform_tensor<float>({1, 4, 4}, 0, 1);
  const Tensor doubled = conv2d(x, Tensor::from({1, 1, 1, 1}, {2.0f}));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(doubled[i], 2.0f * x[i]);

  const Tensor zero = conv2d(x, Tensor::zeros({2, 1, 3, 3}), 1, 1);
  for (float v : zero.data()) EXPECT_EQ(v, 0.0f);

  // 3x3 box filter on a 5x5 constant with reflect "same" padding.
  const Tensor constant = Tensor::full({1, 5, 5}, 0.7f);
  const Tensor box = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
  const Tensor out = conv2d(constant, box, 1, 1, PadMode::kReflect);
  ASSERT_EQ(out.shape(), (Shape{1, 5, 5}));
  for (float v : out.data()) EXPECT_NEAR(v, 0.7f, 1e-6f);
}

TEST(Conv2d, CrossCorrelationNoFlip) {
  // Kernel picks the right neighbour: out(y, x) = in(y, x + 1).
  const Tensor x = Tensor::from({1, 1, 3}, {1, 2, 3});
  Tensor k = Tensor::zeros({1, 1, 3, 3});
  k.mutable_data()[5] = 1.0f;
  expect_values(conv2d(x, k, 1, 1, PadMode::kZero), {2, 3, 0});
}

TEST(Conv2d, Errors) {
  const Tensor x = Tensor::zeros({1, 2, 2});
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 1, 2, 2})), DimensionError);
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 1, 5, 5})), DimensionError);
}

TEST(Conv2d, Linearity) {
  Rng rng(6);
  const Tensor x = rng.normal_tensor<float>({2, 5, 5});
  const Tensor y = rng.normal_tensor<float>({2, 5, 5});
  const Tensor k = rng.normal_tensor<float>({3, 2, 3, 3});
  const float a = 0.75f, b = -1.25f;
  const Tensor lhs = conv2d(add(scale(x, a), scale(y, b)), k, 1, 1);
  const Tensor rhs = add(scale(conv2d(x, k, 1, 1), a), scale(conv2d(y, k, 1, 1), b));
  for (std::size_t i = 0; i < lhs.numel(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-5f);
}

TEST(Softmax, HandCases) {
  expect_values(softmax(Tensor::from({1, 1}, {3.0f}), 1), {1.0f});
  expect_values(softmax(Tensor::full({1, 4}, 2.0f), 1), {0.25f, 0.25f, 0.25f, 0.25f}, 1e-7f);
  expect_values(softmax(Tensor::from({1, 2}, {0.0f, std::log(3.0f)}), 1), {0.25f, 0.75f}, 1e-6f);
  EXPECT_THROW(softmax(Tensor::zeros({2, 2}), 2), DimensionError);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = rng.uniform_tensor<float>({4, 6}, -5, 5);
    const Tensor p = softmax(x, 1);
    const Tensor q = softmax(add_scalar(x, 3.5f), 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        row += p[r * 6 + c];
        EXPECT_GT(p[r * 6 + c], 0.0f);
        EXPECT_NEAR(p[r * 6 + c], q[r * 6 + c], 1e-6f);
      }
      EXPECT_NEAR(row, 1.0, 1e-6);
    }
  }
}

TEST(Backward, AnalyticCases) {
  Tensor x = Tensor::from({3}, {1.0f, -2.0f, 0.5f}, true);
  backward(sum(square(x)));
  expect_values(Tensor::from({3}, {x.grad()[0], x.grad()[1], x.grad()[2]}), {2.0f, -4.0f, 1.0f});

  Tensor y = Tensor::from({1, 4}, {0.1f, 2.0f, -1.0f, 0.3f}, true);
  backward(sum(softmax(y, 1)));
  for (float g : y.grad()) EXPECT_NEAR(g, 0.0f, 1e-7f);
}

TEST(Backward, LeafGradientsAccumulateUntilCleared) {
  Tensor x = Tensor::from({2}, {1.0f, 3.0f}, true);
  backward(sum(square(x)));
  backward(sum(square(x)));
  EXPECT_FLOAT_EQ(x.grad()[1], 12.0f);
  x.zero_grad();
  backward(sum(x));
  EXPECT_FLOAT_EQ(x.grad()[1], 1.0f);
}

TEST(Backward, NoGradGuardSkipsTape) {
  Tensor x = Tensor::full({2}, 1.0f, true);
  NoGradGuard guard;
  EXPECT_FALSE(square(x).requires_grad());
}

TEST(GradCheck, EveryOpAt32Bit) {
  for (const auto& c : oracle::op_grad_cases()) {
    const auto stats = gradcheck<float>(c.fn, c.inputs, 20, 11);
    EXPECT_LT(stats.max_rel_err, 1e-3) << c.name;
  }
}

TEST(GradCheck, EveryOpAt64Bit) {
  for (const auto& c : oracle::op_grad_cases(2)) {
    const auto stats = gradcheck<double>(c.fn, c.inputs, 20, 12, 1e-8, 1e-6);
    EXPECT_LT(stats.max_rel_err, 1e-6) << c.name;
  }
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
  }
  Rng d(9), e(9);
  const Tensor x = d.normal_tensor<float>({5, 5});
  const Tensor y = e.normal_tensor<float>({5, 5});
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor w = Tensor::from({3}, {1.0f, 2.0f, 3.0f}, true);
  ParamList<float> params{{"w", w}};
  Adam<float> adam(params, {});
  for (int i = 0; i < 5; ++i) {
    zero_grads(params);
    adam.step();
  }
  expect_values(w, {1.0f, 2.0f, 3.0f});
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // m1 = 0.1 g, v1 = 0.001 g^2; bias-corrected m/sqrt(v) = 1, so the step is lr / (1 + eps).
  Tensor w = Tensor::from({1}, {0.5f}, true);
  ParamList<float> params{{"w", w}};
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam<float> adam(params, cfg);
  w.zero_grad();
  w.mutable_grad()[0] = 1.0f;
  adam.step();
  EXPECT_NEAR(w[0], 0.5f - 0.01f, 1e-7f);
}

TEST(Adam, MissingGradientIsContractError) {
  Tensor w = Tensor::from({1}, {0.5f}, true);
  Adam<float> adam({{"w", w}}, {});
  EXPECT_THROW(adam.step(), ContractError);
}

TEST(Adam, IdenticalSeedsGiveIdenticalTrajectories) {
  auto run = [] {
    Rng rng(8);
    Tensor w = rng.normal_tensor<float>({4});
    w.set_requires_grad(true);
    ParamList<float> params{{"w", w}};
    Adam<float> adam(params, {});
    for (int i = 0; i < 10; ++i) {
      zero_grads(params);
      backward(sum(mul(square(w), rng.normal_tensor<float>({4}))));
      adam.step();
    }
    return std::vector<float>(w.data().begin(), w.data().end());
  };
  EXPECT_EQ(run(), run());
}
