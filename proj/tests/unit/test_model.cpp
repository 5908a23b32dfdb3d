#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "adbcr/checkpoint.hpp"
#include "adbcr/errors.hpp"
#include "adbcr/model.hpp"
#include "adbcr/params.hpp"
#include "test_support.hpp"

namespace adbcr {
namespace {

using testing::random_model;
using testing::random_tensor;

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor theta{{1.0}};
  Adam opt(AdamConfig{0.1});
  Tensor* p = &theta;
  const Tensor g{{1.0}};
  opt.step({&p, 1}, {&g, 1});
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(theta[0], 0.9, 1e-7);
}

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  Tensor theta{{0.25, -3.0}};
  Adam opt(AdamConfig{0.1});
  Tensor* p = &theta;
  const Tensor g(1, 2, 0.0);
  for (int i = 0; i < 5; ++i) opt.step({&p, 1}, {&g, 1});
  EXPECT_EQ(theta, (Tensor{{0.25, -3.0}}));
}

TEST(Adam, MinimisesAQuadratic) {
  Tensor theta{{1.0}};
  Adam opt(AdamConfig{0.05});
  Tensor* p = &theta;
  for (int i = 0; i < 200; ++i) {
    const Tensor g{{2.0 * theta[0]}};
    opt.step({&p, 1}, {&g, 1});
  }
  EXPECT_LT(std::abs(theta[0]), 0.05);
}

TEST(Adam, WeightDecayActsAsL2Penalty) {
  // A zero loss gradient with decay still pulls the parameter toward zero.
  Tensor theta{{2.0}};
  AdamConfig c{0.1};
  c.weight_decay = 1.0;
  Adam opt(c);
  Tensor* p = &theta;
  const Tensor g{{0.0}};
  opt.step({&p, 1}, {&g, 1});
  EXPECT_NEAR(theta[0], 1.9, 1e-7);
}

TEST(Adam, NonFiniteGradientRaisesAndLeavesEveryParameterUntouched) {
  Tensor a{{1.0}}, b{{2.0}};
  Adam opt(AdamConfig{0.1});
  std::vector<Tensor*> ps{&a, &b};
  const std::vector<Tensor> gs{Tensor{{1.0}}, Tensor{{std::numeric_limits<double>::quiet_NaN()}}};
  EXPECT_THROW(opt.step(ps, gs), TrainingError);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(b[0], 2.0);
  EXPECT_EQ(opt.steps(), 0);
}

TEST(Model, ParameterCountMatchesClosedForm) {
  const Model m = random_model(1, 25, {50, 50}, {50, 50});
  // Phi: 25*50+50 + 50*50+50; each head: 50*50+50 + 50*50+50 + 50*1+1.
  const std::size_t phi = 25 * 50 + 50 + 50 * 50 + 50;
  const std::size_t head = 2 * (50 * 50 + 50) + 50 + 1;
  EXPECT_EQ(m.parameter_count(), phi + 4 * head);
}

TEST(Model, InitialisationIsDeterministicAndWithinFanInBounds) {
  const Model a = random_model(7, 5, {8}, {4});
  const Model b = random_model(7, 5, {8}, {4});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, random_model(8, 5, {8}, {4}));
  for (const auto& p : a.phi()) {
    const double bound = 1.0 / std::sqrt(5.0);
    for (double v : p.value.data()) EXPECT_LE(std::abs(v), bound);
  }
}

TEST(Model, HeadsOfOneArmStartDifferent) {
  const Model m = random_model(3, 4, {6}, {5});
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, 10, 4);
  for (int t = 0; t < 2; ++t) EXPECT_NE(forward_head(m, x, t, 0), forward_head(m, x, t, 1));
}

TEST(Model, BatchOutputEqualsRowByRowOutput) {
  const Model m = random_model(4, 3, {7, 5}, {4});
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(rng, 6, 3);
  const Tensor all = forward_head(m, x, 1, 0);
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor one = forward_head(m, select_rows(x, std::vector<std::size_t>{i}), 1, 0);
    EXPECT_NEAR(one[0], all[i], 1e-14);
  }
}

TEST(Model, TiedHeadsGiveZeroDisagreementAndZeroParametersGiveZeroEffect) {
  Model m = random_model(5, 3, {4}, {4});
  m.head(0, 1) = m.head(0, 0);
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(rng, 5, 3);
  EXPECT_EQ(forward_head(m, x, 0, 0), forward_head(m, x, 0, 1));

  Model zero = make_empty_model(m.architecture());
  zero.x_scaler = FeatureScaler::identity(3);
  const auto po = predict_potential_outcomes(zero, x);
  for (double v : po.cate()) EXPECT_EQ(v, 0.0);
}

TEST(Model, PredictionIsTheDestandardisedHeadAverage) {
  Model m = random_model(6, 3, {5}, {3});
  m.x_scaler = FeatureScaler{{1.0, -1.0, 0.5}, {2.0, 0.5, 1.0}};
  m.y_scaler = OutcomeScaler{3.0, 2.5};
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor(rng, 7, 3, -3.0, 3.0);
  const Tensor z = m.x_scaler.apply(x);
  const auto po = predict_potential_outcomes(m, x);
  for (int t = 0; t < 2; ++t) {
    const Tensor h0 = forward_head(m, z, t, 0), h1 = forward_head(m, z, t, 1);
    const auto& got = t == 0 ? po.y0 : po.y1;
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_NEAR(got[i], 0.5 * (h0[i] + h1[i]) * 2.5 + 3.0, 1e-12);
    }
  }
}

TEST(Model, PredictionsArePermutationEquivariant) {
  const Model m = random_model(9, 4, {6}, {6});
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(rng, 8, 4);
  std::vector<std::size_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto a = predict_potential_outcomes(m, x).cate();
  const auto b = predict_potential_outcomes(m, select_rows(x, perm)).cate();
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(b[i], a[perm[i]]);
}

TEST(Model, ScalersRoundTrip) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor(rng, 30, 3, -5.0, 9.0);
  const FeatureScaler s = FeatureScaler::fit(x);
  const Tensor z = s.apply(x);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 30; ++i) mean += z(i, j);
    EXPECT_NEAR(mean / 30.0, 0.0, 1e-12);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(z(i, j) * s.scale[j] + s.mean[j], x(i, j), 1e-12);
  }
  const std::vector<double> y{1.0, 4.0, -2.0};
  const OutcomeScaler ys = OutcomeScaler::fit(y);
  for (double v : y) EXPECT_NEAR(ys.destandardize(ys.standardize(v)), v, 1e-12);
}

TEST(Model, DropoutZeroMakesTrainingForwardEqualEval) {
  const Model m = random_model(10, 3, {5}, {5}, 0.0);
  std::mt19937_64 rng(7), drop(8);
  const Tensor x = random_tensor(rng, 4, 3);
  EXPECT_EQ(forward_head(m, x, 1, 1, true, &drop), forward_head(m, x, 1, 1));
}

TEST(Checkpoint, RoundTripPreservesModelAndMeta) {
  testing::TempDir dir;
  Model m = random_model(11, 4, {6, 3}, {5}, 0.3);
  m.x_scaler = FeatureScaler{{1, 2, 3, 4}, {1, 1, 2, 2}};
  m.y_scaler = OutcomeScaler{0.5, 3.0};
  const CheckpointMeta meta{"0123456789abcdef", "factual+distance", 1.25};
  save_checkpoint(dir / "m.ckpt", m, meta);
  const NetworkCheckpoint back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.model, m);
  EXPECT_EQ(back.meta, meta);
}

TEST(Checkpoint, TruncatedFileRaisesLoadError) {
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", random_model(12, 3, {4}, {4}), CheckpointMeta{});
  const auto size = std::filesystem::file_size(dir / "m.ckpt");
  std::filesystem::resize_file(dir / "m.ckpt", size / 2);
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), LoadError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), LoadError);
}

}  // namespace
}  // namespace adbcr
