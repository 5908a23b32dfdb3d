#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "adbcr/autodiff.hpp"
#include "adbcr/errors.hpp"
#include "test_support.hpp"

namespace adbcr {
namespace {

using testing::max_relative_error;
using testing::numeric_gradient;
using testing::random_tensor;

// Builds f(inputs) on a fresh tape; returns the value and, optionally, the
// analytic gradient of input `which`.
using Graph = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

double eval_graph(const Graph& g, const std::vector<Tensor>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  return g(tape, vars).scalar();
}

Tensor analytic_gradient(const Graph& g, const std::vector<Tensor>& inputs, std::size_t which) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  tape.backward(g(tape, vars));
  return tape.grad(vars[which]);
}

double worst_gradient_error(const Graph& g, const std::vector<Tensor>& inputs) {
  double worst = 0.0;
  for (std::size_t w = 0; w < inputs.size(); ++w) {
    auto f = [&](const Tensor& x) {
      auto in = inputs;
      in[w] = x;
      return eval_graph(g, in);
    };
    worst = std::max(worst, max_relative_error(analytic_gradient(g, inputs, w),
                                               numeric_gradient(f, inputs[w])));
  }
  return worst;
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, MatmulKernelMatchesNaiveTripleLoop) {
  std::mt19937_64 rng(3);
  const Tensor a = random_tensor(rng, 5, 7), b = random_tensor(rng, 7, 3);
  Tensor out;
  kernels::matmul(a, b, out);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(out(i, j), s, 1e-14);
    }
  }
}

TEST(Tensor, SelectRowsAndVstack) {
  const Tensor t{{1, 2}, {3, 4}, {5, 6}};
  const std::vector<std::size_t> rows{2, 0};
  EXPECT_EQ(select_rows(t, rows), (Tensor{{5, 6}, {1, 2}}));
  EXPECT_EQ(vstack(t, Tensor()), t);
  EXPECT_EQ(vstack(Tensor{{1, 2}}, Tensor{{3, 4}}), (Tensor{{1, 2}, {3, 4}}));
  EXPECT_THROW(vstack(t, Tensor{{1, 2, 3}}), DimensionError);
}

TEST(Matmul, IdentityTimesColumn) {
  ad::Tape tape;
  auto r = ad::matmul(tape.constant(Tensor{{1, 0}, {0, 1}}), tape.constant(Tensor{{3}, {4}}));
  EXPECT_EQ(r.value(), (Tensor{{3}, {4}}));
}

TEST(Matmul, Scalars) {
  ad::Tape tape;
  EXPECT_EQ(ad::matmul(tape.constant(Tensor{{2}}), tape.constant(Tensor{{5}})).scalar(), 10.0);
}

TEST(Matmul, ShapeMismatchThrows) {
  ad::Tape tape;
  EXPECT_THROW(ad::matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3))), DimensionError);
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const std::vector<Tensor> in{random_tensor(rng, 3, 4), random_tensor(rng, 4, 2)};
  Graph g = [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::matmul(v[0], v[1])); };
  EXPECT_LT(worst_gradient_error(g, in), 1e-6);
}

TEST(Elu, Values) {
  ad::Tape tape;
  const Tensor out = ad::elu(tape.constant(Tensor{{0.0, 1.0, -1.0}})).value();
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 1.0);
  EXPECT_NEAR(out[2], -0.632121, 1e-6);
  EXPECT_EQ(out[2], std::expm1(-1.0));
}

TEST(Elu, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  // Keep entries away from the kink at 0.
  Tensor x = random_tensor(rng, 4, 3, -2.0, 2.0);
  for (auto& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
  Graph g = [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::elu(v[0])); };
  EXPECT_LT(worst_gradient_error(g, {x}), 1e-6);
}

TEST(Dropout, ProbabilityOneOrMoreIsAConfigError) {
  ad::Tape tape;
  std::mt19937_64 rng(1);
  EXPECT_THROW(ad::dropout(tape.constant(Tensor(2, 2, 1.0)), 1.0, true, rng), ConfigError);
  EXPECT_THROW(ad::dropout(tape.constant(Tensor(2, 2, 1.0)), -0.1, true, rng), ConfigError);
}

TEST(Dropout, ZeroProbabilityAndEvalModeAreIdentity) {
  ad::Tape tape;
  std::mt19937_64 rng(1);
  std::mt19937_64 data_rng(2);
  const Tensor x = random_tensor(data_rng, 5, 5);
  EXPECT_EQ(ad::dropout(tape.constant(x), 0.0, true, rng).value(), x);
  EXPECT_EQ(ad::dropout(tape.constant(x), 0.7, false, rng).value(), x);
}

TEST(Dropout, InvertedScalingKeepsTheMean) {
  ad::Tape tape;
  std::mt19937_64 rng(99);
  const std::size_t n = 10000;
  const Tensor out = ad::dropout(tape.constant(Tensor(1, n, 1.0)), 0.5, true, rng).value();
  double s = 0.0;
  for (double v : out.data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    s += v;
  }
  // Each entry is 2 * Bernoulli(0.5): sd 1 per entry.
  const double sigma = 1.0 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(s / n, 1.0, 3.0 * sigma);
}

TEST(Dropout, GradientFollowsTheMask) {
  ad::Tape tape;
  std::mt19937_64 rng(4);
  auto x = tape.leaf(Tensor(3, 3, 1.0));
  auto y = ad::dropout(x, 0.4, true, rng);
  tape.backward(ad::sum(y));
  EXPECT_EQ(tape.grad(x), y.value());
}

TEST(MseLoss, Examples) {
  ad::Tape tape;
  const Tensor a{{1.0}, {2.0}};
  EXPECT_EQ(ad::mse_loss(tape.constant(a), tape.constant(a)).scalar(), 0.0);
  EXPECT_EQ(ad::mse_loss(tape.constant(Tensor{{2.0}}), tape.constant(Tensor{{0.0}})).scalar(), 4.0);
  EXPECT_THROW(ad::mse_loss(tape.constant(Tensor()), tape.constant(Tensor())), DomainError);
  EXPECT_THROW(ad::mse_loss(tape.constant(Tensor(2, 1)), tape.constant(Tensor(3, 1))),
               DimensionError);
}

TEST(MseLoss, GradientIsTwiceResidualOverN) {
  std::mt19937_64 rng(8);
  const Tensor p = random_tensor(rng, 5, 1), t = random_tensor(rng, 5, 1);
  ad::Tape tape;
  auto pv = tape.leaf(p);
  tape.backward(ad::mse_loss(pv, tape.constant(t)));
  const Tensor g = tape.grad(pv);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(g[i], 2.0 * (p[i] - t[i]) / 5.0, 1e-15);
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const std::vector<Tensor> in{random_tensor(rng, 5, 1), random_tensor(rng, 5, 1)};
  Graph g = [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::mse_loss(v[0], v[1]); };
  EXPECT_LT(worst_gradient_error(g, in), 1e-6);
}

TEST(L1Mean, Examples) {
  ad::Tape tape;
  const Tensor a{{1.0}, {3.0}}, b{{0.0}, {1.0}};
  EXPECT_EQ(ad::l1_mean(tape.constant(a), tape.constant(a)).scalar(), 0.0);
  EXPECT_EQ(ad::l1_mean(tape.constant(a), tape.constant(b)).scalar(), 1.5);
  EXPECT_THROW(ad::l1_mean(tape.constant(Tensor()), tape.constant(Tensor())), DomainError);
}

TEST(L1Mean, SubgradientAtTiesIsZero) {
  ad::Tape tape;
  auto a = tape.leaf(Tensor{{1.0}, {2.0}});
  auto b = tape.leaf(Tensor{{1.0}, {0.0}});
  tape.backward(ad::l1_mean(a, b));
  EXPECT_EQ(tape.grad(a)[0], 0.0);
  EXPECT_EQ(tape.grad(b)[0], 0.0);
  EXPECT_EQ(tape.grad(a)[1], 0.5);
  EXPECT_EQ(tape.grad(b)[1], -0.5);
}

TEST(L1Mean, GradientMatchesFiniteDifferencesAwayFromTies) {
  std::mt19937_64 rng(21);
  Tensor a = random_tensor(rng, 6, 1), b = random_tensor(rng, 6, 1);
  for (std::size_t i = 0; i < 6; ++i) {
    if (std::abs(a[i] - b[i]) < 1e-3) a[i] += 0.01;
  }
  Graph g = [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::l1_mean(v[0], v[1]); };
  EXPECT_LT(worst_gradient_error(g, {a, b}), 1e-5);
}

TEST(Backward, AccumulatesOverMultipleConsumers) {
  ad::Tape tape;
  auto x = tape.leaf(Tensor{{3.0}});
  tape.backward(ad::add(x, x));
  EXPECT_EQ(tape.grad(x)[0], 2.0);
}

TEST(Backward, RootIsOneAndUnreachedNodesAreZero) {
  ad::Tape tape;
  auto x = tape.leaf(Tensor{{1.0, 2.0}});
  auto unused = tape.leaf(Tensor{{5.0, 6.0}});
  auto root = ad::sum(ad::scale(x, 3.0));
  tape.backward(root);
  EXPECT_EQ(tape.grad(root)[0], 1.0);
  EXPECT_EQ(tape.grad(unused), Tensor(1, 2, 0.0));
  EXPECT_EQ(tape.grad(x), (Tensor{{3.0, 3.0}}));
}

TEST(Backward, RequiresScalarRoot) {
  ad::Tape tape;
  auto x = tape.leaf(Tensor(2, 2, 1.0));
  EXPECT_THROW(tape.backward(x), DimensionError);
}

TEST(Backward, RepeatedBackwardDoesNotDoubleCount) {
  ad::Tape tape;
  auto x = tape.leaf(Tensor{{2.0}});
  auto y = ad::mul(x, x);
  tape.backward(y);
  tape.backward(y);
  EXPECT_EQ(tape.grad(x)[0], 4.0);
}

TEST(Composition, RandomScalarCompositionsMatchFiniteDifferences) {
  // Property: random two-layer compositions of every differentiable op.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = testing::random_size(rng, 1, 6);
    const std::size_t d = testing::random_size(rng, 1, 5);
    const std::size_t h = testing::random_size(rng, 1, 5);
    std::vector<Tensor> in{random_tensor(rng, n, d), random_tensor(rng, d, h),
                           random_tensor(rng, 1, h), random_tensor(rng, n, h),
                           random_tensor(rng, n, 1)};
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(testing::random_size(rng, 0, h - 1));
    Graph g = [&](ad::Tape&, const std::vector<ad::Var>& v) {
      auto z = ad::elu(ad::add_row(ad::matmul(v[0], v[1]), v[2]));
      auto m = ad::mul(z, v[3]);
      auto picked = ad::gather_rows(m, {n - 1, 0, n - 1});
      auto loss = ad::add(ad::scale(ad::sum(picked), 0.3), ad::sub(ad::sum(m), ad::sum(z)));
      auto ce = ad::softmax_cross_entropy(m, labels);
      return ad::add(ad::add(loss, ce), ad::mse_loss(ad::sum(v[4]), ad::sum(z)));
    };
    EXPECT_LT(worst_gradient_error(g, in), 1e-4) << "seed " << seed;
  }
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogClassCount) {
  ad::Tape tape;
  auto ce = ad::softmax_cross_entropy(tape.constant(Tensor(3, 4, 0.7)), {0, 1, 3});
  EXPECT_NEAR(ce.scalar(), std::log(4.0), 1e-15);
  EXPECT_THROW(ad::softmax_cross_entropy(tape.constant(Tensor(2, 2)), {0, 2}), DomainError);
}

TEST(Forward, BitReproducibleWithFixedSeed) {
  auto run = [] {
    ad::Tape tape;
    std::mt19937_64 rng(77);
    std::mt19937_64 data_rng(1);
    auto x = tape.constant(random_tensor(data_rng, 8, 4));
    auto w = tape.constant(random_tensor(data_rng, 4, 3));
    return ad::dropout(ad::elu(ad::matmul(x, w)), 0.3, true, rng).value();
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace adbcr
