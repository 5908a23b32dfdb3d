#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "adbcr/errors.hpp"
#include "adbcr/objectives.hpp"
#include "test_support.hpp"

namespace adbcr {
namespace {

using testing::random_model;
using testing::random_tensor;

BatchView random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t unlabeled) {
  BatchView b;
  b.x = random_tensor(rng, n, d, -2.0, 2.0);
  b.t = testing::random_treatments(rng, n, 1);
  b.y = random_tensor(rng, n, 1, -2.0, 2.0);
  if (unlabeled > 0) b.unlabeled_x = random_tensor(rng, unlabeled, d, -2.0, 2.0);
  b.row_ids.resize(n);
  std::iota(b.row_ids.begin(), b.row_ids.end(), 0);
  return b;
}

// Oracle built only from per-head forward passes and plain loops.
double oracle_factual(const Model& m, const BatchView& b) {
  double total = 0.0;
  for (int t = 0; t < 2; ++t) {
    for (int r = 0; r < 2; ++r) {
      const Tensor h = forward_head(m, b.x, t, r);
      double s = 0.0;
      std::size_t c = 0;
      for (std::size_t i = 0; i < b.n(); ++i) {
        if (b.t[i] != t) continue;
        s += (h[i] - b.y[i]) * (h[i] - b.y[i]);
        ++c;
      }
      total += s / static_cast<double>(c);
    }
  }
  return total;
}

double oracle_distance(const Model& m, const BatchView& b, DistanceMetric metric) {
  double total = 0.0;
  for (int t = 0; t < 2; ++t) {
    const Tensor a0 = forward_head(m, b.x, t, 0), a1 = forward_head(m, b.x, t, 1);
    double s = 0.0;
    std::size_t c = 0;
    auto add = [&](double u, double v) {
      s += metric == DistanceMetric::l1 ? std::abs(u - v) : (u - v) * (u - v);
      ++c;
    };
    for (std::size_t i = 0; i < b.n(); ++i) {
      if (b.t[i] != t) add(a0[i], a1[i]);
    }
    if (b.unlabeled() > 0) {
      const Tensor u0 = forward_head(m, b.unlabeled_x, t, 0), u1 = forward_head(m, b.unlabeled_x, t, 1);
      for (std::size_t i = 0; i < b.unlabeled(); ++i) add(u0[i], u1[i]);
    }
    total += s / static_cast<double>(c);
  }
  return total;
}

void set_output_bias(Model& m, int t, int r, double value) {
  ParamSet& head = m.head(t, r);
  head[head.size() - 1].value = Tensor{{value}};
}

BatchView fixed_batch() {
  BatchView b;
  b.x = Tensor{{0.1, 0.2}, {0.3, -0.4}, {-1.0, 0.5}, {2.0, 0.0}};
  b.t = {0, 1, 0, 1};
  b.y = Tensor(4, 1, 1.0);
  b.row_ids = {0, 1, 2, 3};
  return b;
}

TEST(Objectives, ZeroModelExamples) {
  Model m = make_empty_model(random_model(1, 2, {3}, {3}).architecture());
  const BatchView b = fixed_batch();
  // Every head predicts 0 against targets of 1: four heads of unit error.
  EXPECT_DOUBLE_EQ(factual_loss(m, b), 4.0);
  EXPECT_DOUBLE_EQ(discriminative_distance(m, b, DistanceMetric::l1), 0.0);

  // Second head of each arm shifted by 1: unit gap on every pooled row.
  set_output_bias(m, 0, 1, 1.0);
  set_output_bias(m, 1, 1, 1.0);
  EXPECT_DOUBLE_EQ(discriminative_distance(m, b, DistanceMetric::l1), 2.0);
  EXPECT_DOUBLE_EQ(discriminative_distance(m, b, DistanceMetric::squared), 2.0);
  const CriterionBreakdown c = validation_criterion(m, b);
  EXPECT_DOUBLE_EQ(c.factual, 1.0 + 0.0 + 1.0 + 0.0);
  EXPECT_DOUBLE_EQ(c.criterion, c.factual + 2.0);
}

TEST(Objectives, MatchCompositionalOracleOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t d = testing::random_size(rng, 1, 5);
    const Model m = random_model(seed, d, {testing::random_size(rng, 1, 6)}, {3});
    const BatchView b = random_batch(rng, testing::random_size(rng, 2, 12), d,
                                     testing::random_size(rng, 0, 4));
    EXPECT_NEAR(factual_loss(m, b), oracle_factual(m, b), 1e-12);
    for (auto metric : {DistanceMetric::l1, DistanceMetric::squared}) {
      EXPECT_NEAR(discriminative_distance(m, b, metric), oracle_distance(m, b, metric), 1e-12);
    }
    const double w = 0.5 + static_cast<double>(seed % 3);
    const CriterionBreakdown c = validation_criterion(m, b, w);
    EXPECT_NEAR(c.criterion, oracle_factual(m, b) + w * oracle_distance(m, b, DistanceMetric::l1),
                1e-12);
  }
}

TEST(Objectives, UnlabeledRowsChangeOnlyTheDistance) {
  std::mt19937_64 rng(3);
  const Model m = random_model(3, 3, {5}, {4});
  BatchView b = random_batch(rng, 8, 3, 0);
  const double l = factual_loss(m, b), dist = discriminative_distance(m, b, DistanceMetric::l1);
  b.unlabeled_x = random_tensor(rng, 5, 3, -2.0, 2.0);
  EXPECT_EQ(factual_loss(m, b), l);
  EXPECT_NE(discriminative_distance(m, b, DistanceMetric::l1), dist);
}

TEST(Objectives, NonNegativeAndPermutationInvariant) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const Model m = random_model(seed, 3, {4}, {4});
    const BatchView b = random_batch(rng, 10, 3, 3);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    BatchView p = b;
    p.x = select_rows(b.x, perm);
    p.y = select_rows(b.y, perm);
    for (std::size_t i = 0; i < 10; ++i) p.t[i] = b.t[perm[i]];
    for (auto metric : {DistanceMetric::l1, DistanceMetric::squared}) {
      const double dv = discriminative_distance(m, b, metric);
      EXPECT_GE(dv, 0.0);
      EXPECT_NEAR(discriminative_distance(m, p, metric), dv, 1e-12);
    }
    EXPECT_GE(factual_loss(m, b), 0.0);
    EXPECT_NEAR(factual_loss(m, p), factual_loss(m, b), 1e-12);
  }
}

TEST(Objectives, MetricsAgreeWhenEveryGapIsZeroOrOne) {
  Model m = make_empty_model(random_model(1, 2, {3}, {3}).architecture());
  set_output_bias(m, 1, 1, 1.0);
  const BatchView b = fixed_batch();
  EXPECT_DOUBLE_EQ(discriminative_distance(m, b, DistanceMetric::l1),
                   discriminative_distance(m, b, DistanceMetric::squared));
}

TEST(Objectives, MissingArmsRaiseBatchCompositionError) {
  const Model m = random_model(2, 2, {3}, {3});
  BatchView b = fixed_batch();
  b.t = {1, 1, 1, 1};
  EXPECT_THROW(factual_loss(m, b), BatchCompositionError);
  EXPECT_THROW(discriminative_distance(m, b, DistanceMetric::l1), BatchCompositionError);
  // Unlabeled rows refill both pools, but the factual term still lacks arm 0.
  b.unlabeled_x = Tensor(2, 2, 0.5);
  EXPECT_NO_THROW(discriminative_distance(m, b, DistanceMetric::l1));
  EXPECT_THROW(factual_loss(m, b), BatchCompositionError);
}

TEST(Objectives, MisalignedViewRaisesDimensionError) {
  BatchView b = fixed_batch();
  b.t.pop_back();
  EXPECT_THROW(b.validate(), DimensionError);
  EXPECT_THROW(parse_metric("l3"), ConfigError);
  EXPECT_EQ(parse_metric("squared"), DistanceMetric::squared);
}

}  // namespace
}  // namespace adbcr
