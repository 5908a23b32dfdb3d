#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

#include "adbcr/errors.hpp"
#include "adbcr/metrics.hpp"
#include "test_support.hpp"

namespace adbcr {
namespace {

using testing::random_tensor;
using testing::random_vector;

double oracle_pehe(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += (long double)(a[i] - b[i]) * (a[i] - b[i]);
  return static_cast<double>(s / a.size());
}

double oracle_ate_error(const std::vector<double>& a, const std::vector<double>& b) {
  long double sa = 0.0L, sb = 0.0L;
  for (double v : a) sa += v;
  for (double v : b) sb += v;
  return std::abs(static_cast<double>(sa / a.size() - sb / b.size()));
}

// Pairwise sort of (distance, index) over z-scored columns.
std::vector<double> oracle_nn_tau(const Tensor& x, const std::vector<int>& t,
                                  const std::vector<double>& y) {
  const std::size_t n = x.rows(), d = x.cols();
  Tensor z = x;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = x(i, j);
    const double m = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double v = 0.0;
    for (double c : col) v += (c - m) * (c - m);
    const double sd = v > 0.0 ? std::sqrt(v / n) : 1.0;
    for (std::size_t i = 0; i < n; ++i) z(i, j) = (x(i, j) - m) / sd;
  }
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::tuple<double, std::size_t>> cand;
    for (std::size_t k = 0; k < n; ++k) {
      if (t[k] == t[i]) continue;
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) dist += (z(i, j) - z(k, j)) * (z(i, j) - z(k, j));
      cand.emplace_back(dist, k);
    }
    const std::size_t nn = std::get<1>(*std::min_element(cand.begin(), cand.end()));
    tau[i] = t[i] == 1 ? y[i] - y[nn] : y[nn] - y[i];
  }
  return tau;
}

TEST(Metrics, Examples) {
  const std::vector<double> tau{1.0, 2.0, 3.0}, hat{1.0, 2.0, 5.0};
  EXPECT_DOUBLE_EQ(pehe(tau, hat), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(ate_error(tau, hat), 2.0 / 3.0);
  EXPECT_EQ(pehe(tau, tau), 0.0);
  EXPECT_EQ(mean_squared_error(hat, tau), pehe(tau, hat));
  EXPECT_THROW(pehe(std::vector<double>{}, std::vector<double>{}), DomainError);
  EXPECT_THROW(ate_error(tau, std::vector<double>{1.0}), DimensionError);
}

TEST(Metrics, MatchBruteForceOraclesOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const auto tau = random_vector(rng, 20, -3.0, 3.0);
    const auto hat = random_vector(rng, 20, -3.0, 3.0);
    EXPECT_NEAR(pehe(tau, hat), oracle_pehe(tau, hat), 1e-10);
    EXPECT_NEAR(ate_error(tau, hat), oracle_ate_error(tau, hat), 1e-10);

    const Tensor x = random_tensor(rng, 20, testing::random_size(rng, 1, 4), -2.0, 2.0);
    const auto t = testing::random_treatments(rng, 20, 1);
    const auto y = random_vector(rng, 20, -5.0, 5.0);
    EXPECT_NEAR(nn_pehe(x, t, y, hat), oracle_pehe(oracle_nn_tau(x, t, y), hat), 1e-10);
  }
}

TEST(Metrics, PeheBoundsTheAteError) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const std::size_t n = testing::random_size(rng, 1, 40);
    const auto tau = random_vector(rng, n, -3.0, 3.0), hat = random_vector(rng, n, -3.0, 3.0);
    double mean_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_abs += std::abs(tau[i] - hat[i]);
    mean_abs /= static_cast<double>(n);
    EXPECT_GE(pehe(tau, hat), 0.0);
    EXPECT_LE(ate_error(tau, hat), mean_abs + 1e-12);
    EXPECT_LE(ate_error(tau, hat), std::sqrt(pehe(tau, hat)) + 1e-12);
  }
}

TEST(NnPehe, TwoRowsImputeEachOther) {
  const Tensor x{{0.0}, {1.0}};
  const std::vector<int> t{0, 1};
  const std::vector<double> y{1.0, 4.0};
  EXPECT_EQ(nn_imputed_cate(x, t, y), (std::vector<double>{3.0, 3.0}));
  EXPECT_EQ(nn_pehe(x, t, y, std::vector<double>{3.0, 1.0}), 2.0);
  EXPECT_THROW(nn_imputed_cate(x, {1, 1}, y), DomainError);
}

TEST(NnPehe, TiesGoToTheLowestIndex) {
  // Rows 1 and 2 are equidistant from row 0.
  const Tensor x{{0.0}, {-1.0}, {1.0}};
  const std::vector<int> t{0, 1, 1};
  const std::vector<double> y{0.0, 5.0, 9.0};
  EXPECT_EQ(nn_imputed_cate(x, t, y)[0], 5.0);
}

TEST(NnPehe, InvariantUnderRowPermutation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor(rng, 15, 3);
    const auto t = testing::random_treatments(rng, 15, 1);
    const auto y = random_vector(rng, 15);
    const auto hat = random_vector(rng, 15);
    std::vector<std::size_t> perm(15);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> tp(15);
    std::vector<double> yp(15), hp(15);
    for (std::size_t i = 0; i < 15; ++i) {
      tp[i] = t[perm[i]];
      yp[i] = y[perm[i]];
      hp[i] = hat[perm[i]];
    }
    // Continuous covariates make distance ties vanishingly unlikely.
    EXPECT_NEAR(nn_pehe(select_rows(x, perm), tp, yp, hp), nn_pehe(x, t, y, hat), 1e-12);
  }
}

TEST(MeanSe, Examples) {
  const MeanSe one = mean_and_standard_error(std::vector<double>{2.0});
  EXPECT_EQ(one.mean, 2.0);
  EXPECT_EQ(one.standard_error, 0.0);
  const MeanSe r = mean_and_standard_error(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  // sample sd sqrt(5/3), divided by 2.
  EXPECT_NEAR(r.standard_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
}

}  // namespace
}  // namespace adbcr
