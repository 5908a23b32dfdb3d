#include "adbcr/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "adbcr/errors.hpp"
#include "adbcr/model.hpp"

namespace adbcr {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": length mismatch");
  if (a.empty()) throw DomainError(std::string(what) + ": empty input");
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double pehe(std::span<const double> tau_true, std::span<const double> tau_hat) {
  return mean_squared_error(tau_hat, tau_true);
}

double ate_error(std::span<const double> tau_true, std::span<const double> tau_hat) {
  check_pair(tau_true, tau_hat, "ate_error");
  return std::abs(mean(tau_true) - mean(tau_hat));
}

double mean_squared_error(std::span<const double> prediction, std::span<const double> target) {
  check_pair(prediction, target, "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = prediction[i] - target[i];
    s += e * e;
  }
  return s / static_cast<double>(target.size());
}

std::vector<double> nn_imputed_cate(const Tensor& x, const std::vector<int>& t,
                                    std::span<const double> y) {
  const std::size_t n = t.size();
  if (x.rows() != n || y.size() != n) throw DimensionError("nn_pehe: x, t and y are not aligned");
  std::array<std::vector<std::size_t>, 2> arm;
  for (std::size_t i = 0; i < n; ++i) arm[static_cast<std::size_t>(t[i])].push_back(i);
  if (arm[0].empty() || arm[1].empty()) throw DomainError("nn_pehe: a treatment arm is empty");

  const Tensor z = FeatureScaler::fit(x).apply(x);
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = arm[static_cast<std::size_t>(1 - t[i])];
    std::size_t best = pool.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (auto j : pool) {
      double d = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const double diff = z(i, c) - z(j, c);
        d += diff * diff;
      }
      if (d < best_d) {  // pool is ascending, so ties keep the lowest index
        best_d = d;
        best = j;
      }
    }
    tau[i] = t[i] == 1 ? y[i] - y[best] : y[best] - y[i];
  }
  return tau;
}

double nn_pehe(const Tensor& x, const std::vector<int>& t, std::span<const double> y,
               std::span<const double> tau_hat) {
  const auto tau = nn_imputed_cate(x, t, y);
  return pehe(tau, tau_hat);
}

double nn_pehe(const Dataset& data, const std::vector<std::size_t>& rows,
               std::span<const double> tau_hat) {
  std::vector<int> t;
  std::vector<double> y;
  for (auto r : rows) {
    t.push_back(data.t[r]);
    y.push_back(data.y[r]);
  }
  return nn_pehe(select_rows(data.x, rows), t, y, tau_hat);
}

MeanSe mean_and_standard_error(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean_and_standard_error: empty input");
  MeanSe r;
  r.mean = mean(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    const double n = static_cast<double>(values.size());
    r.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return r;
}

}  // namespace adbcr
