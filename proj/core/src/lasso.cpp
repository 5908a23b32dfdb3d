#include "adbcr/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "adbcr/binary_io.hpp"
#include "adbcr/errors.hpp"
#include "adbcr/random.hpp"

namespace adbcr {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

CoordinateDescentResult coordinate_descent(const Tensor& x, std::span<const double> y, double alpha,
                                           const CoordinateDescentOptions& options) {
  const std::size_t n = x.rows(), d = x.cols();
  if (y.size() != n) throw DimensionError("coordinate_descent: y length does not match x rows");
  if (n == 0) throw DomainError("coordinate_descent: no rows");
  if (!(alpha >= 0.0)) throw DomainError("coordinate_descent: alpha must be non-negative");
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> col_sq(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) col_sq[j] += x(i, j) * x(i, j);
  }
  for (auto& c : col_sq) c *= inv_n;

  CoordinateDescentResult res;
  res.weights.assign(d, 0.0);
  std::vector<double> residual(y.begin(), y.end());
  auto objective = [&] {
    double sq = 0.0, l1 = 0.0;
    for (double r : residual) sq += r * r;
    for (double w : res.weights) l1 += std::abs(w);
    return 0.5 * inv_n * sq + alpha * l1;
  };

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (col_sq[j] == 0.0) continue;
      const double old = res.weights[j];
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += x(i, j) * residual[i];
      rho = rho * inv_n + col_sq[j] * old;
      const double updated = soft_threshold(rho, alpha) / col_sq[j];
      const double delta = updated - old;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= x(i, j) * delta;
        res.weights[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    res.sweeps = sweep + 1;
    if (options.record_objective) res.objective.push_back(objective());
    if (max_change < options.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double LinearFit::predict(std::span<const double> row) const {
  if (row.size() != weights.size()) throw DimensionError("linear fit: wrong covariate count");
  double v = intercept;
  for (std::size_t j = 0; j < row.size(); ++j) v += weights[j] * row[j];
  return v;
}

LinearFit lasso_fit(const Tensor& x, std::span<const double> y, double alpha,
                    const CoordinateDescentOptions& options) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw DomainError("lasso_fit: needs at least 2 rows");
  if (y.size() != n) throw DimensionError("lasso_fit: y length does not match x rows");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("lasso_fit: alpha must be >= 0");

  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  }
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n));

  Tensor xs(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) xs(i, j) = sd[j] > 0.0 ? (x(i, j) - mean[j]) / sd[j] : 0.0;
  }
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - y_mean;

  const auto cd = coordinate_descent(xs, yc, alpha, options);
  LinearFit fit;
  fit.alpha = alpha;
  fit.sweeps = cd.sweeps;
  fit.converged = cd.converged;
  fit.weights.assign(d, 0.0);
  fit.intercept = y_mean;
  for (std::size_t j = 0; j < d; ++j) {
    if (sd[j] == 0.0) continue;
    fit.weights[j] = cd.weights[j] / sd[j];
    fit.intercept -= fit.weights[j] * mean[j];
  }
  return fit;
}

const char* to_string(LassoVariant v) {
  return v == LassoVariant::single ? "s-lasso" : "t-lasso";
}

double LassoModel::predict(std::span<const double> row, int t) const {
  if (variant == LassoVariant::single) {
    std::vector<double> with_t(row.begin(), row.end());
    with_t.push_back(static_cast<double>(t));
    return fits.at(0).predict(with_t);
  }
  return fits.at(static_cast<std::size_t>(t)).predict(row);
}

namespace {

Tensor design(const Dataset& data, const std::vector<std::size_t>& rows, bool with_t) {
  const std::size_t d = data.d();
  Tensor x(rows.size(), d + (with_t ? 1 : 0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = data.x(rows[i], j);
    if (with_t) x(i, d) = static_cast<double>(data.t[rows[i]]);
  }
  return x;
}

std::vector<double> outcomes(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<double> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(data.y[r]);
  return y;
}

}  // namespace

LassoModel fit_lasso_model(const Dataset& data, const std::vector<std::size_t>& rows,
                           LassoVariant variant, double alpha) {
  LassoModel model;
  model.variant = variant;
  model.alpha = alpha;
  if (variant == LassoVariant::single) {
    if (rows.size() < 2) throw DatasetError("s-lasso: needs at least 2 rows");
    model.fits.push_back(lasso_fit(design(data, rows, true), outcomes(data, rows), alpha));
    return model;
  }
  for (int t = 0; t < 2; ++t) {
    std::vector<std::size_t> arm;
    for (auto r : rows) {
      if (data.t[r] == t) arm.push_back(r);
    }
    if (arm.size() < 2) {
      throw DatasetError("t-lasso: treatment arm " + std::to_string(t) + " has fewer than 2 rows");
    }
    model.fits.push_back(lasso_fit(design(data, arm, false), outcomes(data, arm), alpha));
  }
  return model;
}

std::vector<double> lasso_cate(const LassoModel& model, const Tensor& x) {
  std::vector<double> tau(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    tau[i] = model.predict(x.row_span(i), 1) - model.predict(x.row_span(i), 0);
  }
  return tau;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int k = -3; k <= 2; ++k) grid.push_back(std::pow(10.0, k));
  return grid;
}

AlphaSelection lasso_select_alpha(const Dataset& data, const std::vector<std::size_t>& rows,
                                  LassoVariant variant, const std::vector<double>& grid,
                                  std::uint64_t seed, int folds) {
  if (grid.empty()) throw ConfigError("lasso_select_alpha: empty alpha grid");
  if (folds < 2) throw ConfigError("lasso_select_alpha: need at least 2 folds");

  // Deal each arm's shuffled rows round-robin, continuing the fold counter
  // across arms so fold sizes differ by at most one.
  auto rng = substream(seed, "lasso/folds");
  std::vector<int> fold_of(rows.size());
  std::size_t next = 0;
  for (int t = 0; t < 2; ++t) {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (data.t[rows[i]] == t) positions.push_back(i);
    }
    std::shuffle(positions.begin(), positions.end(), rng);
    for (auto p : positions) fold_of[p] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
  }

  AlphaSelection sel;
  for (double alpha : grid) {
    double sq = 0.0;
    std::size_t count = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> fit_rows, held_rows;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        (fold_of[i] == f ? held_rows : fit_rows).push_back(rows[i]);
      }
      if (held_rows.empty()) continue;
      const LassoModel m = fit_lasso_model(data, fit_rows, variant, alpha);
      for (auto r : held_rows) {
        const double e = m.predict(data.x.row_span(r), data.t[r]) - data.y[r];
        sq += e * e;
        ++count;
      }
    }
    sel.cv_mse.push_back(sq / static_cast<double>(count));
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double mse = sel.cv_mse[g];
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    if (mse < best - tol || (std::abs(mse - best) <= tol && grid[g] > sel.alpha)) {
      best = std::min(best, mse);
      sel.alpha = grid[g];
    }
  }
  return sel;
}

void save_lasso(const std::filesystem::path& path, const LassoModel& model) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(model.variant));
  w.f64(model.alpha);
  w.u64(model.fits.size());
  for (const auto& f : model.fits) {
    w.f64(f.intercept);
    w.f64s(f.weights);
    w.f64(f.alpha);
    w.u64(static_cast<std::uint64_t>(f.sweeps));
    w.u8(f.converged ? 1 : 0);
  }
  write_container(path, CheckpointKind::lasso, w.bytes());
}

LassoModel load_lasso(const std::filesystem::path& path) {
  ByteReader r = open_container(path, CheckpointKind::lasso);
  LassoModel m;
  const auto variant = r.u8();
  if (variant != 1 && variant != 2) throw LoadError("lasso checkpoint: unknown variant");
  m.variant = static_cast<LassoVariant>(variant);
  m.alpha = r.f64();
  const auto count = r.u64();
  if (count != (m.variant == LassoVariant::single ? 1u : 2u)) {
    throw LoadError("lasso checkpoint: wrong number of fits");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    LinearFit f;
    f.intercept = r.f64();
    f.weights = r.f64s();
    f.alpha = r.f64();
    f.sweeps = static_cast<int>(r.u64());
    f.converged = r.u8() != 0;
    m.fits.push_back(std::move(f));
  }
  if (!r.at_end()) throw LoadError("lasso checkpoint: trailing bytes");
  return m;
}

}  // namespace adbcr
