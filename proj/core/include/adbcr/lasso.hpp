#pragma once

// l1-penalised linear baselines fitted by cyclic coordinate descent.
//
// lasso_fit minimises  (1/2n) |y - b - X w|^2 + alpha |w|_1  where the columns
// of X are z-scored internally and the intercept b is not penalised. The
// returned coefficients are mapped back to the original covariate units.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adbcr/data.hpp"
#include "adbcr/tensor.hpp"

namespace adbcr {

struct CoordinateDescentOptions {
  double tolerance = 1e-7;  // stop when the largest coefficient change is below this
  int max_sweeps = 10000;
  // Record the objective after every sweep (diagnostics and tests).
  bool record_objective = false;
};

struct CoordinateDescentResult {
  std::vector<double> weights;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective;  // after each sweep, when recorded
};

// Core solver without intercept on an already prepared design: minimises
// (1/2n) |y - X w|^2 + alpha |w|_1. Columns with zero norm keep weight 0.
CoordinateDescentResult coordinate_descent(const Tensor& x, std::span<const double> y, double alpha,
                                           const CoordinateDescentOptions& options = {});

// Soft-thresholding operator S(z, g) = sign(z) max(|z| - g, 0).
double soft_threshold(double z, double gamma);

struct LinearFit {
  double intercept = 0.0;
  std::vector<double> weights;  // original covariate units
  double alpha = 0.0;
  int sweeps = 0;
  bool converged = false;

  double predict(std::span<const double> row) const;
  bool operator==(const LinearFit&) const = default;
};

// Throws DomainError when n < 2, alpha < 0 or y does not match x.
// A constant column gets coefficient 0.
LinearFit lasso_fit(const Tensor& x, std::span<const double> y, double alpha,
                    const CoordinateDescentOptions& options = {});

enum class LassoVariant : std::uint8_t { single = 1, per_treatment = 2 };

const char* to_string(LassoVariant v);

// S-Lasso (single): one fit on [x, t]; the last weight is the treatment effect.
// T-Lasso (per_treatment): fits[0] on control rows, fits[1] on treated rows.
struct LassoModel {
  LassoVariant variant = LassoVariant::single;
  double alpha = 0.0;
  std::vector<LinearFit> fits;

  double predict(std::span<const double> row, int t) const;
  bool operator==(const LassoModel&) const = default;
};

// Fits the variant on the given dataset rows (their factual outcomes).
LassoModel fit_lasso_model(const Dataset& data, const std::vector<std::size_t>& rows,
                           LassoVariant variant, double alpha);

// tau_hat per row of x_raw.
std::vector<double> lasso_cate(const LassoModel& model, const Tensor& x);

// 10^k for k = -3..2.
std::vector<double> default_alpha_grid();

struct AlphaSelection {
  double alpha = 0.0;
  std::vector<double> cv_mse;  // per grid entry
};

// 5-fold cross-validated factual MSE minimiser over `grid`. Folds are dealt
// per treatment arm so every fold holds both arms whenever each arm has at
// least `folds` rows. Ties go to the larger alpha. Throws ConfigError on an
// empty grid and DatasetError when fewer than 2 rows remain for a fit.
AlphaSelection lasso_select_alpha(const Dataset& data, const std::vector<std::size_t>& rows,
                                  LassoVariant variant, const std::vector<double>& grid,
                                  std::uint64_t seed, int folds = 5);

// Lasso payload: u8 variant, f64 alpha, u64 fit count, then per fit:
// f64 intercept, f64s weights, f64 alpha, u64 sweeps, u8 converged.
void save_lasso(const std::filesystem::path& path, const LassoModel& model);
LassoModel load_lasso(const std::filesystem::path& path);

}  // namespace adbcr
