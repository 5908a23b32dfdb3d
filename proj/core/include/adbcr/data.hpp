#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adbcr/tensor.hpp"

namespace adbcr {

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

const char* to_string(Split s);

// Observational dataset with optional ground truth.
//
// Rows hold covariates x, a binary treatment t and the factual outcome y.
// When the data come from a known generating process, mu0/mu1 hold the
// noiseless potential outcomes and y_cf the noisy counterfactual outcome.
// `unlabeled_x` holds outcome-free covariate rows. Rows listed in `stripped`
// keep their ground truth for evaluation but are hidden from training.
struct Dataset {
  Tensor x;
  std::vector<int> t;
  std::vector<double> y;
  std::optional<std::vector<double>> y_cf;
  std::optional<std::vector<double>> mu0;
  std::optional<std::vector<double>> mu1;
  std::vector<std::string> covariate_names;
  Tensor unlabeled_x;
  std::vector<Split> split;    // empty when no assignment has been made
  std::vector<bool> stripped;  // empty means nothing stripped

  std::size_t n() const { return t.size(); }
  std::size_t d() const { return x.cols(); }
  bool has_split() const { return !split.empty(); }
  bool has_ground_truth() const { return mu0.has_value() && mu1.has_value(); }
  bool is_stripped(std::size_t row) const { return !stripped.empty() && stripped[row]; }

  // mu1 - mu0; throws DomainError without ground truth.
  std::vector<double> true_cate() const;

  // All rows of a split, in ascending order (includes stripped rows).
  std::vector<std::size_t> rows(Split s) const;
  // Rows of a split whose outcomes are visible to training.
  std::vector<std::size_t> labeled_rows(Split s) const;

  // Throws DatasetError on misaligned lengths or non-binary treatments.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// Per-arm row counts over `rows`.
std::array<std::size_t, 2> arm_counts(const Dataset& data, const std::vector<std::size_t>& rows);

// CSV interchange format. Header names: `t`, `y_factual` (mandatory),
// `y_cfactual`, `mu0`, `mu1`, `split` (optional, values train/val/test/unlabeled);
// every other column is a covariate, in file order. Rows whose split is
// `unlabeled` leave t and outcome cells empty and populate `unlabeled_x`.
// Reals are written with 17 significant digits.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text, const std::string& source = "<memory>");
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

struct SplitFractions {
  double train = 0.63;
  double validation = 0.27;
  double test = 0.10;
};

// Random treatment-stratified assignment with exact total split sizes
// (largest-remainder rounding). Throws DatasetError when a non-empty split
// would lack a treatment arm.
Dataset split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed);

enum class Nonlinearity { linear, quadratic, exp };

const char* to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(const std::string& text);

struct DgpConfig {
  std::size_t n = 1000;
  std::size_t d = 10;
  double bias_strength = 2.0;
  double effect_heterogeneity = 1.0;
  double noise_sd = 0.5;
  double base_effect = 4.0;
  // Standard deviation of the curvature coefficients, times 1/sqrt(d).
  double outcome_curvature_scale = 0.5;
  double effect_curvature_scale = 1.0;
  Nonlinearity nonlinearity = Nonlinearity::quadratic;
  std::uint64_t seed = 0;

  // Throws ConfigError when n < 50, d < 2 or noise_sd < 0.
  void validate() const;
};

inline constexpr double kPropensityMin = 0.05;
inline constexpr double kPropensityMax = 0.95;

// Coefficients of the generating process, recorded for exact reproduction.
struct DgpCoefficients {
  std::vector<double> propensity_direction;  // unit vector
  std::vector<double> outcome_linear;
  std::vector<double> outcome_curvature;
  std::vector<double> effect_linear;
  std::vector<double> effect_curvature;
};

struct GeneratedData {
  Dataset data;  // split assigned with the default fractions
  DgpCoefficients coefficients;
  std::vector<double> propensity;
};

// x ~ N(0, I); e(x) = clip(sigmoid(bias * <w, x>), 0.05, 0.95); t ~ Bernoulli(e);
// mu0 = f(x); mu1 = mu0 + base_effect + heterogeneity * g(x);
// y = mu_t + noise, y_cf = mu_{1-t} + independent noise.
GeneratedData generate(const DgpConfig& config);

// The clipped propensity map used by the generator.
double clipped_propensity(double logit);

// Ground-truth sidecar (JSON) holding the configuration and coefficients.
std::string ground_truth_json(const DgpConfig& config, const DgpCoefficients& coefficients);

// Moves the covariates of `rows` into the unlabeled pool and marks the rows
// stripped. Throws ConfigError if any row belongs to the validation split.
Dataset strip_outcomes(const Dataset& data, const std::vector<std::size_t>& rows);

}  // namespace adbcr
