#pragma once

// Uniform evaluation of fitted estimators (networks or lasso baselines).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adbcr/checkpoint.hpp"
#include "adbcr/data.hpp"
#include "adbcr/lasso.hpp"
#include "adbcr/model.hpp"

namespace adbcr {

// A fitted CATE estimator of either family, with its selection metadata.
struct Estimator {
  std::variant<Model, LassoModel> fitted;
  CheckpointMeta meta;

  PotentialOutcomes predict(const Tensor& x_raw) const;
  std::vector<double> cate(const Tensor& x_raw) const { return predict(x_raw).cate(); }
  std::string family() const;
};

// Dispatches on the stored checkpoint kind. Lasso metadata is not persisted
// and comes back empty.
Estimator load_estimator(const std::filesystem::path& path);
void save_estimator(const std::filesystem::path& path, const Estimator& estimator);

struct MetricsReport {
  std::string split;  // "within" (train+val), "out" (test), or a split name
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::string model;
  double factual_mse = 0.0;
  std::optional<double> sqrt_pehe;
  std::optional<double> ate_error;
  std::optional<double> validation_criterion;
  // Why sqrt_pehe and ate_error are absent, when they are.
  std::optional<std::string> reason;
  bool failed = false;
};

// Metrics over `rows` using the factual outcomes of those rows and, when the
// dataset has mu0/mu1, the true effects.
MetricsReport evaluate(const Estimator& estimator, const Dataset& data,
                       const std::vector<std::size_t>& rows, const std::string& split_label);

struct EvaluationSummary {
  MetricsReport within_sample;  // train + validation rows
  MetricsReport out_of_sample;  // test rows
};

// Throws DatasetError without a split assignment or when the test split is empty.
EvaluationSummary evaluate_splits(const Estimator& estimator, const Dataset& data,
                                  std::uint64_t seed);

std::vector<std::size_t> within_sample_rows(const Dataset& data);

// JSON object with keys in a fixed order: split, n, seed, config_fingerprint,
// model, factual_mse, sqrt_pehe, ate_error, validation_criterion, reason,
// failed. Absent optionals are written as null.
std::string to_json(const MetricsReport& report);
std::string to_json(const EvaluationSummary& summary);

}  // namespace adbcr
