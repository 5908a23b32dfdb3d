#include "adbcr/evaluation.hpp"

#include <cmath>

#include <json.hpp>

#include "adbcr/binary_io.hpp"
#include "adbcr/errors.hpp"
#include "adbcr/metrics.hpp"

namespace adbcr {

PotentialOutcomes Estimator::predict(const Tensor& x_raw) const {
  if (const auto* m = std::get_if<Model>(&fitted)) return predict_potential_outcomes(*m, x_raw);
  const auto& lasso = std::get<LassoModel>(fitted);
  PotentialOutcomes out;
  out.y0.resize(x_raw.rows());
  out.y1.resize(x_raw.rows());
  for (std::size_t i = 0; i < x_raw.rows(); ++i) {
    out.y0[i] = lasso.predict(x_raw.row_span(i), 0);
    out.y1[i] = lasso.predict(x_raw.row_span(i), 1);
  }
  return out;
}

std::string Estimator::family() const {
  if (const auto* m = std::get_if<Model>(&fitted)) {
    return m->has_discriminator() ? "danncr" : "network";
  }
  return to_string(std::get<LassoModel>(fitted).variant);
}

Estimator load_estimator(const std::filesystem::path& path) {
  Estimator e;
  if (peek_checkpoint_kind(path) == CheckpointKind::lasso) {
    e.fitted = load_lasso(path);
    return e;
  }
  auto ckpt = load_checkpoint(path);
  e.fitted = std::move(ckpt.model);
  e.meta = std::move(ckpt.meta);
  return e;
}

void save_estimator(const std::filesystem::path& path, const Estimator& estimator) {
  if (const auto* m = std::get_if<Model>(&estimator.fitted)) {
    save_checkpoint(path, *m, estimator.meta);
  } else {
    save_lasso(path, std::get<LassoModel>(estimator.fitted));
  }
}

MetricsReport evaluate(const Estimator& estimator, const Dataset& data,
                       const std::vector<std::size_t>& rows, const std::string& split_label) {
  if (rows.empty()) throw DatasetError("evaluate: no rows in split '" + split_label + "'");
  MetricsReport r;
  r.split = split_label;
  r.n = rows.size();
  r.config_fingerprint = estimator.meta.config_fingerprint;
  r.model = estimator.family();
  if (!estimator.meta.criterion.empty()) r.validation_criterion = estimator.meta.criterion_value;

  const auto po = estimator.predict(select_rows(data.x, rows));
  std::vector<double> factual_hat(rows.size()), factual(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    factual_hat[i] = data.t[rows[i]] == 1 ? po.y1[i] : po.y0[i];
    factual[i] = data.y[rows[i]];
  }
  r.factual_mse = mean_squared_error(factual_hat, factual);

  if (data.has_ground_truth()) {
    std::vector<double> tau(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) tau[i] = (*data.mu1)[rows[i]] - (*data.mu0)[rows[i]];
    const auto tau_hat = po.cate();
    r.sqrt_pehe = std::sqrt(pehe(tau, tau_hat));
    r.ate_error = ate_error(tau, tau_hat);
  } else {
    r.reason = "dataset has no mu0/mu1 ground truth";
  }
  const bool finite = std::isfinite(r.factual_mse) && (!r.sqrt_pehe || std::isfinite(*r.sqrt_pehe)) &&
                      (!r.ate_error || std::isfinite(*r.ate_error));
  r.failed = !finite;
  return r;
}

std::vector<std::size_t> within_sample_rows(const Dataset& data) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.split[i] != Split::test) rows.push_back(i);
  }
  return rows;
}

EvaluationSummary evaluate_splits(const Estimator& estimator, const Dataset& data,
                                  std::uint64_t seed) {
  if (!data.has_split()) throw DatasetError("evaluate: dataset has no split assignment");
  EvaluationSummary s;
  s.within_sample = evaluate(estimator, data, within_sample_rows(data), "within");
  s.out_of_sample = evaluate(estimator, data, data.rows(Split::test), "out");
  s.within_sample.seed = s.out_of_sample.seed = seed;
  return s;
}

namespace {

nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  auto opt = [](const auto& v) -> nlohmann::ordered_json {
    if (v) return *v;
    return nullptr;
  };
  j["split"] = r.split;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["config_fingerprint"] = r.config_fingerprint;
  j["model"] = r.model;
  j["factual_mse"] = r.factual_mse;
  j["sqrt_pehe"] = opt(r.sqrt_pehe);
  j["ate_error"] = opt(r.ate_error);
  j["validation_criterion"] = opt(r.validation_criterion);
  j["reason"] = opt(r.reason);
  j["failed"] = r.failed;
  return j;
}

}  // namespace

std::string to_json(const MetricsReport& report) { return report_json(report).dump(2); }

std::string to_json(const EvaluationSummary& summary) {
  nlohmann::ordered_json j;
  j["within_sample"] = report_json(summary.within_sample);
  j["out_of_sample"] = report_json(summary.out_of_sample);
  return j.dump(2);
}

}  // namespace adbcr
