#include "adbcr/objectives.hpp"

#include "adbcr/errors.hpp"

namespace adbcr {

const char* to_string(DistanceMetric m) { return m == DistanceMetric::l1 ? "l1" : "squared"; }

DistanceMetric parse_metric(const std::string& text) {
  if (text == "l1") return DistanceMetric::l1;
  if (text == "squared") return DistanceMetric::squared;
  throw ConfigError("unknown distance metric '" + text + "' (expected l1 or squared)");
}

void BatchView::validate() const {
  if (x.rows() != t.size() || y.rows() != t.size() || (y.rows() > 0 && y.cols() != 1)) {
    throw DimensionError("batch: x, t and y are not aligned");
  }
  if (unlabeled_x.rows() > 0 && unlabeled_x.cols() != x.cols()) {
    throw DimensionError("batch: unlabeled rows have a different column count");
  }
}

HeadOutputs forward_heads(const BoundModel& bound, const BatchView& batch,
                          const ForwardOptions& opts, bool include_unlabeled) {
  batch.validate();
  ad::Tape& tape = *bound.phi.front().tape;
  HeadOutputs out;
  out.labeled_rows = batch.n();
  out.unlabeled_rows = include_unlabeled ? batch.unlabeled() : 0;
  Tensor input = out.unlabeled_rows > 0 ? vstack(batch.x, batch.unlabeled_x) : batch.x;
  out.representation = forward_phi(bound, tape.constant(std::move(input)), opts);
  const int heads = bound.model->architecture().heads_per_arm;
  for (int t = 0; t < kNumArms; ++t) {
    for (int r = 0; r < heads; ++r) {
      out.heads[t].push_back(forward_head(bound, out.representation, t, r, opts));
    }
  }
  return out;
}

namespace {

std::array<std::vector<std::size_t>, kNumArms> rows_by_arm(const BatchView& batch) {
  std::array<std::vector<std::size_t>, kNumArms> rows;
  for (std::size_t i = 0; i < batch.n(); ++i) rows[static_cast<std::size_t>(batch.t[i])].push_back(i);
  return rows;
}

}  // namespace

ad::Var factual_loss(const HeadOutputs& out, const BatchView& batch) {
  const auto arms = rows_by_arm(batch);
  ad::Tape& tape = *out.representation.tape;
  ad::Var total{};
  bool first = true;
  for (int t = 0; t < kNumArms; ++t) {
    const auto& rows = arms[static_cast<std::size_t>(t)];
    if (rows.empty()) {
      throw BatchCompositionError("factual loss: treatment arm " + std::to_string(t) +
                                  " has no rows in the batch");
    }
    ad::Var target = tape.constant(select_rows(batch.y, rows));
    for (const auto& head : out.heads[t]) {
      ad::Var term = ad::mse_loss(ad::gather_rows(head, rows), target);
      total = first ? term : ad::add(total, term);
      first = false;
    }
  }
  return total;
}

ad::Var discriminative_distance(const HeadOutputs& out, const BatchView& batch,
                                DistanceMetric metric) {
  if (out.heads[0].size() < 2) throw ConfigError("discriminative distance needs two heads per arm");
  const auto arms = rows_by_arm(batch);
  ad::Tape& tape = *out.representation.tape;
  tape.mark(kDistanceMark);
  ad::Var total{};
  for (int t = 0; t < kNumArms; ++t) {
    std::vector<std::size_t> pool = arms[static_cast<std::size_t>(1 - t)];
    for (std::size_t u = 0; u < out.unlabeled_rows; ++u) pool.push_back(out.labeled_rows + u);
    if (pool.empty()) {
      throw BatchCompositionError("discriminative distance: empty counterfactual pool for arm " +
                                  std::to_string(t));
    }
    ad::Var a = ad::gather_rows(out.heads[t][0], pool);
    ad::Var b = ad::gather_rows(out.heads[t][1], std::move(pool));
    ad::Var term = metric == DistanceMetric::l1 ? ad::l1_mean(a, b) : ad::mse_loss(a, b);
    total = t == 0 ? term : ad::add(total, term);
  }
  return total;
}

double factual_loss(const Model& model, const BatchView& batch) {
  ad::Tape tape;
  BoundModel b = bind(model, tape, Trainable::none);
  HeadOutputs out = forward_heads(b, batch, ForwardOptions{}, false);
  return factual_loss(out, batch).scalar();
}

double discriminative_distance(const Model& model, const BatchView& batch, DistanceMetric metric) {
  ad::Tape tape;
  BoundModel b = bind(model, tape, Trainable::none);
  HeadOutputs out = forward_heads(b, batch, ForwardOptions{}, true);
  return discriminative_distance(out, batch, metric).scalar();
}

CriterionBreakdown validation_criterion(const Model& model, const BatchView& batch,
                                        double distance_weight) {
  ad::Tape tape;
  BoundModel b = bind(model, tape, Trainable::none);
  HeadOutputs out = forward_heads(b, batch, ForwardOptions{}, true);
  CriterionBreakdown c;
  c.factual = factual_loss(out, batch).scalar();
  c.distance = discriminative_distance(out, batch, DistanceMetric::l1).scalar();
  c.criterion = c.factual + distance_weight * c.distance;
  return c;
}

BatchView make_view(const Model& model, const Tensor& x_raw, const std::vector<int>& t,
                    const std::vector<double>& y_raw, const Tensor& unlabeled_raw) {
  BatchView v;
  v.x = model.x_scaler.apply(x_raw);
  v.t = t;
  v.y = Tensor(y_raw.size(), 1);
  for (std::size_t i = 0; i < y_raw.size(); ++i) v.y[i] = model.y_scaler.standardize(y_raw[i]);
  if (unlabeled_raw.rows() > 0) v.unlabeled_x = model.x_scaler.apply(unlabeled_raw);
  v.row_ids.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v.row_ids[i] = i;
  v.validate();
  return v;
}

}  // namespace adbcr
