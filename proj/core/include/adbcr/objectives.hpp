#pragma once

// Loss terms of adversarial distribution balancing.
//
//   factual loss   L = sum_{t,r} mean_{i: T_i = t} (R(t,r)(Phi(x_i)) - y_i)^2
//   distance       D = sum_t mean_{i in pool(t)} d(R(t,0)(Phi(x_i)), R(t,1)(Phi(x_i)))
//   criterion      L_val = L + w * D   (w = 1 unless configured otherwise)
//
// pool(t) holds the counterfactual rows for arm t (T_i = 1 - t) plus every
// unlabeled row in the batch; d is the l1 or squared pointwise gap.

#include <array>
#include <string>
#include <vector>

#include "adbcr/autodiff.hpp"
#include "adbcr/model.hpp"
#include "adbcr/tensor.hpp"

namespace adbcr {

enum class DistanceMetric { l1, squared };

const char* to_string(DistanceMetric m);
DistanceMetric parse_metric(const std::string& text);

// Standardized rows handed to the objectives. `row_ids` map labeled rows back
// to dataset indices (used for bookkeeping only).
struct BatchView {
  Tensor x;
  std::vector<int> t;
  Tensor y;  // n x 1
  Tensor unlabeled_x;
  std::vector<std::size_t> row_ids;

  std::size_t n() const { return t.size(); }
  std::size_t unlabeled() const { return unlabeled_x.rows(); }
  // Throws DimensionError on misaligned fields.
  void validate() const;
};

// Outputs of every head over the stacked rows [x; unlabeled_x] from a single
// representation pass.
struct HeadOutputs {
  ad::Var representation;
  std::array<std::vector<ad::Var>, kNumArms> heads;
  std::size_t labeled_rows = 0;
  std::size_t unlabeled_rows = 0;
};

HeadOutputs forward_heads(const BoundModel& bound, const BatchView& batch,
                          const ForwardOptions& opts, bool include_unlabeled);

// Throws BatchCompositionError if an arm has no rows in the batch.
ad::Var factual_loss(const HeadOutputs& out, const BatchView& batch);
// Throws BatchCompositionError if an arm's pool is empty. Marks the tape with
// kDistanceMark.
ad::Var discriminative_distance(const HeadOutputs& out, const BatchView& batch,
                                DistanceMetric metric);

inline const std::string kDistanceMark = "discriminative_distance";

// Eval-mode scalar versions (no dropout, deterministic).
double factual_loss(const Model& model, const BatchView& batch);
double discriminative_distance(const Model& model, const BatchView& batch, DistanceMetric metric);

struct CriterionBreakdown {
  double factual = 0.0;
  double distance = 0.0;
  double criterion = 0.0;
};

// L_val = factual + distance_weight * D(l1), in eval mode on the whole view.
CriterionBreakdown validation_criterion(const Model& model, const BatchView& batch,
                                        double distance_weight = 1.0);

// Builds a standardized view of dataset-style arrays using the model scalers.
BatchView make_view(const Model& model, const Tensor& x_raw, const std::vector<int>& t,
                    const std::vector<double>& y_raw, const Tensor& unlabeled_raw = Tensor());

}  // namespace adbcr
