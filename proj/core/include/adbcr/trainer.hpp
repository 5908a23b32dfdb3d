#pragma once

// Adversarial training loop.
//
// Every batch runs
//   A: one Adam step on the factual loss over Phi and all heads,
//   B: one Adam step on (factual - adversary_weight * D) over the heads only,
//   C: k Adam steps on D over Phi only,
//   A: the factual step again (can be disabled for ablation),
// with an independent Adam state per phase. After each epoch the validation
// criterion (factual + D, eval mode, whole validation split) decides early
// stopping and which epoch's parameters are returned. The a_tarnet mode keeps
// the two-head architecture but runs only the first A step and selects on the
// factual validation loss.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adbcr/checkpoint.hpp"
#include "adbcr/data.hpp"
#include "adbcr/model.hpp"
#include "adbcr/objectives.hpp"
#include "adbcr/params.hpp"

namespace adbcr {

enum class TrainMode { adbcr, uadbcr, a_tarnet };

const char* to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& text);

struct TrainConfig {
  std::vector<std::size_t> shared_layers{50, 50};
  std::vector<std::size_t> head_layers{50, 50};
  double dropout_p = 0.1;
  double weight_decay = 0.001;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  int k = 1;
  double adversary_weight = 1.0;
  int patience = 100;
  int max_epochs = 1000;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::adbcr;
  DistanceMetric metric = DistanceMetric::l1;
  bool trailing_step_a = true;
  // Weight of D inside the validation criterion.
  double criterion_distance_weight = 1.0;

  // Throws ConfigError unless k >= 1, patience >= 1, batch_size >= 2,
  // learning_rate > 0, max_epochs >= 1 and dropout in [0, 1).
  void validate() const;
  // Stable key=value rendering of every field, one per line.
  std::string canonical() const;
  // 16 hex digits of FNV-1a over canonical().
  std::string fingerprint() const;
};

std::string format_layers(const std::vector<std::size_t>& layers);
std::vector<std::size_t> parse_layers(const std::string& text);

struct EpochRecord {
  int epoch = 0;
  double train_factual = 0.0;  // mean factual loss over the epoch's first A steps
  double val_factual = 0.0;
  std::optional<double> val_distance;  // absent in a_tarnet mode
  double val_criterion = 0.0;
};

struct TrainResult {
  Model best_model;
  double best_value = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<EpochRecord> history;
  CheckpointMeta meta;
};

// Indices into a training view: labeled rows plus a share of unlabeled rows.
struct BatchIndices {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

// One epoch of batches. Rows are shuffled and cut into ceil(n / batch_size)
// batches of near-equal size; rows are then swapped between batches so every
// batch holds both arms. When an arm has fewer rows than there are batches,
// batches that cannot receive a swap get a re-used row of that arm instead.
// Unlabeled rows are shuffled with `unlabeled_rng` and dealt in near-equal
// shares. Throws DatasetError when an arm has fewer than 2 rows.
std::vector<BatchIndices> make_batches(const std::vector<int>& treatments,
                                       std::size_t unlabeled_count, std::size_t batch_size,
                                       std::mt19937_64& rng, std::mt19937_64& unlabeled_rng);

BatchView slice(const BatchView& view, const BatchIndices& indices);

// Parameter tensors of the selected groups, ordered phi, heads, discriminator.
std::vector<Tensor*> parameter_tensors(Model& model, Trainable groups);
std::vector<ad::Var> parameter_vars(const BoundModel& bound, Trainable groups);

// Filled by the step functions: whether D entered any differentiated loss.
struct StepTrace {
  bool distance_in_graph = false;
};

// Each step returns the loss evaluated in the forward pass that produced the
// update. They throw TrainingError on a non-finite loss or gradient.
double step_a(Model& model, const BatchView& batch, Adam& optimizer, std::mt19937_64& dropout_rng,
              StepTrace* trace = nullptr);
double step_b(Model& model, const BatchView& batch, Adam& optimizer, double adversary_weight,
              DistanceMetric metric, std::mt19937_64& dropout_rng, StepTrace* trace = nullptr);
// Returns the distance seen before each of the k updates.
std::vector<double> step_c(Model& model, const BatchView& batch, Adam& optimizer, int k,
                           DistanceMetric metric, std::mt19937_64& dropout_rng,
                           StepTrace* trace = nullptr);

enum class Phase { a_first, b, c, a_trailing };

// Hooks for instrumentation and logging; every method has an empty default.
class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_batch(int /*epoch*/, const BatchView& /*batch*/) {}
  virtual void before_step(Phase /*phase*/, const Model& /*model*/) {}
  // `distance_in_graph` reports whether D was part of the differentiated loss.
  virtual void after_step(Phase /*phase*/, const Model& /*model*/, bool /*distance_in_graph*/) {}
  virtual void on_epoch(const EpochRecord& /*record*/) {}
};

// Writes one JSON object per epoch: {"epoch", "train_factual", "val_factual",
// "val_distance" (omitted in a_tarnet mode), "val_criterion"}.
class HistoryLogger : public TrainObserver {
 public:
  explicit HistoryLogger(std::function<void(const std::string&)> sink) : sink_(std::move(sink)) {}
  void on_epoch(const EpochRecord& record) override;

 private:
  std::function<void(const std::string&)> sink_;
};

std::string history_line(const EpochRecord& record);

// Counts epochs without improvement; an epoch improves only if the value
// drops by more than 1e-12 below the best so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true if `value` is a new best.
  bool update(double value);
  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  bool has_best_ = false;
  double best_ = 0.0;
};

// Standardized training and validation views built with scalers fitted on the
// labeled training rows.
struct PreparedData {
  FeatureScaler x_scaler;
  OutcomeScaler y_scaler;
  BatchView train;
  BatchView validation;
};

PreparedData prepare(const Dataset& data, bool with_unlabeled);

TrainResult train(const Dataset& data, const TrainConfig& config,
                  TrainObserver* observer = nullptr);

}  // namespace adbcr
