#pragma once

// Hyper-parameter search: every (shared layers, head layers) pair of the grid
// is combined with `draws` random draws of the remaining hyper-parameters.
// Runs are independent and may execute concurrently; results are ordered by
// run index so the outcome does not depend on the number of workers.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adbcr/danncr.hpp"
#include "adbcr/data.hpp"
#include "adbcr/trainer.hpp"

namespace adbcr {

enum class SearchModel { adbcr, uadbcr, a_tarnet, danncr };

const char* to_string(SearchModel m);
SearchModel parse_search_model(const std::string& text);

struct SearchSpace {
  std::vector<std::vector<std::size_t>> shared_layers{{50, 50}, {20, 20}, {10, 10}};
  std::vector<std::vector<std::size_t>> head_layers{{50, 50}, {20, 20}, {10}};
  std::vector<double> dropout{0.1, 0.3, 0.5};
  std::vector<double> weight_decay{1.0, 0.1, 0.01, 0.001};
  std::vector<std::size_t> batch_size{100, 250, 500};
  double learning_rate_min = 1e-5;  // drawn log-uniformly
  double learning_rate_max = 1e-2;
  std::vector<int> k{1, 2, 3};
  std::vector<double> reversal_weight{1.0};  // danncr only
  int draws = 1;

  // Held fixed across runs.
  int patience = 100;
  int max_epochs = 1000;
  DistanceMetric metric = DistanceMetric::l1;
  double adversary_weight = 1.0;

  // Throws ConfigError on an empty list, draws < 1 or a bad learning-rate range.
  void validate() const;
  std::size_t run_count() const { return shared_layers.size() * head_layers.size() * draws; }
};

// Flat key=value text; list values are separated by ';', layer lists use
// commas, e.g. "shared_layers = 20,20; 10,10". Unknown keys throw ParseError.
SearchSpace parse_search_space(const std::string& text);

struct SearchRunConfig {
  std::size_t index = 0;
  TrainConfig net;
  double reversal_weight = 1.0;
  std::string fingerprint;
};

// Expands the space in index order: architecture pairs outer, draws inner.
// Each run draws its hyper-parameters and its training seed from `seed`.
std::vector<SearchRunConfig> expand(const SearchSpace& space, SearchModel model, std::uint64_t seed);

struct SearchRun {
  SearchRunConfig config;
  bool failed = false;
  std::string error;
  double selection_value = 0.0;
  std::optional<TrainResult> result;  // present when the run succeeded
};

struct SearchResult {
  SearchModel model = SearchModel::adbcr;
  std::vector<SearchRun> runs;
  std::size_t best = 0;  // index into runs

  const SearchRun& best_run() const { return runs.at(best); }
  std::size_t completed() const;
};

// Trains every run with up to `jobs` concurrent workers and selects the
// successful run with the lowest selection value (ties to the lowest index):
// the validation criterion for adbcr/uadbcr, the factual validation loss for
// a_tarnet and danncr. Throws SearchError when every run fails.
SearchResult search(const Dataset& data, const SearchSpace& space, SearchModel model,
                    std::uint64_t seed, int jobs = 1);

// Index of the successful run minimising `values` (one per run; failed runs
// ignored). Throws SearchError if no run succeeded.
std::size_t select_min(const SearchResult& result, const std::vector<double>& values);

// Per-run CSV with a trailing summary row. Columns:
// index,status,fingerprint,shared_layers,head_layers,dropout,weight_decay,
// batch_size,learning_rate,k,reversal_weight,seed,best_epoch,epochs_run,
// selection_value,error
std::string run_table_csv(const SearchResult& result);

}  // namespace adbcr
