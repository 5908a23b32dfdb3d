#include "adbcr/search.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "adbcr/errors.hpp"
#include "adbcr/key_value.hpp"
#include "adbcr/random.hpp"

namespace adbcr {

const char* to_string(SearchModel m) {
  switch (m) {
    case SearchModel::adbcr:
      return "adbcr";
    case SearchModel::uadbcr:
      return "uadbcr";
    case SearchModel::a_tarnet:
      return "a-tarnet";
    case SearchModel::danncr:
      return "danncr";
  }
  return "?";
}

SearchModel parse_search_model(const std::string& text) {
  if (text == "danncr") return SearchModel::danncr;
  switch (parse_train_mode(text)) {
    case TrainMode::adbcr:
      return SearchModel::adbcr;
    case TrainMode::uadbcr:
      return SearchModel::uadbcr;
    case TrainMode::a_tarnet:
      return SearchModel::a_tarnet;
  }
  throw ConfigError("unknown model '" + text + "'");
}

void SearchSpace::validate() const {
  if (shared_layers.empty() || head_layers.empty() || dropout.empty() || weight_decay.empty() ||
      batch_size.empty() || k.empty() || reversal_weight.empty()) {
    throw ConfigError("search space: every value list must be nonempty");
  }
  if (draws < 1) throw ConfigError("search space: draws must be at least 1");
  if (!(learning_rate_min > 0.0) || !(learning_rate_max >= learning_rate_min) ||
      !std::isfinite(learning_rate_max)) {
    throw ConfigError("search space: learning rate range must satisfy 0 < min <= max");
  }
  // Surface invalid individual values before any run starts.
  for (const auto& s : shared_layers) {
    for (const auto& h : head_layers) {
      TrainConfig c;
      c.shared_layers = s;
      c.head_layers = h;
      c.patience = patience;
      c.max_epochs = max_epochs;
      for (double p : dropout) {
        c.dropout_p = p;
        c.validate();
      }
      for (double w : weight_decay) {
        c.weight_decay = w;
        c.validate();
      }
      for (auto b : batch_size) {
        c.batch_size = b;
        c.validate();
      }
      for (int kk : k) {
        c.k = kk;
        c.validate();
      }
      c.learning_rate = learning_rate_min;
      c.validate();
    }
  }
  for (double r : reversal_weight) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("search space: bad reversal weight");
  }
}

SearchSpace parse_search_space(const std::string& text) {
  SearchSpace s;
  for (const auto& kv : parse_key_values(text, "search space")) {
    const std::string what = "search space line " + std::to_string(kv.line) + " (" + kv.key + ")";
    auto doubles = [&] {
      std::vector<double> v;
      for (const auto& item : split_list(kv.value, ';')) v.push_back(parse_double(item, what));
      return v;
    };
    auto layer_lists = [&] {
      std::vector<std::vector<std::size_t>> v;
      try {
        for (const auto& item : split_list(kv.value, ';')) v.push_back(parse_layers(item));
      } catch (const ConfigError& e) {
        throw ParseError(what + ": " + e.what());
      }
      return v;
    };
    if (kv.key == "shared_layers") {
      s.shared_layers = layer_lists();
    } else if (kv.key == "head_layers") {
      s.head_layers = layer_lists();
    } else if (kv.key == "dropout") {
      s.dropout = doubles();
    } else if (kv.key == "weight_decay") {
      s.weight_decay = doubles();
    } else if (kv.key == "batch_size") {
      s.batch_size.clear();
      for (double b : doubles()) s.batch_size.push_back(static_cast<std::size_t>(b));
    } else if (kv.key == "learning_rate") {
      const auto range = split_list(kv.value, ',');
      if (range.size() == 1) {
        s.learning_rate_min = s.learning_rate_max = parse_double(range[0], what);
      } else if (range.size() == 2) {
        s.learning_rate_min = parse_double(range[0], what);
        s.learning_rate_max = parse_double(range[1], what);
      } else {
        throw ParseError(what + ": expected min,max");
      }
    } else if (kv.key == "k") {
      s.k.clear();
      for (double v : doubles()) s.k.push_back(static_cast<int>(v));
    } else if (kv.key == "reversal_weight") {
      s.reversal_weight = doubles();
    } else if (kv.key == "draws") {
      s.draws = static_cast<int>(parse_integer(kv.value, what));
    } else if (kv.key == "patience") {
      s.patience = static_cast<int>(parse_integer(kv.value, what));
    } else if (kv.key == "max_epochs") {
      s.max_epochs = static_cast<int>(parse_integer(kv.value, what));
    } else if (kv.key == "metric") {
      s.metric = parse_metric(kv.value);
    } else if (kv.key == "adversary_weight") {
      s.adversary_weight = parse_double(kv.value, what);
    } else {
      throw ParseError(what + ": unknown key");
    }
  }
  s.validate();
  return s;
}

std::vector<SearchRunConfig> expand(const SearchSpace& space, SearchModel model, std::uint64_t seed) {
  space.validate();
  auto rng = substream(seed, "search/draws");
  auto pick = [&rng](const auto& values) {
    std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
    return values[d(rng)];
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(space.learning_rate_min);
  const double log_hi = std::log(space.learning_rate_max);

  std::vector<SearchRunConfig> runs;
  for (const auto& shared : space.shared_layers) {
    for (const auto& head : space.head_layers) {
      for (int draw = 0; draw < space.draws; ++draw) {
        SearchRunConfig rc;
        rc.index = runs.size();
        TrainConfig& c = rc.net;
        c.shared_layers = shared;
        c.head_layers = head;
        c.dropout_p = pick(space.dropout);
        c.weight_decay = pick(space.weight_decay);
        c.batch_size = pick(space.batch_size);
        c.learning_rate = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
        c.k = pick(space.k);
        rc.reversal_weight = pick(space.reversal_weight);
        c.seed = rng();
        c.patience = space.patience;
        c.max_epochs = space.max_epochs;
        c.metric = space.metric;
        c.adversary_weight = space.adversary_weight;
        switch (model) {
          case SearchModel::uadbcr:
            c.mode = TrainMode::uadbcr;
            break;
          case SearchModel::a_tarnet:
            c.mode = TrainMode::a_tarnet;
            break;
          default:
            c.mode = TrainMode::adbcr;
        }
        rc.fingerprint = model == SearchModel::danncr
                             ? DanncrConfig{c, rc.reversal_weight}.fingerprint()
                             : c.fingerprint();
        runs.push_back(std::move(rc));
      }
    }
  }
  return runs;
}

std::size_t SearchResult::completed() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.failed ? 0 : 1;
  return n;
}

std::size_t select_min(const SearchResult& result, const std::vector<double>& values) {
  if (values.size() != result.runs.size()) throw DimensionError("select_min: one value per run");
  std::size_t best = result.runs.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (result.runs[i].failed || !std::isfinite(values[i])) continue;
    if (best == result.runs.size() || values[i] < values[best]) best = i;
  }
  if (best == result.runs.size()) throw SearchError("search: every run failed");
  return best;
}

SearchResult search(const Dataset& data, const SearchSpace& space, SearchModel model,
                    std::uint64_t seed, int jobs) {
  if (jobs < 1) throw ConfigError("search: jobs must be at least 1");
  SearchResult result;
  result.model = model;
  const auto configs = expand(space, model, seed);
  result.runs.resize(configs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      SearchRun& run = result.runs[i];
      run.config = configs[i];
      try {
        TrainResult r = model == SearchModel::danncr
                            ? danncr_train(data, DanncrConfig{configs[i].net, configs[i].reversal_weight})
                            : train(data, configs[i].net);
        if (!std::isfinite(r.best_value) || r.best_epoch == 0) {
          throw TrainingError("no finite validation value");
        }
        run.selection_value = r.best_value;
        run.result = std::move(r);
      } catch (const std::exception& e) {
        run.failed = true;
        run.error = e.what();
        run.selection_value = std::numeric_limits<double>::quiet_NaN();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), configs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<double> values;
  for (const auto& r : result.runs) values.push_back(r.selection_value);
  result.best = select_min(result, values);
  return result;
}

namespace {

std::string real(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void write_row(std::ostringstream& out, const std::string& index, const std::string& status,
               const SearchRun& run, const std::string& tail) {
  const auto& c = run.config.net;
  out << index << ',' << status << ',' << run.config.fingerprint << ','
      << quoted(format_layers(c.shared_layers)) << ',' << quoted(format_layers(c.head_layers))
      << ',' << real(c.dropout_p) << ',' << real(c.weight_decay) << ',' << c.batch_size << ','
      << real(c.learning_rate) << ',' << c.k << ',' << real(run.config.reversal_weight) << ','
      << c.seed << ',' << (run.result ? run.result->best_epoch : 0) << ','
      << (run.result ? run.result->epochs_run : 0) << ',' << real(run.selection_value) << ','
      << quoted(tail) << '\n';
}

}  // namespace

std::string run_table_csv(const SearchResult& result) {
  std::ostringstream out;
  out << "index,status,fingerprint,shared_layers,head_layers,dropout,weight_decay,batch_size,"
         "learning_rate,k,reversal_weight,seed,best_epoch,epochs_run,selection_value,error\n";
  for (const auto& run : result.runs) {
    write_row(out, std::to_string(run.config.index), run.failed ? "failed" : "ok", run, run.error);
  }
  const std::string note = "best=" + std::to_string(result.best) +
                           " completed=" + std::to_string(result.completed()) +
                           " failed=" + std::to_string(result.runs.size() - result.completed());
  write_row(out, "summary", "best", result.best_run(), note);
  return out.str();
}

}  // namespace adbcr
