#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "adbcr/binary_io.hpp"
#include "adbcr/danncr.hpp"
#include "adbcr/data.hpp"
#include "adbcr/errors.hpp"
#include "adbcr/evaluation.hpp"
#include "adbcr/key_value.hpp"
#include "adbcr/lasso.hpp"
#include "adbcr/search.hpp"
#include "adbcr/trainer.hpp"

namespace adbcr::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct GenerateOptions {
  std::size_t n = 1000;
  std::size_t d = 10;
  double bias = 2.0;
  double heterogeneity = 1.0;
  double noise = 0.5;
  double base_effect = 4.0;
  double outcome_curvature = 0.5;
  double effect_curvature = 1.0;
  std::string nonlinearity = "quadratic";
};

struct NetworkOptions {
  std::string shared_layers = "50,50";
  std::string head_layers = "50,50";
  double dropout = 0.1;
  double weight_decay = 0.001;
  std::size_t batch_size = 100;
  double lr = 1e-3;
  int k = 1;
  double adversary_weight = 1.0;
  double reversal_weight = 1.0;
  std::string metric = "l1";
  int patience = 100;
  int max_epochs = 1000;
  bool no_trailing_a = false;
  double criterion_weight = 1.0;
};

struct TrainOptions {
  std::string data;
  std::string mode = "adbcr";
  std::string unlabeled = "none";
  std::string alpha = "cv";
  NetworkOptions net;
};

struct SearchOptions {
  std::string data;
  std::string model = "adbcr";
  std::string space;
  std::string unlabeled = "none";
  int draws = 0;
  int patience = 0;
  int max_epochs = 0;
  int jobs = 1;
};

struct EvalOptions {
  std::string checkpoint;
  std::string data;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

// Lists every option of `sub` with its effective value, so the run can be
// repeated by feeding the result back through --config.
json resolved_config(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    const bool flag = opt->get_expected_min() == 0;
    std::string value;
    if (opt->count() > 0) {
      value = flag ? "true" : opt->results().back();
    } else {
      value = flag ? "false" : opt->get_default_str();
    }
    cfg[name] = value;
  }
  return cfg;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& name) {
  const std::string flag = "--" + name;
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return "";
}

// Config entries become flags placed before the user's own arguments; keys
// already given on the command line are skipped so flags take precedence.
std::vector<std::string> merge_config(const CLI::App& sub, const std::vector<std::string>& args) {
  const std::string path = find_config_path(args);
  if (path.empty()) return args;
  std::vector<KeyValue> entries;
  try {
    entries = load_key_values(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::string> merged{args.front()};
  for (const auto& kv : entries) {
    // Keys may spell flags with underscores.
    std::string key = kv.key;
    std::replace(key.begin(), key.end(), '_', '-');
    const CLI::Option* match = nullptr;
    for (const CLI::Option* opt : sub.get_options()) {
      const auto& names = opt->get_lnames();
      if (std::find(names.begin(), names.end(), key) != names.end()) match = opt;
    }
    if (!match || key == "config" || key == "help") {
      throw ConfigError(path + ":" + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
    }
    if (given_on_command_line(args, key)) continue;
    if (match->get_expected_min() == 0) {
      if (kv.value == "true" || kv.value == "1" || kv.value == "yes") merged.push_back("--" + key);
      continue;
    }
    merged.push_back("--" + key);
    merged.push_back(kv.value);
  }
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

Dataset load_dataset(const std::string& path, std::uint64_t seed) {
  Dataset data = load_csv(path);
  if (!data.has_split()) data = split(data, SplitFractions{}, seed);
  return data;
}

Dataset apply_unlabeled(const Dataset& data, const std::string& unlabeled) {
  if (unlabeled == "none") return data;
  if (unlabeled == "test") return strip_outcomes(data, data.rows(Split::test));
  throw ConfigError("--unlabeled must be 'none' or 'test'");
}

TrainConfig network_config(const NetworkOptions& o, std::uint64_t seed) {
  TrainConfig c;
  c.shared_layers = parse_layers(o.shared_layers);
  c.head_layers = parse_layers(o.head_layers);
  c.dropout_p = o.dropout;
  c.weight_decay = o.weight_decay;
  c.batch_size = o.batch_size;
  c.learning_rate = o.lr;
  c.k = o.k;
  c.adversary_weight = o.adversary_weight;
  c.metric = parse_metric(o.metric);
  c.patience = o.patience;
  c.max_epochs = o.max_epochs;
  c.trailing_step_a = !o.no_trailing_a;
  c.criterion_distance_weight = o.criterion_weight;
  c.seed = seed;
  return c;
}

json parse_json(const std::string& text) { return json::parse(text); }

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["tool_version"] = kToolVersion;
    j_["seed"] = seed;
    j_["args"] = args;
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }
  void config(json cfg) { j_["config"] = std::move(cfg); }
  void input(const std::string& key, const std::string& path) { j_["inputs"][key] = path; }
  void output(const fs::path& path) { j_["outputs"].push_back(path.string()); }
  void write(const fs::path& dir, const std::string& status) {
    j_["status"] = status;
    j_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(dir / "manifest.json", j_);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json j_;
};

json summary_json(const EvaluationSummary& s) { return parse_json(to_json(s)); }

int cmd_generate(const GenerateOptions& o, const Common& c, Manifest& m, std::ostream& out) {
  DgpConfig cfg;
  cfg.n = o.n;
  cfg.d = o.d;
  cfg.bias_strength = o.bias;
  cfg.effect_heterogeneity = o.heterogeneity;
  cfg.noise_sd = o.noise;
  cfg.base_effect = o.base_effect;
  cfg.outcome_curvature_scale = o.outcome_curvature;
  cfg.effect_curvature_scale = o.effect_curvature;
  cfg.nonlinearity = parse_nonlinearity(o.nonlinearity);
  cfg.seed = c.seed;
  cfg.validate();

  const GeneratedData g = generate(cfg);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  save_csv(g.data, dir / "data.csv");
  m.output(dir / "data.csv");
  write_file_atomic(dir / "ground_truth.json", ground_truth_json(cfg, g.coefficients));
  m.output(dir / "ground_truth.json");
  m.write(dir, "ok");
  out << "wrote " << (dir / "data.csv").string() << " (" << g.data.n() << " rows)\n";
  return kExitOk;
}

void write_failure(const fs::path& dir, Manifest& m, const std::string& mode,
                   const std::string& error) {
  json report;
  report["status"] = "failed";
  report["model"] = mode;
  report["error"] = error;
  write_json(dir / "report.json", report);
  m.output(dir / "report.json");
  m.write(dir, "failed");
}

int cmd_train(const TrainOptions& o, const Common& c, Manifest& m, std::ostream& out,
              std::ostream& err) {
  const bool lasso = o.mode == "s-lasso" || o.mode == "t-lasso";
  const bool danncr = o.mode == "danncr";
  TrainConfig net;
  if (!lasso) {
    net = network_config(o.net, c.seed);
    if (!danncr) net.mode = parse_train_mode(o.mode);
    net.validate();
  }
  double fixed_alpha = -1.0;
  if (lasso && o.alpha != "cv") {
    fixed_alpha = parse_double(o.alpha, "--alpha");
    if (!(fixed_alpha >= 0.0)) throw ConfigError("--alpha must be non-negative or 'cv'");
  }
  if (o.unlabeled != "none" && o.unlabeled != "test") {
    throw ConfigError("--unlabeled must be 'none' or 'test'");
  }

  const Dataset full = load_dataset(o.data, c.seed);
  m.input("data", o.data);
  const Dataset data = apply_unlabeled(full, o.unlabeled);
  const fs::path dir = c.out;
  fs::create_directories(dir);

  json report;
  report["status"] = "ok";
  report["model"] = o.mode;
  Estimator estimator;

  if (lasso) {
    const auto variant = o.mode == "s-lasso" ? LassoVariant::single : LassoVariant::per_treatment;
    std::vector<std::size_t> rows;
    for (auto r : within_sample_rows(data)) {
      if (!data.is_stripped(r)) rows.push_back(r);
    }
    double alpha = fixed_alpha;
    if (alpha < 0.0) {
      const auto grid = default_alpha_grid();
      const auto sel = lasso_select_alpha(data, rows, variant, grid, c.seed);
      alpha = sel.alpha;
      report["alpha_grid"] = grid;
      report["cv_mse"] = sel.cv_mse;
    }
    LassoModel model = fit_lasso_model(data, rows, variant, alpha);
    report["alpha"] = alpha;
    estimator.fitted = std::move(model);
  } else {
    const fs::path history_path = dir / "history.jsonl";
    const fs::path history_tmp = dir / "history.jsonl.tmp";
    std::ofstream history(history_tmp, std::ios::binary | std::ios::trunc);
    if (!history) throw Error("cannot write " + history_tmp.string());
    HistoryLogger logger([&history](const std::string& line) { history << line << '\n'; });
    TrainResult result;
    try {
      result = danncr ? danncr_train(data, DanncrConfig{net, o.net.reversal_weight}, &logger)
                      : train(data, net, &logger);
    } catch (const TrainingError& e) {
      history.close();
      fs::rename(history_tmp, history_path);
      m.output(history_path);
      write_failure(dir, m, o.mode, e.what());
      err << "training failed: " << e.what() << '\n';
      return kExitFailure;
    }
    history.close();
    if (!history) throw Error("failed writing " + history_tmp.string());
    fs::rename(history_tmp, history_path);
    m.output(history_path);
    report["config_fingerprint"] = result.meta.config_fingerprint;
    report["selection_criterion"] = result.meta.criterion;
    report["best_epoch"] = result.best_epoch;
    report["epochs_run"] = result.epochs_run;
    estimator.fitted = std::move(result.best_model);
    estimator.meta = result.meta;
  }

  save_estimator(dir / "model.ckpt", estimator);
  m.output(dir / "model.ckpt");
  const auto summary = evaluate_splits(estimator, full, c.seed);
  const json metrics = summary_json(summary);
  report["within_sample"] = metrics["within_sample"];
  report["out_of_sample"] = metrics["out_of_sample"];
  write_json(dir / "report.json", report);
  m.output(dir / "report.json");
  m.write(dir, "ok");
  if (summary.out_of_sample.sqrt_pehe) {
    out << o.mode << ": out-of-sample sqrt_pehe " << *summary.out_of_sample.sqrt_pehe << '\n';
  } else {
    out << o.mode << ": out-of-sample factual_mse " << summary.out_of_sample.factual_mse << '\n';
  }
  return kExitOk;
}

int cmd_search(const SearchOptions& o, const Common& c, Manifest& m, std::ostream& out) {
  SearchSpace space;
  if (!o.space.empty()) {
    std::ifstream in(o.space, std::ios::binary);
    if (!in) throw ConfigError("cannot open search space file " + o.space);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      space = parse_search_space(ss.str());
    } catch (const ParseError& e) {
      throw ConfigError(o.space + ": " + e.what());
    }
    m.input("space", o.space);
  }
  if (o.draws > 0) space.draws = o.draws;
  if (o.patience > 0) space.patience = o.patience;
  if (o.max_epochs > 0) space.max_epochs = o.max_epochs;
  space.validate();
  const SearchModel model = parse_search_model(o.model);
  if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");

  const Dataset full = load_dataset(o.data, c.seed);
  m.input("data", o.data);
  const Dataset data = apply_unlabeled(full, o.unlabeled);
  const fs::path dir = c.out;
  fs::create_directories(dir);

  const SearchResult result = search(data, space, model, c.seed, o.jobs);
  write_file_atomic(dir / "runs.csv", run_table_csv(result));
  m.output(dir / "runs.csv");

  const SearchRun& best = result.best_run();
  Estimator estimator;
  estimator.fitted = best.result->best_model;
  estimator.meta = best.result->meta;
  save_estimator(dir / "model.ckpt", estimator);
  m.output(dir / "model.ckpt");

  const auto summary = evaluate_splits(estimator, full, c.seed);
  const json metrics = summary_json(summary);
  json report;
  report["status"] = "ok";
  report["model"] = to_string(model);
  report["runs"] = result.runs.size();
  report["completed"] = result.completed();
  report["best_index"] = best.config.index;
  report["config_fingerprint"] = best.config.fingerprint;
  report["selection_criterion"] = best.result->meta.criterion;
  report["within_sample"] = metrics["within_sample"];
  report["out_of_sample"] = metrics["out_of_sample"];
  write_json(dir / "report.json", report);
  m.output(dir / "report.json");
  m.write(dir, "ok");
  out << "search: " << result.completed() << "/" << result.runs.size() << " runs ok, best #"
      << best.config.index << " (" << best.config.fingerprint << ")\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& o, const Common& c, Manifest& m, std::ostream& out) {
  const Estimator estimator = load_estimator(o.checkpoint);
  m.input("checkpoint", o.checkpoint);
  const Dataset data = load_dataset(o.data, c.seed);
  m.input("data", o.data);
  const auto summary = evaluate_splits(estimator, data, c.seed);
  const json metrics = summary_json(summary);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  json report;
  report["status"] = "ok";
  report["model"] = estimator.family();
  report["within_sample"] = metrics["within_sample"];
  report["out_of_sample"] = metrics["out_of_sample"];
  write_json(dir / "report.json", report);
  m.output(dir / "report.json");
  m.write(dir, "ok");
  out << metrics.dump(2) << '\n';
  return kExitOk;
}

void add_common(CLI::App& sub, Common& c, bool out_required = true) {
  sub.add_option("--seed", c.seed, "Master seed; every random stream derives from it");
  auto* o = sub.add_option("--out", c.out, "Output directory");
  if (out_required) o->required();
  sub.add_option("--config", c.config, "key=value file; command-line flags take precedence");
}

void add_network(CLI::App& sub, NetworkOptions& n) {
  sub.add_option("--shared-layers", n.shared_layers, "Representation widths, e.g. 50,50");
  sub.add_option("--head-layers", n.head_layers, "Hidden widths of each head, e.g. 50,50");
  sub.add_option("--dropout", n.dropout);
  sub.add_option("--weight-decay", n.weight_decay);
  sub.add_option("--batch-size", n.batch_size);
  sub.add_option("--lr", n.lr, "Adam learning rate");
  sub.add_option("--k", n.k, "Representation steps per batch");
  sub.add_option("--adversary-weight", n.adversary_weight);
  sub.add_option("--reversal-weight", n.reversal_weight, "danncr gradient-reversal weight");
  sub.add_option("--metric", n.metric, "Head gap metric: l1 or squared");
  sub.add_option("--patience", n.patience);
  sub.add_option("--max-epochs", n.max_epochs);
  sub.add_flag("--no-trailing-a", n.no_trailing_a, "Skip the second factual step per batch");
  sub.add_option("--criterion-weight", n.criterion_weight,
                 "Weight of the head gap in the validation criterion");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial distribution balancing for treatment effect estimation", "adbcr"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  GenerateOptions gen;
  TrainOptions tr;
  SearchOptions se;
  EvalOptions ev;

  auto* g = app.add_subcommand("generate", "Synthetic dataset with known potential outcomes");
  g->add_option("--n", gen.n, "Rows");
  g->add_option("--d", gen.d, "Covariates");
  g->add_option("--bias", gen.bias, "Treatment-assignment bias strength");
  g->add_option("--heterogeneity", gen.heterogeneity, "Scale of the varying part of the effect");
  g->add_option("--noise", gen.noise, "Outcome noise standard deviation");
  g->add_option("--base-effect", gen.base_effect, "Constant part of the effect");
  g->add_option("--outcome-curvature", gen.outcome_curvature, "Scale of the control-outcome curvature");
  g->add_option("--effect-curvature", gen.effect_curvature, "Scale of the effect curvature");
  g->add_option("--nonlinearity", gen.nonlinearity, "linear, quadratic or exp");
  add_common(*g, common);

  auto* t = app.add_subcommand("train", "Train one configuration and evaluate it");
  t->add_option("--data", tr.data, "Dataset CSV")->required();
  t->add_option("--mode", tr.mode, "adbcr, uadbcr, a-tarnet, danncr, s-lasso or t-lasso");
  t->add_option("--unlabeled", tr.unlabeled, "none, or test to hide test outcomes from training");
  t->add_option("--alpha", tr.alpha, "Lasso penalty, or cv for 5-fold selection");
  add_network(*t, tr.net);
  add_common(*t, common);

  auto* s = app.add_subcommand("search", "Hyper-parameter search with criterion-based selection");
  s->add_option("--data", se.data, "Dataset CSV")->required();
  s->add_option("--model", se.model, "adbcr, uadbcr, a-tarnet or danncr");
  s->add_option("--space", se.space, "Search space key=value file");
  s->add_option("--unlabeled", se.unlabeled, "none or test");
  s->add_option("--draws", se.draws, "Random draws per architecture (overrides the space)");
  s->add_option("--patience", se.patience, "Overrides the space");
  s->add_option("--max-epochs", se.max_epochs, "Overrides the space");
  s->add_option("--jobs", se.jobs, "Concurrent training runs");
  add_common(*s, common);

  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset CSV")->required();
  add_common(*e, common);

  std::vector<std::string> merged = args;
  try {
    if (!args.empty()) {
      if (CLI::App* sub = app.get_subcommand_no_throw(args.front())) merged = merge_config(*sub, args);
    }
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }

  try {
    std::vector<std::string> reversed(merged.rbegin(), merged.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest(sub->get_name(), args, common.seed);
  manifest.config(resolved_config(*sub));
  try {
    if (sub == g) return cmd_generate(gen, common, manifest, out);
    if (sub == t) return cmd_train(tr, common, manifest, out, err);
    if (sub == s) return cmd_search(se, common, manifest, out);
    return cmd_eval(ev, common, manifest, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace adbcr::cli
