#include "adbcr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "adbcr/errors.hpp"
#include "adbcr/random.hpp"

namespace adbcr {

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::adbcr:
      return "adbcr";
    case TrainMode::uadbcr:
      return "uadbcr";
    case TrainMode::a_tarnet:
      return "a-tarnet";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& text) {
  if (text == "adbcr") return TrainMode::adbcr;
  if (text == "uadbcr") return TrainMode::uadbcr;
  if (text == "a-tarnet" || text == "a_tarnet") return TrainMode::a_tarnet;
  throw ConfigError("unknown training mode '" + text + "'");
}

void TrainConfig::validate() const {
  if (shared_layers.empty() || head_layers.empty()) throw ConfigError("layer lists must be nonempty");
  for (auto w : shared_layers) {
    if (w == 0) throw ConfigError("zero-width shared layer");
  }
  for (auto w : head_layers) {
    if (w == 0) throw ConfigError("zero-width head layer");
  }
  if (k < 1) throw ConfigError("k (adversarial steps) must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(dropout_p >= 0.0) || dropout_p >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!std::isfinite(adversary_weight) || !std::isfinite(criterion_distance_weight)) {
    throw ConfigError("weights must be finite");
  }
}

std::string format_layers(const std::vector<std::size_t>& layers) {
  std::string s = "[";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(layers[i]);
  }
  return s + "]";
}

std::vector<std::size_t> parse_layers(const std::string& text) {
  std::string body = text;
  body.erase(std::remove_if(body.begin(), body.end(),
                            [](char c) { return c == '[' || c == ']' || c == ' '; }),
             body.end());
  std::vector<std::size_t> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("bad layer list '" + text + "'");
    }
    if (pos != item.size() || v <= 0) throw ConfigError("bad layer list '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("empty layer list '" + text + "'");
  return out;
}

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::canonical() const {
  std::ostringstream out;
  out << "mode=" << to_string(mode) << '\n'
      << "shared_layers=" << format_layers(shared_layers) << '\n'
      << "head_layers=" << format_layers(head_layers) << '\n'
      << "dropout=" << real(dropout_p) << '\n'
      << "weight_decay=" << real(weight_decay) << '\n'
      << "batch_size=" << batch_size << '\n'
      << "learning_rate=" << real(learning_rate) << '\n'
      << "k=" << k << '\n'
      << "adversary_weight=" << real(adversary_weight) << '\n'
      << "patience=" << patience << '\n'
      << "max_epochs=" << max_epochs << '\n'
      << "seed=" << seed << '\n'
      << "metric=" << to_string(metric) << '\n'
      << "trailing_step_a=" << (trailing_step_a ? 1 : 0) << '\n'
      << "criterion_distance_weight=" << real(criterion_distance_weight) << '\n';
  return out.str();
}

std::string TrainConfig::fingerprint() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

// ---------------------------------------------------------------------------
// Batching

std::vector<BatchIndices> make_batches(const std::vector<int>& treatments,
                                       std::size_t unlabeled_count, std::size_t batch_size,
                                       std::mt19937_64& rng, std::mt19937_64& unlabeled_rng) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  const std::size_t n = treatments.size();
  std::array<std::vector<std::size_t>, 2> arm_rows;
  for (std::size_t i = 0; i < n; ++i) arm_rows[static_cast<std::size_t>(treatments[i])].push_back(i);
  for (int a = 0; a < 2; ++a) {
    if (arm_rows[static_cast<std::size_t>(a)].size() < 2) {
      throw DatasetError("training data needs at least 2 rows of treatment arm " +
                         std::to_string(a));
    }
  }

  const std::size_t nb = (n + batch_size - 1) / batch_size;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<BatchIndices> batches(nb);
  const std::size_t base = n / nb, extra = n % nb;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    batches[b].labeled.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                              perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }

  auto count_arm = [&](const BatchIndices& b, int arm) {
    return static_cast<std::size_t>(std::count_if(b.labeled.begin(), b.labeled.end(), [&](auto i) {
      return treatments[i] == arm;
    }));
  };

  for (int arm = 0; arm < 2; ++arm) {
    for (std::size_t b = 0; b < nb; ++b) {
      if (count_arm(batches[b], arm) > 0) continue;
      std::size_t donor = nb;
      for (std::size_t c = 0; c < nb; ++c) {
        if (c != b && count_arm(batches[c], arm) >= 2) {
          donor = c;
          break;
        }
      }
      auto& mine = batches[b].labeled;
      if (donor < nb && mine.size() >= 2) {
        auto& theirs = batches[donor].labeled;
        auto it = std::find_if(theirs.rbegin(), theirs.rend(),
                               [&](auto i) { return treatments[i] == arm; });
        std::swap(*it, mine.back());
      } else {
        const auto& pool = arm_rows[static_cast<std::size_t>(arm)];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        mine.push_back(pool[pick(rng)]);
      }
    }
  }

  if (unlabeled_count > 0) {
    std::vector<std::size_t> u(unlabeled_count);
    std::iota(u.begin(), u.end(), std::size_t{0});
    std::shuffle(u.begin(), u.end(), unlabeled_rng);
    const std::size_t ubase = unlabeled_count / nb, uextra = unlabeled_count % nb;
    std::size_t upos = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t len = ubase + (b < uextra ? 1 : 0);
      batches[b].unlabeled.assign(u.begin() + static_cast<std::ptrdiff_t>(upos),
                                  u.begin() + static_cast<std::ptrdiff_t>(upos + len));
      upos += len;
    }
  }
  return batches;
}

BatchView slice(const BatchView& view, const BatchIndices& indices) {
  BatchView b;
  b.x = select_rows(view.x, indices.labeled);
  b.y = select_rows(view.y, indices.labeled);
  b.t.reserve(indices.labeled.size());
  b.row_ids.reserve(indices.labeled.size());
  for (auto i : indices.labeled) {
    b.t.push_back(view.t[i]);
    b.row_ids.push_back(view.row_ids.empty() ? i : view.row_ids[i]);
  }
  if (!indices.unlabeled.empty()) b.unlabeled_x = select_rows(view.unlabeled_x, indices.unlabeled);
  return b;
}

// ---------------------------------------------------------------------------
// Steps

std::vector<Tensor*> parameter_tensors(Model& model, Trainable groups) {
  std::vector<Tensor*> out;
  auto add = [&out](ParamSet& set) {
    for (auto& p : set) out.push_back(&p.value);
  };
  if (contains(groups, Trainable::phi)) add(model.phi());
  if (contains(groups, Trainable::heads)) {
    for (int t = 0; t < kNumArms; ++t) {
      for (int r = 0; r < model.architecture().heads_per_arm; ++r) add(model.head(t, r));
    }
  }
  if (contains(groups, Trainable::discriminator) && model.has_discriminator()) {
    add(model.discriminator());
  }
  return out;
}

std::vector<ad::Var> parameter_vars(const BoundModel& bound, Trainable groups) {
  std::vector<ad::Var> out;
  if (contains(groups, Trainable::phi)) out.insert(out.end(), bound.phi.begin(), bound.phi.end());
  if (contains(groups, Trainable::heads)) {
    for (const auto& arm : bound.heads) {
      for (const auto& head : arm) out.insert(out.end(), head.begin(), head.end());
    }
  }
  if (contains(groups, Trainable::discriminator)) {
    out.insert(out.end(), bound.discriminator.begin(), bound.discriminator.end());
  }
  return out;
}

namespace {

void require_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw TrainingError(std::string(what) + ": non-finite loss");
}

void apply_update(Model& model, ad::Tape& tape, const BoundModel& bound, ad::Var loss,
                  Trainable groups, Adam& optimizer) {
  tape.backward(loss);
  const auto grads = gradients(tape, parameter_vars(bound, groups));
  const auto params = parameter_tensors(model, groups);
  optimizer.step(params, grads);
}

}  // namespace

double step_a(Model& model, const BatchView& batch, Adam& optimizer, std::mt19937_64& dropout_rng,
              StepTrace* trace) {
  constexpr Trainable groups = Trainable::phi | Trainable::heads;
  ad::Tape tape;
  BoundModel bound = bind(model, tape, groups);
  HeadOutputs out = forward_heads(bound, batch, ForwardOptions{true, &dropout_rng}, false);
  ad::Var loss = factual_loss(out, batch);
  const double value = loss.scalar();
  require_finite(value, "step A");
  apply_update(model, tape, bound, loss, groups, optimizer);
  if (trace) trace->distance_in_graph = tape.has_mark(kDistanceMark);
  return value;
}

double step_b(Model& model, const BatchView& batch, Adam& optimizer, double adversary_weight,
              DistanceMetric metric, std::mt19937_64& dropout_rng, StepTrace* trace) {
  constexpr Trainable groups = Trainable::heads;
  ad::Tape tape;
  BoundModel bound = bind(model, tape, groups);
  HeadOutputs out = forward_heads(bound, batch, ForwardOptions{true, &dropout_rng}, true);
  ad::Var factual = factual_loss(out, batch);
  ad::Var distance = discriminative_distance(out, batch, metric);
  ad::Var loss = ad::sub(factual, ad::scale(distance, adversary_weight));
  const double value = loss.scalar();
  require_finite(value, "step B");
  apply_update(model, tape, bound, loss, groups, optimizer);
  if (trace) trace->distance_in_graph = tape.has_mark(kDistanceMark);
  return value;
}

std::vector<double> step_c(Model& model, const BatchView& batch, Adam& optimizer, int k,
                           DistanceMetric metric, std::mt19937_64& dropout_rng, StepTrace* trace) {
  if (k < 1) throw ConfigError("k (adversarial steps) must be at least 1");
  constexpr Trainable groups = Trainable::phi;
  std::vector<double> seen;
  for (int i = 0; i < k; ++i) {
    ad::Tape tape;
    BoundModel bound = bind(model, tape, groups);
    HeadOutputs out = forward_heads(bound, batch, ForwardOptions{true, &dropout_rng}, true);
    ad::Var distance = discriminative_distance(out, batch, metric);
    const double value = distance.scalar();
    require_finite(value, "step C");
    apply_update(model, tape, bound, distance, groups, optimizer);
    seen.push_back(value);
    if (trace) trace->distance_in_graph = trace->distance_in_graph || tape.has_mark(kDistanceMark);
  }
  return seen;
}

// ---------------------------------------------------------------------------

std::string history_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_factual"] = r.train_factual;
  j["val_factual"] = r.val_factual;
  if (r.val_distance) j["val_distance"] = *r.val_distance;
  j["val_criterion"] = r.val_criterion;
  return j.dump();
}

void HistoryLogger::on_epoch(const EpochRecord& record) { sink_(history_line(record)); }

bool EarlyStopping::update(double value) {
  if (!has_best_ || value < best_ - 1e-12) {
    has_best_ = true;
    best_ = value;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

PreparedData prepare(const Dataset& data, bool with_unlabeled) {
  data.validate();
  if (!data.has_split()) throw DatasetError("dataset has no train/validation split assignment");
  const auto train_rows = data.labeled_rows(Split::train);
  const auto val_rows = data.labeled_rows(Split::validation);
  for (const auto& [rows, name] : {std::pair{&train_rows, "training"}, {&val_rows, "validation"}}) {
    const auto arms = arm_counts(data, *rows);
    if (arms[0] == 0 || arms[1] == 0) {
      throw DatasetError(std::string(name) + " split must contain both treatment arms");
    }
  }

  PreparedData p;
  const Tensor x_train = select_rows(data.x, train_rows);
  std::vector<double> y_train;
  for (auto r : train_rows) y_train.push_back(data.y[r]);
  p.x_scaler = FeatureScaler::fit(x_train);
  p.y_scaler = OutcomeScaler::fit(y_train);

  auto build = [&](const std::vector<std::size_t>& rows, bool unlabeled) {
    BatchView v;
    v.x = p.x_scaler.apply(select_rows(data.x, rows));
    v.y = Tensor(rows.size(), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      v.t.push_back(data.t[rows[i]]);
      v.y[i] = p.y_scaler.standardize(data.y[rows[i]]);
    }
    v.row_ids = rows;
    if (unlabeled && data.unlabeled_x.rows() > 0) v.unlabeled_x = p.x_scaler.apply(data.unlabeled_x);
    return v;
  };
  p.train = build(train_rows, with_unlabeled);
  p.validation = build(val_rows, false);
  return p;
}

TrainResult train(const Dataset& data, const TrainConfig& config, TrainObserver* observer) {
  config.validate();
  const bool adversarial = config.mode != TrainMode::a_tarnet;
  PreparedData prepared = prepare(data, config.mode == TrainMode::uadbcr);

  Architecture arch;
  arch.input_dim = data.d();
  arch.shared_layers = config.shared_layers;
  arch.head_layers = config.head_layers;
  arch.dropout_p = config.dropout_p;
  arch.heads_per_arm = 2;
  Model model = Model::init(arch, config.seed);
  model.x_scaler = prepared.x_scaler;
  model.y_scaler = prepared.y_scaler;

  const AdamConfig adam{config.learning_rate, config.weight_decay};
  Adam opt_all(adam), opt_heads(adam), opt_phi(adam);
  auto batch_rng = substream(config.seed, "batching");
  auto unlabeled_rng = substream(config.seed, "batching/unlabeled");
  auto dropout_rng = substream(config.seed, "dropout");

  TrainResult result;
  EarlyStopping stopper(config.patience);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = make_batches(prepared.train.t, prepared.train.unlabeled(),
                                      config.batch_size, batch_rng, unlabeled_rng);
    double factual_sum = 0.0;
    for (const auto& indices : batches) {
      const BatchView batch = slice(prepared.train, indices);
      if (observer) observer->on_batch(epoch, batch);

      auto run = [&](Phase phase, auto&& fn) {
        if (observer) observer->before_step(phase, model);
        StepTrace trace;
        fn(trace);
        if (observer) observer->after_step(phase, model, trace.distance_in_graph);
      };

      run(Phase::a_first, [&](StepTrace& tr) {
        factual_sum += step_a(model, batch, opt_all, dropout_rng, &tr);
      });
      if (!adversarial) continue;
      run(Phase::b, [&](StepTrace& tr) {
        step_b(model, batch, opt_heads, config.adversary_weight, config.metric, dropout_rng, &tr);
      });
      run(Phase::c, [&](StepTrace& tr) {
        step_c(model, batch, opt_phi, config.k, config.metric, dropout_rng, &tr);
      });
      if (config.trailing_step_a) {
        run(Phase::a_trailing, [&](StepTrace& tr) { step_a(model, batch, opt_all, dropout_rng, &tr); });
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_factual = factual_sum / static_cast<double>(batches.size());
    if (adversarial) {
      const auto c = validation_criterion(model, prepared.validation, config.criterion_distance_weight);
      record.val_factual = c.factual;
      record.val_distance = c.distance;
      record.val_criterion = c.criterion;
    } else {
      record.val_factual = factual_loss(model, prepared.validation);
      record.val_criterion = record.val_factual;
    }
    if (!std::isfinite(record.val_criterion)) {
      throw TrainingError("non-finite validation criterion at epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (observer) observer->on_epoch(record);
    result.epochs_run = epoch;
    if (stopper.update(record.val_criterion)) {
      result.best_model = model;
      result.best_epoch = epoch;
      result.best_value = record.val_criterion;
    }
    if (stopper.should_stop()) break;
  }

  result.meta.config_fingerprint = config.fingerprint();
  result.meta.criterion = adversarial ? "factual+distance" : "factual";
  result.meta.criterion_value = result.best_value;
  return result;
}

}  // namespace adbcr
