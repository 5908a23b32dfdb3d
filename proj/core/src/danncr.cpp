#include "adbcr/danncr.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "adbcr/errors.hpp"
#include "adbcr/random.hpp"

namespace adbcr {

void DanncrConfig::validate() const {
  net.validate();
  if (!std::isfinite(reversal_weight) || reversal_weight < 0.0) {
    throw ConfigError("reversal_weight must be finite and non-negative");
  }
}

std::string DanncrConfig::canonical() const {
  TrainConfig base = net;
  base.mode = TrainMode::a_tarnet;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", reversal_weight);
  return "model=danncr\n" + base.canonical() + "reversal_weight=" + buf + "\n";
}

std::string DanncrConfig::fingerprint() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

Architecture danncr_architecture(const TrainConfig& net, std::size_t input_dim) {
  Architecture arch;
  arch.input_dim = input_dim;
  arch.shared_layers = net.shared_layers;
  arch.head_layers = net.head_layers;
  arch.dropout_p = net.dropout_p;
  arch.heads_per_arm = 1;
  arch.discriminator_outputs = 2;
  return arch;
}

namespace {

ad::Var discriminator_loss(const BoundModel& bound, const BatchView& batch,
                           const ForwardOptions& opts) {
  ad::Tape& tape = *bound.phi.front().tape;
  ad::Var rep = forward_phi(bound, tape.constant(batch.x), opts);
  ad::Var logits = forward_discriminator(bound, rep, opts);
  return ad::softmax_cross_entropy(logits, batch.t);
}

double update(Model& model, const BatchView& batch, Adam& optimizer, Trainable groups,
              double loss_sign, std::mt19937_64& dropout_rng, const char* what) {
  ad::Tape tape;
  BoundModel bound = bind(model, tape, groups);
  ad::Var ce = discriminator_loss(bound, batch, ForwardOptions{true, &dropout_rng});
  const double value = ce.scalar();
  if (!std::isfinite(value)) throw TrainingError(std::string(what) + ": non-finite loss");
  ad::Var loss = loss_sign == 1.0 ? ce : ad::scale(ce, loss_sign);
  tape.backward(loss);
  const auto grads = gradients(tape, parameter_vars(bound, groups));
  optimizer.step(parameter_tensors(model, groups), grads);
  return value;
}

}  // namespace

double danncr_discriminator_step(Model& model, const BatchView& batch, Adam& optimizer,
                                 std::mt19937_64& dropout_rng) {
  return update(model, batch, optimizer, Trainable::discriminator, 1.0, dropout_rng,
                "discriminator step");
}

double danncr_reversal_step(Model& model, const BatchView& batch, Adam& optimizer,
                            double reversal_weight, std::mt19937_64& dropout_rng) {
  return update(model, batch, optimizer, Trainable::phi, -reversal_weight, dropout_rng,
                "reversal step");
}

double discriminator_accuracy(const Model& model, const BatchView& batch) {
  if (batch.n() == 0) throw DomainError("discriminator_accuracy: empty batch");
  ad::Tape tape;
  BoundModel bound = bind(model, tape, Trainable::none);
  ad::Var rep = forward_phi(bound, tape.constant(batch.x), ForwardOptions{});
  const Tensor& logits = forward_discriminator(bound, rep, ForwardOptions{}).value();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.n(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    hits += static_cast<int>(best) == batch.t[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.n());
}

TrainResult danncr_train(const Dataset& data, const DanncrConfig& config, TrainObserver* observer) {
  config.validate();
  const TrainConfig& net = config.net;
  PreparedData prepared = prepare(data, false);

  Model model = Model::init(danncr_architecture(net, data.d()), net.seed);
  model.x_scaler = prepared.x_scaler;
  model.y_scaler = prepared.y_scaler;

  const AdamConfig adam{net.learning_rate, net.weight_decay};
  Adam opt_factual(adam), opt_disc(adam), opt_phi(adam);
  auto batch_rng = substream(net.seed, "batching");
  auto unlabeled_rng = substream(net.seed, "batching/unlabeled");
  auto dropout_rng = substream(net.seed, "dropout");

  TrainResult result;
  EarlyStopping stopper(net.patience);
  for (int epoch = 1; epoch <= net.max_epochs; ++epoch) {
    const auto batches =
        make_batches(prepared.train.t, 0, net.batch_size, batch_rng, unlabeled_rng);
    double factual_sum = 0.0;
    for (const auto& indices : batches) {
      const BatchView batch = slice(prepared.train, indices);
      if (observer) observer->on_batch(epoch, batch);
      factual_sum += step_a(model, batch, opt_factual, dropout_rng);
      danncr_discriminator_step(model, batch, opt_disc, dropout_rng);
      if (config.reversal_weight > 0.0) {
        danncr_reversal_step(model, batch, opt_phi, config.reversal_weight, dropout_rng);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_factual = factual_sum / static_cast<double>(batches.size());
    record.val_factual = factual_loss(model, prepared.validation);
    record.val_criterion = record.val_factual;
    if (!std::isfinite(record.val_criterion)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
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
  result.meta.criterion = "factual";
  result.meta.criterion_value = result.best_value;
  return result;
}

}  // namespace adbcr
