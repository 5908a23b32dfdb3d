#pragma once

// Domain-adversarial counterfactual regression baseline.
//
// Shared Phi, one outcome head per arm and a discriminator head that
// classifies the treatment arm from Phi(x). Each batch runs
//   (i)   factual MSE on Phi and the outcome heads,
//   (ii)  discriminator cross-entropy on the discriminator only,
//   (iii) Phi minimising -reversal_weight * cross-entropy (gradient reversal),
// each phase with its own Adam state. Phase (iii) is skipped when the
// reversal weight is 0. Selection uses the factual validation MSE.

#include <random>
#include <string>

#include "adbcr/data.hpp"
#include "adbcr/model.hpp"
#include "adbcr/objectives.hpp"
#include "adbcr/params.hpp"
#include "adbcr/trainer.hpp"

namespace adbcr {

struct DanncrConfig {
  // Network, optimiser and stopping settings; mode, k, metric and the
  // adversary weight of the base config are ignored.
  TrainConfig net;
  double reversal_weight = 1.0;

  void validate() const;
  std::string canonical() const;
  std::string fingerprint() const;
};

Architecture danncr_architecture(const TrainConfig& net, std::size_t input_dim);

// Phase (ii). Returns the cross-entropy seen by the update.
double danncr_discriminator_step(Model& model, const BatchView& batch, Adam& optimizer,
                                 std::mt19937_64& dropout_rng);
// Phase (iii). Returns the cross-entropy seen by the update.
double danncr_reversal_step(Model& model, const BatchView& batch, Adam& optimizer,
                            double reversal_weight, std::mt19937_64& dropout_rng);

// Eval-mode fraction of rows whose arg-max discriminator class equals t.
double discriminator_accuracy(const Model& model, const BatchView& batch);

TrainResult danncr_train(const Dataset& data, const DanncrConfig& config,
                         TrainObserver* observer = nullptr);

}  // namespace adbcr
