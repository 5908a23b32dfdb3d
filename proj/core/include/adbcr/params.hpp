#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "adbcr/tensor.hpp"

namespace adbcr {

struct Parameter {
  std::string name;
  Tensor value;

  bool operator==(const Parameter&) const = default;
};

// Named, ordered collection of weight matrices and bias rows.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Total number of scalars across all tensors.
  std::size_t scalar_count() const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<Parameter> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  // Classic l2 penalty: weight_decay * theta is added to the gradient.
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  Tensor first;
  Tensor second;
};

// One Adam update of a single tensor. `step` is the 1-based step index used
// for bias correction.
void adam_update(Tensor& param, const Tensor& grad, AdamMoments& moments, long step,
                 const AdamConfig& config);

// Adam optimiser bound to a fixed list of parameter tensors. Each training
// phase owns its own instance, so moments never leak between phases.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Applies one update. Throws TrainingError, leaving every parameter
  // untouched, if any gradient entry is non-finite or shapes disagree.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  long steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<AdamMoments>& moments() const { return moments_; }

 private:
  AdamConfig config_;
  std::vector<AdamMoments> moments_;
  long step_ = 0;
};

}  // namespace adbcr
