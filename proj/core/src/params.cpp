#include "adbcr/params.hpp"

#include <cmath>

#include "adbcr/errors.hpp"

namespace adbcr {

std::size_t ParamSet::add(std::string name, Tensor value) {
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

void adam_update(Tensor& param, const Tensor& grad, AdamMoments& moments, long step,
                 const AdamConfig& config) {
  if (!param.same_shape(grad)) throw DimensionError("adam: gradient shape mismatch");
  if (!moments.first.same_shape(param)) {
    moments.first = Tensor(param.rows(), param.cols());
    moments.second = Tensor(param.rows(), param.cols());
  }
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + config.weight_decay * param[i];
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count");
  if (moments_.empty()) moments_.resize(params.size());
  if (moments_.size() != params.size()) throw DimensionError("adam: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i])) throw DimensionError("adam: gradient shape mismatch");
    if (!grads[i].all_finite()) throw TrainingError("adam: non-finite gradient");
  }
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(*params[i], grads[i], moments_[i], step_, config_);
  }
}

}  // namespace adbcr
