#pragma once

#include <span>
#include <vector>

#include "adbcr/data.hpp"
#include "adbcr/tensor.hpp"

namespace adbcr {

// mean (tau - tau_hat)^2. Throws DimensionError on a length mismatch and
// DomainError on empty input.
double pehe(std::span<const double> tau_true, std::span<const double> tau_hat);

// |mean(tau) - mean(tau_hat)|, same preconditions as pehe.
double ate_error(std::span<const double> tau_true, std::span<const double> tau_hat);

// mean (y_hat - y)^2.
double mean_squared_error(std::span<const double> prediction, std::span<const double> target);

// Nearest-neighbour imputed effects: each row takes the factual outcome of the
// closest row in the opposite arm (Euclidean distance on covariates z-scored
// over the given rows, ties to the lowest index) as its counterfactual, and
// tau_tilde = y1 - y0. Throws DomainError if an arm is empty.
std::vector<double> nn_imputed_cate(const Tensor& x, const std::vector<int>& t,
                                    std::span<const double> y);

// mean (tau_tilde - tau_hat)^2.
double nn_pehe(const Tensor& x, const std::vector<int>& t, std::span<const double> y,
               std::span<const double> tau_hat);
double nn_pehe(const Dataset& data, const std::vector<std::size_t>& rows,
               std::span<const double> tau_hat);

struct MeanSe {
  double mean = 0.0;
  double standard_error = 0.0;  // sample sd / sqrt(n); 0 for a single value
};

MeanSe mean_and_standard_error(std::span<const double> values);

}  // namespace adbcr
