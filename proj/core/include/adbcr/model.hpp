#pragma once

// Shared-representation network with treatment-specific outcome heads.
//
// The representation Phi maps standardized covariates to a latent space. For
// each treatment arm t there are `heads_per_arm` outcome heads R(t, r); the
// ADBCR layout uses two differently initialised heads per arm and predicts
// the arm's potential outcome as their average. The same class also carries
// the single-head-per-arm layout with a domain discriminator used by the
// DANN-style baseline.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "adbcr/autodiff.hpp"
#include "adbcr/params.hpp"
#include "adbcr/tensor.hpp"

namespace adbcr {

inline constexpr int kNumArms = 2;

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> shared_layers;
  std::vector<std::size_t> head_layers;
  double dropout_p = 0.0;
  int heads_per_arm = 2;
  // Output width of the optional domain discriminator head; 0 means absent.
  std::size_t discriminator_outputs = 0;

  bool operator==(const Architecture&) const = default;
};

// Per-covariate z-scoring fitted on the training split.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaler identity(std::size_t dim);
  static FeatureScaler fit(const Tensor& x);
  Tensor apply(const Tensor& x) const;

  bool operator==(const FeatureScaler&) const = default;
};

struct OutcomeScaler {
  double mean = 0.0;
  double scale = 1.0;

  static OutcomeScaler fit(std::span<const double> y);
  double standardize(double y) const { return (y - mean) / scale; }
  double destandardize(double z) const { return z * scale + mean; }

  bool operator==(const OutcomeScaler&) const = default;
};

class Model {
 public:
  Model() = default;

  // Draws every weight and bias from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  // Phi, each head and the discriminator use separate substreams of `seed`.
  static Model init(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }

  ParamSet& phi() { return phi_; }
  const ParamSet& phi() const { return phi_; }
  ParamSet& head(int t, int r);
  const ParamSet& head(int t, int r) const;
  ParamSet& discriminator() { return discriminator_; }
  const ParamSet& discriminator() const { return discriminator_; }
  bool has_discriminator() const { return arch_.discriminator_outputs > 0; }

  std::size_t parameter_count() const;

  FeatureScaler x_scaler;
  OutcomeScaler y_scaler;

  bool operator==(const Model&) const = default;

 private:
  friend Model make_empty_model(const Architecture& arch);

  Architecture arch_;
  ParamSet phi_;
  std::array<std::vector<ParamSet>, kNumArms> heads_;
  ParamSet discriminator_;
};

// Architecture with correctly shaped zero tensors (used by checkpoint loading).
Model make_empty_model(const Architecture& arch);

// Which parameter groups receive gradients when a model is bound to a tape.
enum class Trainable : unsigned {
  none = 0,
  phi = 1u << 0,
  heads = 1u << 1,
  discriminator = 1u << 2,
  all = (1u << 0) | (1u << 1) | (1u << 2),
};
constexpr Trainable operator|(Trainable a, Trainable b) {
  return static_cast<Trainable>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool contains(Trainable set, Trainable part) {
  return (static_cast<unsigned>(set) & static_cast<unsigned>(part)) != 0;
}

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
};

// Parameters copied onto a tape as leaves.
struct BoundModel {
  const Model* model = nullptr;
  std::vector<ad::Var> phi;
  std::array<std::vector<std::vector<ad::Var>>, kNumArms> heads;
  std::vector<ad::Var> discriminator;
};

BoundModel bind(const Model& model, ad::Tape& tape, Trainable trainable);

ad::Var forward_phi(const BoundModel& bound, ad::Var x, const ForwardOptions& opts);
ad::Var forward_head(const BoundModel& bound, ad::Var representation, int t, int r,
                     const ForwardOptions& opts);
ad::Var forward_discriminator(const BoundModel& bound, ad::Var representation,
                              const ForwardOptions& opts);

// Gradients of `vars` after tape.backward(), in order.
std::vector<Tensor> gradients(const ad::Tape& tape, const std::vector<ad::Var>& vars);

// R(t, r)(Phi(x)) for standardized covariate rows; an n x 1 column.
Tensor forward_head(const Model& model, const Tensor& x_standardized, int t, int r,
                    bool training = false, std::mt19937_64* rng = nullptr);

struct PotentialOutcomes {
  std::vector<double> y0;
  std::vector<double> y1;

  std::vector<double> cate() const;
};

// Averages the heads of each arm in eval mode and maps back to the outcome
// scale. `x_raw` is in original covariate units.
PotentialOutcomes predict_potential_outcomes(const Model& model, const Tensor& x_raw);

}  // namespace adbcr
