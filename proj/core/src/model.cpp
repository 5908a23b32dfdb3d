#include "adbcr/model.hpp"

#include <cmath>
#include <string>

#include "adbcr/errors.hpp"
#include "adbcr/random.hpp"

namespace adbcr {

namespace {

void validate(const Architecture& arch) {
  if (arch.input_dim == 0) throw ConfigError("input_dim must be at least 1");
  if (arch.shared_layers.empty()) throw ConfigError("shared layer list is empty");
  if (arch.head_layers.empty()) throw ConfigError("head layer list is empty");
  for (auto w : arch.shared_layers) {
    if (w == 0) throw ConfigError("zero-width shared layer");
  }
  for (auto w : arch.head_layers) {
    if (w == 0) throw ConfigError("zero-width head layer");
  }
  if (!(arch.dropout_p >= 0.0) || arch.dropout_p >= 1.0) {
    throw ConfigError("dropout probability must lie in [0, 1)");
  }
  if (arch.heads_per_arm < 1) throw ConfigError("heads_per_arm must be at least 1");
}

// Layer widths of a dense stack: in -> hidden... -> (out, when nonzero).
void add_dense_stack(ParamSet& set, const std::string& prefix, std::size_t in,
                     const std::vector<std::size_t>& hidden, std::size_t out) {
  std::size_t width = in;
  std::size_t layer = 0;
  auto add_layer = [&](std::size_t next) {
    set.add(prefix + ".w" + std::to_string(layer), Tensor(width, next));
    set.add(prefix + ".b" + std::to_string(layer), Tensor(1, next));
    width = next;
    ++layer;
  };
  for (auto h : hidden) add_layer(h);
  if (out > 0) add_layer(out);
}

void init_uniform_fan_in(ParamSet& set, std::mt19937_64 rng) {
  // Parameters come in (weight, bias) pairs; fan-in is the weight row count.
  for (std::size_t i = 0; i + 1 < set.size(); i += 2) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(set[i].value.rows()));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (auto& v : set[i].value.data()) v = unif(rng);
    for (auto& v : set[i + 1].value.data()) v = unif(rng);
  }
}

std::vector<ad::Var> bind_set(const ParamSet& set, ad::Tape& tape, bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(set.size());
  for (const auto& p : set) vars.push_back(tape.leaf(p.value, requires_grad));
  return vars;
}

ad::Var forward_stack(const std::vector<ad::Var>& params, ad::Var h, bool linear_last,
                      double dropout_p, const ForwardOptions& opts) {
  const std::size_t layers = params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_row(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (linear_last && l + 1 == layers) break;
    h = ad::elu(h);
    if (opts.training && dropout_p > 0.0) {
      if (opts.rng == nullptr) throw ConfigError("training forward pass requires a generator");
      h = ad::dropout(h, dropout_p, true, *opts.rng);
    }
  }
  return h;
}

void check_arm(const Model& model, int t, int r) {
  if (t < 0 || t >= kNumArms || r < 0 || r >= model.architecture().heads_per_arm) {
    throw DimensionError("head index (" + std::to_string(t) + ", " + std::to_string(r) +
                         ") out of range");
  }
}

}  // namespace

FeatureScaler FeatureScaler::identity(std::size_t dim) {
  return FeatureScaler{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

FeatureScaler FeatureScaler::fit(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  FeatureScaler s = identity(d);
  if (n == 0) return s;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(n);
    s.mean[j] = mean;
    s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Tensor FeatureScaler::apply(const Tensor& x) const {
  if (x.cols() != mean.size()) {
    throw DimensionError("scaler expects " + std::to_string(mean.size()) + " columns, got " +
                         std::to_string(x.cols()));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (out(i, j) - mean[j]) / scale[j];
  }
  return out;
}

OutcomeScaler OutcomeScaler::fit(std::span<const double> y) {
  OutcomeScaler s;
  if (y.empty()) return s;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  s.mean = mean;
  s.scale = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

Model make_empty_model(const Architecture& arch) {
  validate(arch);
  Model m;
  m.arch_ = arch;
  add_dense_stack(m.phi_, "phi", arch.input_dim, arch.shared_layers, 0);
  const std::size_t latent = arch.shared_layers.back();
  for (int t = 0; t < kNumArms; ++t) {
    m.heads_[t].resize(static_cast<std::size_t>(arch.heads_per_arm));
    for (int r = 0; r < arch.heads_per_arm; ++r) {
      add_dense_stack(m.heads_[t][r], "head" + std::to_string(t) + std::to_string(r), latent,
                      arch.head_layers, 1);
    }
  }
  if (arch.discriminator_outputs > 0) {
    add_dense_stack(m.discriminator_, "disc", latent, arch.head_layers,
                    arch.discriminator_outputs);
  }
  m.x_scaler = FeatureScaler::identity(arch.input_dim);
  return m;
}

Model Model::init(const Architecture& arch, std::uint64_t seed) {
  Model m = make_empty_model(arch);
  init_uniform_fan_in(m.phi_, substream(seed, "init/phi"));
  for (int t = 0; t < kNumArms; ++t) {
    for (int r = 0; r < arch.heads_per_arm; ++r) {
      init_uniform_fan_in(m.heads_[t][r],
                          substream(seed, "init/head/" + std::to_string(t) + "/" + std::to_string(r)));
    }
  }
  if (m.has_discriminator()) init_uniform_fan_in(m.discriminator_, substream(seed, "init/disc"));
  return m;
}

ParamSet& Model::head(int t, int r) {
  check_arm(*this, t, r);
  return heads_[t][r];
}

const ParamSet& Model::head(int t, int r) const {
  check_arm(*this, t, r);
  return heads_[t][r];
}

std::size_t Model::parameter_count() const {
  std::size_t total = phi_.scalar_count() + discriminator_.scalar_count();
  for (const auto& arm : heads_) {
    for (const auto& h : arm) total += h.scalar_count();
  }
  return total;
}

BoundModel bind(const Model& model, ad::Tape& tape, Trainable trainable) {
  BoundModel b;
  b.model = &model;
  b.phi = bind_set(model.phi(), tape, contains(trainable, Trainable::phi));
  for (int t = 0; t < kNumArms; ++t) {
    for (int r = 0; r < model.architecture().heads_per_arm; ++r) {
      b.heads[t].push_back(bind_set(model.head(t, r), tape, contains(trainable, Trainable::heads)));
    }
  }
  if (model.has_discriminator()) {
    b.discriminator =
        bind_set(model.discriminator(), tape, contains(trainable, Trainable::discriminator));
  }
  return b;
}

ad::Var forward_phi(const BoundModel& bound, ad::Var x, const ForwardOptions& opts) {
  const auto& arch = bound.model->architecture();
  if (x.value().cols() != arch.input_dim) {
    throw DimensionError("model expects " + std::to_string(arch.input_dim) +
                         " covariates, got " + std::to_string(x.value().cols()));
  }
  return forward_stack(bound.phi, x, false, arch.dropout_p, opts);
}

ad::Var forward_head(const BoundModel& bound, ad::Var representation, int t, int r,
                     const ForwardOptions& opts) {
  check_arm(*bound.model, t, r);
  return forward_stack(bound.heads[t][static_cast<std::size_t>(r)], representation, true,
                       bound.model->architecture().dropout_p, opts);
}

ad::Var forward_discriminator(const BoundModel& bound, ad::Var representation,
                              const ForwardOptions& opts) {
  if (!bound.model->has_discriminator()) throw ConfigError("model has no discriminator");
  return forward_stack(bound.discriminator, representation, true,
                       bound.model->architecture().dropout_p, opts);
}

std::vector<Tensor> gradients(const ad::Tape& tape, const std::vector<ad::Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (auto v : vars) out.push_back(tape.grad(v));
  return out;
}

Tensor forward_head(const Model& model, const Tensor& x_standardized, int t, int r, bool training,
                    std::mt19937_64* rng) {
  ad::Tape tape;
  BoundModel b = bind(model, tape, Trainable::none);
  ForwardOptions opts{training, rng};
  ad::Var h = forward_phi(b, tape.constant(x_standardized), opts);
  return forward_head(b, h, t, r, opts).value();
}

std::vector<double> PotentialOutcomes::cate() const {
  std::vector<double> tau(y0.size());
  for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = y1[i] - y0[i];
  return tau;
}

PotentialOutcomes predict_potential_outcomes(const Model& model, const Tensor& x_raw) {
  ad::Tape tape;
  BoundModel b = bind(model, tape, Trainable::none);
  ForwardOptions opts{false, nullptr};
  ad::Var h = forward_phi(b, tape.constant(model.x_scaler.apply(x_raw)), opts);
  const int heads = model.architecture().heads_per_arm;
  PotentialOutcomes out;
  const std::size_t n = x_raw.rows();
  for (int t = 0; t < kNumArms; ++t) {
    std::vector<double> acc(n, 0.0);
    for (int r = 0; r < heads; ++r) {
      const Tensor& y = forward_head(b, h, t, r, opts).value();
      for (std::size_t i = 0; i < n; ++i) acc[i] += y[i];
    }
    for (auto& v : acc) v = model.y_scaler.destandardize(v / heads);
    (t == 0 ? out.y0 : out.y1) = std::move(acc);
  }
  return out;
}

}  // namespace adbcr
