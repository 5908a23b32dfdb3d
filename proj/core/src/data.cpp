#include "adbcr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "adbcr/binary_io.hpp"
#include "adbcr/errors.hpp"
#include "adbcr/random.hpp"

namespace adbcr {

const char* to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::validation:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::vector<double> Dataset::true_cate() const {
  if (!has_ground_truth()) throw DomainError("dataset has no mu0/mu1 ground truth");
  std::vector<double> tau(n());
  for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = (*mu1)[i] - (*mu0)[i];
  return tau;
}

std::vector<std::size_t> Dataset::rows(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::labeled_rows(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s && !is_stripped(i)) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  const std::size_t rows_n = n();
  if (x.rows() != rows_n || y.size() != rows_n) throw DatasetError("dataset columns misaligned");
  auto check_opt = [rows_n](const std::optional<std::vector<double>>& v, const char* name) {
    if (v && v->size() != rows_n) throw DatasetError(std::string(name) + " length mismatch");
  };
  check_opt(y_cf, "y_cfactual");
  check_opt(mu0, "mu0");
  check_opt(mu1, "mu1");
  if (mu0.has_value() != mu1.has_value()) throw DatasetError("mu0 and mu1 must come together");
  for (int v : t) {
    if (v != 0 && v != 1) throw DatasetError("treatment must be 0 or 1");
  }
  if (!split.empty() && split.size() != rows_n) throw DatasetError("split length mismatch");
  if (!stripped.empty() && stripped.size() != rows_n) throw DatasetError("stripped mask length");
  if (unlabeled_x.rows() > 0 && unlabeled_x.cols() != x.cols()) {
    throw DatasetError("unlabeled rows have a different covariate count");
  }
  if (!covariate_names.empty() && covariate_names.size() != x.cols()) {
    throw DatasetError("covariate name count mismatch");
  }
}

std::array<std::size_t, 2> arm_counts(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::array<std::size_t, 2> c{0, 0};
  for (auto r : rows) ++c[static_cast<std::size_t>(data.t[r])];
  return c;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& cell, const std::string& source, std::size_t row,
                  const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(source + ": row " + std::to_string(row) + ", column '" + column +
                     "': not a number: '" + cell + "'");
  }
  return v;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file");
  const auto header = split_line(line);

  int col_t = -1, col_y = -1, col_ycf = -1, col_mu0 = -1, col_mu1 = -1, col_split = -1;
  std::vector<std::size_t> covariate_cols;
  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    const int ci = static_cast<int>(c);
    if (h == "t") col_t = ci;
    else if (h == "y_factual") col_y = ci;
    else if (h == "y_cfactual") col_ycf = ci;
    else if (h == "mu0") col_mu0 = ci;
    else if (h == "mu1") col_mu1 = ci;
    else if (h == "split") col_split = ci;
    else {
      covariate_cols.push_back(c);
      data.covariate_names.push_back(h);
    }
  }
  if (col_t < 0) throw ParseError(source + ": missing mandatory column 't'");
  if (col_y < 0) throw ParseError(source + ": missing mandatory column 'y_factual'");
  if ((col_mu0 < 0) != (col_mu1 < 0)) throw ParseError(source + ": mu0 and mu1 must appear together");

  const std::size_t d = covariate_cols.size();
  std::vector<double> xs, ux;
  std::vector<double> ycf, mu0, mu1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(source + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    bool unlabeled = false;
    if (col_split >= 0) {
      const std::string& s = cells[static_cast<std::size_t>(col_split)];
      if (s == "train") data.split.push_back(Split::train);
      else if (s == "val") data.split.push_back(Split::validation);
      else if (s == "test") data.split.push_back(Split::test);
      else if (s == "unlabeled") unlabeled = true;
      else {
        throw ParseError(source + ": row " + std::to_string(row) +
                         ", column 'split': unknown split '" + s + "'");
      }
    }
    auto& xdest = unlabeled ? ux : xs;
    for (auto c : covariate_cols) xdest.push_back(parse_real(cells[c], source, row, header[c]));
    if (unlabeled) continue;

    const double tv = parse_real(cells[static_cast<std::size_t>(col_t)], source, row, "t");
    if (tv != 0.0 && tv != 1.0) {
      throw ParseError(source + ": row " + std::to_string(row) +
                       ", column 't': treatment must be 0 or 1, got '" +
                       cells[static_cast<std::size_t>(col_t)] + "'");
    }
    data.t.push_back(static_cast<int>(tv));
    data.y.push_back(parse_real(cells[static_cast<std::size_t>(col_y)], source, row, "y_factual"));
    if (col_ycf >= 0) {
      ycf.push_back(parse_real(cells[static_cast<std::size_t>(col_ycf)], source, row, "y_cfactual"));
    }
    if (col_mu0 >= 0) {
      mu0.push_back(parse_real(cells[static_cast<std::size_t>(col_mu0)], source, row, "mu0"));
      mu1.push_back(parse_real(cells[static_cast<std::size_t>(col_mu1)], source, row, "mu1"));
    }
  }
  const std::size_t n = data.t.size();
  data.x = Tensor(n, d, std::move(xs));
  const std::size_t m = d == 0 ? 0 : ux.size() / d;
  data.unlabeled_x = Tensor(m, d, std::move(ux));
  if (col_ycf >= 0) data.y_cf = std::move(ycf);
  if (col_mu0 >= 0) {
    data.mu0 = std::move(mu0);
    data.mu1 = std::move(mu1);
  }
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path.string());
}

std::string format_csv(const Dataset& data) {
  data.validate();
  std::ostringstream out;
  std::vector<std::string> names = data.covariate_names;
  if (names.empty()) {
    for (std::size_t j = 0; j < data.d(); ++j) names.push_back("x" + std::to_string(j + 1));
  }
  const bool with_split = data.has_split() || data.unlabeled_x.rows() > 0;
  out << "t,y_factual";
  if (data.y_cf) out << ",y_cfactual";
  if (data.has_ground_truth()) out << ",mu0,mu1";
  if (with_split) out << ",split";
  for (const auto& nm : names) out << ',' << nm;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << data.t[i] << ',' << format_real(data.y[i]);
    if (data.y_cf) out << ',' << format_real((*data.y_cf)[i]);
    if (data.has_ground_truth()) {
      out << ',' << format_real((*data.mu0)[i]) << ',' << format_real((*data.mu1)[i]);
    }
    if (with_split) out << ',' << (data.has_split() ? to_string(data.split[i]) : "train");
    for (std::size_t j = 0; j < data.d(); ++j) out << ',' << format_real(data.x(i, j));
    out << '\n';
  }
  for (std::size_t i = 0; i < data.unlabeled_x.rows(); ++i) {
    out << ',';
    if (data.y_cf) out << ',';
    if (data.has_ground_truth()) out << ",,";
    out << ",unlabeled";
    for (std::size_t j = 0; j < data.d(); ++j) out << ',' << format_real(data.unlabeled_x(i, j));
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, format_csv(data));
}

// ---------------------------------------------------------------------------
// Splitting

Dataset split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed) {
  const std::array<double, 3> f{fractions.train, fractions.validation, fractions.test};
  for (double v : f) {
    if (!(v >= 0.0)) throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const std::size_t n = data.n();

  // Exact split sizes by largest remainder.
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = f[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[s] = exact - static_cast<double>(counts[s]);
    assigned += counts[s];
  }
  while (assigned < n) {
    const auto s = static_cast<std::size_t>(
        std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++counts[s];
    remainder[s] = -1.0;
    ++assigned;
  }

  // Evenly interleaved label sequence with exact counts; dealing it over rows
  // ordered arm by arm gives each arm a proportional share of every split.
  std::vector<std::pair<double, std::size_t>> keys;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t j = 0; j < counts[s]; ++j) {
      keys.emplace_back((static_cast<double>(j) + 0.5) / static_cast<double>(counts[s]), s);
    }
  }
  std::sort(keys.begin(), keys.end());

  auto rng = substream(seed, "split");
  std::vector<std::size_t> order;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.t[i] == arm) rows.push_back(i);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    order.insert(order.end(), rows.begin(), rows.end());
  }

  Dataset out = data;
  out.split.assign(n, Split::train);
  for (std::size_t k = 0; k < n; ++k) out.split[order[k]] = static_cast<Split>(keys[k].second);

  for (std::size_t s = 0; s < 3; ++s) {
    if (counts[s] == 0) continue;
    const auto arms = arm_counts(out, out.rows(static_cast<Split>(s)));
    if (arms[0] == 0 || arms[1] == 0) {
      throw DatasetError(std::string("split '") + to_string(static_cast<Split>(s)) +
                         "' would lack a treatment arm");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

const char* to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::linear:
      return "linear";
    case Nonlinearity::quadratic:
      return "quadratic";
    case Nonlinearity::exp:
      return "exp";
  }
  return "?";
}

Nonlinearity parse_nonlinearity(const std::string& text) {
  if (text == "linear") return Nonlinearity::linear;
  if (text == "quadratic") return Nonlinearity::quadratic;
  if (text == "exp") return Nonlinearity::exp;
  throw ConfigError("unknown nonlinearity '" + text + "' (expected linear, quadratic or exp)");
}

void DgpConfig::validate() const {
  if (n < 50) throw ConfigError("n must be at least 50");
  if (d < 2) throw ConfigError("d must be at least 2");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be non-negative");
  if (!std::isfinite(bias_strength) || !std::isfinite(effect_heterogeneity) ||
      !std::isfinite(base_effect) || !std::isfinite(outcome_curvature_scale) ||
      !std::isfinite(effect_curvature_scale)) {
    throw ConfigError("generator coefficients must be finite");
  }
}

double clipped_propensity(double logit) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return std::clamp(p, kPropensityMin, kPropensityMax);
}

namespace {

// Centered elementwise transform applied to each covariate.
double curvature_term(Nonlinearity kind, double xj) {
  switch (kind) {
    case Nonlinearity::linear:
      return 0.0;
    case Nonlinearity::quadratic:
      return xj * xj - 1.0;
    case Nonlinearity::exp:
      // E[exp(x/2)] = exp(1/8) for x ~ N(0, 1)
      return std::exp(0.5 * xj) - std::exp(0.125);
  }
  return 0.0;
}

double response(Nonlinearity kind, const std::vector<double>& linear,
                const std::vector<double>& curvature, std::span<const double> x) {
  double v = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    v += linear[j] * x[j] + curvature[j] * curvature_term(kind, x[j]);
  }
  return v;
}

}  // namespace

GeneratedData generate(const DgpConfig& config) {
  config.validate();
  const std::size_t n = config.n, d = config.d;
  auto coef_rng = substream(config.seed, "dgp/coefficients");
  auto x_rng = substream(config.seed, "dgp/covariates");
  auto t_rng = substream(config.seed, "dgp/treatment");
  auto noise_rng = substream(config.seed, "dgp/noise");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  DgpCoefficients c;
  auto draw = [&](double sd) {
    std::vector<double> v(d);
    for (auto& e : v) e = sd * normal(coef_rng);
    return v;
  };
  c.propensity_direction = draw(1.0);
  const double norm = std::sqrt(std::inner_product(c.propensity_direction.begin(),
                                                   c.propensity_direction.end(),
                                                   c.propensity_direction.begin(), 0.0));
  for (auto& e : c.propensity_direction) e /= norm;
  c.outcome_linear = draw(inv_sqrt_d);
  c.effect_linear = draw(inv_sqrt_d);
  if (config.nonlinearity == Nonlinearity::linear) {
    c.outcome_curvature.assign(d, 0.0);
    c.effect_curvature.assign(d, 0.0);
  } else {
    c.outcome_curvature = draw(inv_sqrt_d * config.outcome_curvature_scale);
    c.effect_curvature = draw(inv_sqrt_d * config.effect_curvature_scale);
  }

  GeneratedData g;
  Dataset& data = g.data;
  data.x = Tensor(n, d);
  for (auto& v : data.x.data()) v = normal(x_rng);
  data.t.resize(n);
  data.y.resize(n);
  data.y_cf.emplace(n);
  data.mu0.emplace(n);
  data.mu1.emplace(n);
  g.propensity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = data.x.row_span(i);
    double logit = 0.0;
    for (std::size_t j = 0; j < d; ++j) logit += c.propensity_direction[j] * xi[j];
    const double e = clipped_propensity(config.bias_strength * logit);
    g.propensity[i] = e;
    data.t[i] = unif(t_rng) < e ? 1 : 0;
    const double mu0 = response(config.nonlinearity, c.outcome_linear, c.outcome_curvature, xi);
    const double tau =
        config.base_effect +
        config.effect_heterogeneity *
            response(config.nonlinearity, c.effect_linear, c.effect_curvature, xi);
    (*data.mu0)[i] = mu0;
    (*data.mu1)[i] = mu0 + tau;
    const double eps_f = config.noise_sd * normal(noise_rng);
    const double eps_cf = config.noise_sd * normal(noise_rng);
    const double mu_f = data.t[i] == 1 ? (*data.mu1)[i] : (*data.mu0)[i];
    const double mu_cf = data.t[i] == 1 ? (*data.mu0)[i] : (*data.mu1)[i];
    data.y[i] = config.noise_sd == 0.0 ? mu_f : mu_f + eps_f;
    (*data.y_cf)[i] = config.noise_sd == 0.0 ? mu_cf : mu_cf + eps_cf;
  }
  for (std::size_t j = 0; j < d; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
  data.unlabeled_x = Tensor(0, d);
  data = split(data, SplitFractions{}, config.seed);
  g.coefficients = std::move(c);
  return g;
}

std::string ground_truth_json(const DgpConfig& config, const DgpCoefficients& c) {
  nlohmann::ordered_json j;
  j["n"] = config.n;
  j["d"] = config.d;
  j["bias_strength"] = config.bias_strength;
  j["effect_heterogeneity"] = config.effect_heterogeneity;
  j["noise_sd"] = config.noise_sd;
  j["base_effect"] = config.base_effect;
  j["outcome_curvature_scale"] = config.outcome_curvature_scale;
  j["effect_curvature_scale"] = config.effect_curvature_scale;
  j["nonlinearity"] = to_string(config.nonlinearity);
  j["seed"] = config.seed;
  j["propensity_clip"] = {kPropensityMin, kPropensityMax};
  j["propensity_direction"] = c.propensity_direction;
  j["outcome_linear"] = c.outcome_linear;
  j["outcome_curvature"] = c.outcome_curvature;
  j["effect_linear"] = c.effect_linear;
  j["effect_curvature"] = c.effect_curvature;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

Dataset strip_outcomes(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out = data;
  if (rows.empty()) return out;
  if (out.stripped.empty()) out.stripped.assign(out.n(), false);
  std::vector<std::size_t> fresh;
  for (auto r : rows) {
    if (r >= out.n()) throw ConfigError("strip_outcomes: row index out of range");
    if (out.has_split() && out.split[r] == Split::validation) {
      throw ConfigError("strip_outcomes: row " + std::to_string(r) +
                        " belongs to the validation split used for model selection");
    }
    if (!out.stripped[r]) {
      out.stripped[r] = true;
      fresh.push_back(r);
    }
  }
  if (out.unlabeled_x.cols() == 0) out.unlabeled_x = Tensor(0, out.d());
  out.unlabeled_x = vstack(out.unlabeled_x, select_rows(out.x, fresh));
  return out;
}

}  // namespace adbcr
