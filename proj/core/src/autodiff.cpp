#include "adbcr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "adbcr/errors.hpp"

namespace adbcr::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
  }
}

void require_nonempty(const Tensor& a, const char* op) {
  if (a.empty()) throw DomainError(std::string(op) + ": empty input");
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw Error("operands recorded on different tapes");
  return *a.tape;
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw DimensionError("scalar(): node is not 1x1");
  return v[0];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [this](std::size_t p) { return nodes_[p].requires_grad; });
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& delta) {
  if (!nodes_[id].requires_grad) return;
  Tensor& g = grad_slot(id);
  auto gd = g.data();
  auto dd = delta.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += dd[i];
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

void Tape::backward(Var root) {
  if (nodes_[root.id].value.size() != 1) throw DimensionError("backward: root must be 1x1");
  for (auto& n : nodes_) {
    if (n.has_grad) n.grad.fill(0.0);
  }
  if (!nodes_[root.id].requires_grad) return;
  grad_slot(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::mark(std::string label) {
  if (!has_mark(label)) marks_.push_back(std::move(label));
}

bool Tape::has_mark(const std::string& label) const {
  return std::find(marks_.begin(), marks_.end(), label) != marks_.end();
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor out;
  kernels::matmul(a.value(), b.value(), out);
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(Var{&t, ia})) {
      kernels::matmul_add_bt(g, t.value(Var{&t, ib}), t.grad_slot(ia));
    }
    if (t.requires_grad(Var{&t, ib})) {
      kernels::matmul_add_at(t.value(Var{&t, ia}), g, t.grad_slot(ib));
    }
  });
}

Var add_row(Var a, Var bias) {
  Tape& tape = tape_of(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols()) throw DimensionError("add_row: bias shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
  }
  const std::size_t ia = a.id, ib = bias.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(Var{&t, ib})) {
      Tensor& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(Var{&t, ib})) {
      Tensor& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(Var{&t, ia});
    const Tensor& vb = t.value(Var{&t, ib});
    if (t.requires_grad(Var{&t, ia})) {
      Tensor& ga = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(Var{&t, ib})) {
      Tensor& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, factor](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id;
  return a.tape->record(Tensor(1, 1, total), {ia}, [ia](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_slot(ia);
    for (auto& v : ga.data()) v += g[0];
  });
}

Tensor elu_values(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) {
    if (!(v > 0.0)) v = std::expm1(v);
  }
  return out;
}

Var elu(Var a) {
  Tensor out = elu_values(a.value());
  const std::size_t ia = a.id;
  const std::size_t self = a.tape->size();
  return a.tape->record(std::move(out), {ia}, [ia, self](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(Var{&t, ia});
    const Tensor& y = t.value(Var{&t, self});
    Tensor& ga = t.grad_slot(ia);
    // d/dx (exp(x) - 1) = exp(x) = y + 1
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + 1.0);
  });
}

Var dropout(Var a, double p, bool training, std::mt19937_64& rng) {
  if (!(p >= 0.0) || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) return a;
  const Tensor& x = a.value();
  Tensor mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto& m : mask.data()) m = unif(rng) < p ? 0.0 : keep_scale;
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia, mask = std::move(mask)](Tape& t, const Tensor& g) {
                          Tensor& ga = t.grad_slot(ia);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                        });
}

Var mse_loss(Var pred, Var target) {
  Tape& tape = tape_of(pred, target);
  require_same_shape(pred.value(), target.value(), "mse_loss");
  require_nonempty(pred.value(), "mse_loss");
  const Tensor& a = pred.value();
  const Tensor& b = target.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    acc += r * r;
  }
  const double n = static_cast<double>(a.size());
  const std::size_t ia = pred.id, ib = target.id;
  return tape.record(Tensor(1, 1, acc / n), {ia, ib}, [ia, ib, n](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(Var{&t, ia});
    const Tensor& vb = t.value(Var{&t, ib});
    const double c = 2.0 * g[0] / n;
    if (t.requires_grad(Var{&t, ia})) {
      Tensor& ga = t.grad_slot(ia);
      for (std::size_t i = 0; i < va.size(); ++i) ga[i] += c * (va[i] - vb[i]);
    }
    if (t.requires_grad(Var{&t, ib})) {
      Tensor& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < va.size(); ++i) gb[i] -= c * (va[i] - vb[i]);
    }
  });
}

Var l1_mean(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "l1_mean");
  require_nonempty(a.value(), "l1_mean");
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += std::abs(va[i] - vb[i]);
  const double n = static_cast<double>(va.size());
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(Tensor(1, 1, acc / n), {ia, ib}, [ia, ib, n](Tape& t, const Tensor& g) {
    const Tensor& xa = t.value(Var{&t, ia});
    const Tensor& xb = t.value(Var{&t, ib});
    const double c = g[0] / n;
    const bool ga_needed = t.requires_grad(Var{&t, ia});
    const bool gb_needed = t.requires_grad(Var{&t, ib});
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const double d = xa[i] - xb[i];
      const double s = d > 0.0 ? c : (d < 0.0 ? -c : 0.0);
      if (ga_needed) t.grad_slot(ia)[i] += s;
      if (gb_needed) t.grad_slot(ib)[i] -= s;
    }
  });
}

Var gather_rows(Var a, std::vector<std::size_t> rows) {
  Tensor out = select_rows(a.value(), rows);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia},
                        [ia, rows = std::move(rows)](Tape& t, const Tensor& g) {
                          Tensor& ga = t.grad_slot(ia);
                          const std::size_t cols = g.cols();
                          for (std::size_t i = 0; i < rows.size(); ++i) {
                            for (std::size_t j = 0; j < cols; ++j) ga(rows[i], j) += g(i, j);
                          }
                        });
}

Var softmax_cross_entropy(Var logits, std::vector<int> labels) {
  const Tensor& z = logits.value();
  if (labels.size() != z.rows()) throw DimensionError("softmax_cross_entropy: label count");
  require_nonempty(z, "softmax_cross_entropy");
  const std::size_t n = z.rows(), k = z.cols();
  Tensor probs(n, k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw DomainError("softmax_cross_entropy: label out of range");
    }
    double mx = z(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(z(i, j) - mx);
    for (std::size_t j = 0; j < k; ++j) probs(i, j) = std::exp(z(i, j) - mx) / denom;
    loss += mx + std::log(denom) - z(i, static_cast<std::size_t>(labels[i]));
  }
  const double nn = static_cast<double>(n);
  const std::size_t ia = logits.id;
  return logits.tape->record(
      Tensor(1, 1, loss / nn), {ia},
      [ia, nn, probs = std::move(probs), labels = std::move(labels)](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_slot(ia);
        const double c = g[0] / nn;
        for (std::size_t i = 0; i < probs.rows(); ++i) {
          for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double target = static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0;
            ga(i, j) += c * (probs(i, j) - target);
          }
        }
      });
}

}  // namespace adbcr::ad
