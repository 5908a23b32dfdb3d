#include "adbcr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adbcr/errors.hpp"

namespace adbcr {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged tensor literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor Tensor::column(std::span<const double> values) {
  return Tensor(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

namespace kernels {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (out.rows() != n || out.cols() != m) out = Tensor(n, m);
  out.fill(0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    const double* arow = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += s * brow[j];
    }
  }
}

void matmul_add_bt(const Tensor& a, const Tensor& b, Tensor& out) {
  // a: n x m, b: k x m, out: n x k
  const std::size_t n = a.rows(), m = a.cols(), k = b.rows();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = pb + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += arow[j] * brow[j];
      po[i * k + p] += acc;
    }
  }
}

void matmul_add_at(const Tensor& a, const Tensor& b, Tensor& out) {
  // a: n x k, b: n x m, out: k x m
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    const double* brow = pb + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      if (s == 0.0) continue;
      double* orow = po + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += s * brow[j];
    }
  }
}

}  // namespace kernels

Tensor select_rows(const Tensor& t, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.rows()) throw DimensionError("select_rows: row index out of range");
    auto src = t.row_span(rows[i]);
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * t.cols()));
  }
  return out;
}

Tensor vstack(const Tensor& a, const Tensor& b) {
  if (b.rows() == 0) return a;
  if (a.rows() == 0) return b;
  if (a.cols() != b.cols()) throw DimensionError("vstack: column counts differ");
  std::vector<double> data(a.values());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Tensor(a.rows() + b.rows(), a.cols(), std::move(data));
}

}  // namespace adbcr
