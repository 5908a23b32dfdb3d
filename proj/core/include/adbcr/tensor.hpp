#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace adbcr {

// Dense row-major matrix of doubles. Column vectors are n x 1, row vectors
// (biases) are 1 x n.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
  Tensor(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor column(std::span<const double> values);
  static Tensor row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void fill(double value);

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Raw kernels shared by the tape and by plain inference paths so that both
// produce bit-identical values. Each output element accumulates over the
// inner dimension in ascending order, independent of the number of rows.
namespace kernels {

// out = a * b
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
// out += a * b^T
void matmul_add_bt(const Tensor& a, const Tensor& b, Tensor& out);
// out += a^T * b
void matmul_add_at(const Tensor& a, const Tensor& b, Tensor& out);

}  // namespace kernels

// Row subset, preserving the order of `rows`.
Tensor select_rows(const Tensor& t, std::span<const std::size_t> rows);
// Stack b below a; column counts must agree (an empty operand is skipped).
Tensor vstack(const Tensor& a, const Tensor& b);

}  // namespace adbcr
