#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hgnn {

/// Dense row-major matrix of doubles. Plain value type; the autodiff engine
/// wraps it in Tensor.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double value);
  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out = a * b (a: n x k, b: k x m).
Matrix matmul(const Matrix& a, const Matrix& b);
/// out = a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// out = a * b^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace hgnn
