#include "hgnn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hgnn/common.hpp"

namespace hgnn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error("Matrix: data length " + std::to_string(data_.size()) + " does not match shape " +
                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix Matrix::transposed() const {
  Matrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t k_dim = a.cols();
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.data().data() + i * m;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data().data() + k * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error("matmul_tn: row counts differ");
  Matrix out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.data().data() + k * m;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* o = out.data().data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aki * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error("matmul_nt: column counts differ");
  Matrix out(a.rows(), b.rows());
  const std::size_t k_dim = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data().data() + i * k_dim;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.data().data() + j * k_dim;
      double s = 0.0;
      for (std::size_t k = 0; k < k_dim; ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.shape() != b.shape()) throw Error("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace hgnn
