#include "hgnn/sparse.hpp"

#include <algorithm>
#include <string>

#include "hgnn/common.hpp"

namespace hgnn {

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::span<const Triplet> entries) {
  CsrMatrix m(rows, cols);
  std::vector<Triplet> sorted(entries.begin(), entries.end());
  for (const auto& t : sorted) {
    if (t.row >= rows || t.col >= cols) {
      throw Error("CsrMatrix: entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                  ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (t.value < 0) throw Error("CsrMatrix: negative count");
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::int64_t sum = 0;
    while (j < sorted.size() && sorted[j].row == sorted[i].row && sorted[j].col == sorted[i].col) {
      if (__builtin_add_overflow(sum, sorted[j].value, &sum)) throw Error("CsrMatrix: count overflow");
      ++j;
    }
    if (sum != 0) {
      m.col_idx_.push_back(sorted[i].col);
      m.values_.push_back(sum);
      ++m.row_ptr_[sorted[i].row + 1];
    }
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

std::int64_t CsrMatrix::at(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols_) throw Error("CsrMatrix::at: index out of range");
  const auto cols = row_cols(row);
  const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(col));
  if (it == cols.end() || *it != col) return 0;
  return values_[row_ptr_[row] + static_cast<std::size_t>(it - cols.begin())];
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t(cols_, rows_);
  for (auto c : col_idx_) ++t.row_ptr_[c + 1];
  for (std::size_t r = 0; r < cols_; ++r) t.row_ptr_[r + 1] += t.row_ptr_[r];
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<std::size_t> cursor(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t dst = cursor[col_idx_[k]]++;
      t.col_idx_[dst] = static_cast<std::uint32_t>(r);
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

CsrMatrix CsrMatrix::binarized() const {
  CsrMatrix b = *this;
  std::fill(b.values_.begin(), b.values_.end(), 1);
  return b;
}

std::vector<std::int64_t> CsrMatrix::row_sums() const {
  std::vector<std::int64_t> out(rows_, 0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[r] += values_[k];
  return out;
}

std::vector<std::int64_t> CsrMatrix::col_sums() const {
  std::vector<std::int64_t> out(cols_, 0);
  for (std::size_t k = 0; k < nnz(); ++k) out[col_idx_[k]] += values_[k];
  return out;
}

std::int64_t CsrMatrix::total() const {
  std::int64_t s = 0;
  for (auto v : values_) s += v;
  return s;
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols() != b.rows()) {
    throw Error("multiply: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                std::to_string(b.rows()) + ")");
  }
  // Gustavson: scatter each output row into a dense accumulator, then emit
  // the touched columns in sorted order.
  std::vector<Triplet> out;
  std::vector<std::int64_t> acc(b.cols(), 0);
  std::vector<char> touched(b.cols(), 0);
  std::vector<std::uint32_t> cols;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cols.clear();
    const auto a_cols = a.row_cols(i);
    const auto a_vals = a.row_values(i);
    for (std::size_t p = 0; p < a_cols.size(); ++p) {
      const auto b_cols = b.row_cols(a_cols[p]);
      const auto b_vals = b.row_values(a_cols[p]);
      for (std::size_t q = 0; q < b_cols.size(); ++q) {
        std::int64_t prod;
        if (__builtin_mul_overflow(a_vals[p], b_vals[q], &prod) ||
            __builtin_add_overflow(acc[b_cols[q]], prod, &acc[b_cols[q]])) {
          throw Error("multiply: path count overflow in row " + std::to_string(i));
        }
        if (!touched[b_cols[q]]) {
          touched[b_cols[q]] = 1;
          cols.push_back(b_cols[q]);
        }
      }
    }
    std::sort(cols.begin(), cols.end());
    for (auto c : cols) {
      out.push_back({static_cast<std::uint32_t>(i), c, acc[c]});
      acc[c] = 0;
      touched[c] = 0;
    }
  }
  return CsrMatrix::from_triplets(a.rows(), b.cols(), out);
}

}  // namespace hgnn
