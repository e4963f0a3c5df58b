#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hgnn {

struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  std::int64_t value;
};

/// Compressed sparse row matrix of non-negative integer counts.
///
/// Used for relation adjacency (rows = destination nodes, columns = source
/// nodes) and for meta-path products, where an entry counts path instances.
/// Column indices within a row are strictly increasing and no stored value
/// is zero.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t rows, std::size_t cols);

  /// Sums duplicate coordinates and drops explicit zeros.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::span<const Triplet> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return col_idx_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::uint32_t>& col_idx() const { return col_idx_; }
  const std::vector<std::int64_t>& values() const { return values_; }

  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const std::int64_t> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  std::int64_t at(std::size_t row, std::size_t col) const;

  CsrMatrix transpose() const;
  /// Same pattern with every stored value set to 1.
  CsrMatrix binarized() const;
  std::vector<std::int64_t> row_sums() const;
  std::vector<std::int64_t> col_sums() const;
  std::int64_t total() const;

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<std::int64_t> values_;
};

/// Row-by-row product a * b. Throws on dimension mismatch or int64 overflow.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);

}  // namespace hgnn
