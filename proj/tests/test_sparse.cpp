#include <gtest/gtest.h>

#include "hgnn/sparse.hpp"
#include "oracles.hpp"

using namespace hgnn;

namespace {

CsrMatrix random_csr(Rng& rng, std::size_t rows, std::size_t cols, std::size_t entries) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < entries; ++i)
    t.push_back({static_cast<std::uint32_t>(uniform_index(rng, rows)), static_cast<std::uint32_t>(uniform_index(rng, cols)),
                 static_cast<std::int64_t>(uniform_index(rng, 3))});
  return CsrMatrix::from_triplets(rows, cols, t);
}

}  // namespace

TEST(Sparse, TripletsSumDuplicatesAndDropZeros) {
  std::vector<Triplet> t{{0, 1, 1}, {0, 1, 1}, {1, 0, 0}, {1, 2, 3}};
  const auto m = CsrMatrix::from_triplets(2, 3, t);
  EXPECT_EQ(m.at(0, 1), 2);
  EXPECT_EQ(m.at(1, 0), 0);
  EXPECT_EQ(m.at(1, 2), 3);
  EXPECT_EQ(m.nnz(), 2u);
  EXPECT_EQ(m.total(), 5);
}

TEST(Sparse, RejectsOutOfRangeAndNegative) {
  std::vector<Triplet> bad{{2, 0, 1}};
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, bad), Error);
  std::vector<Triplet> neg{{0, 0, -1}};
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, neg), Error);
  EXPECT_THROW(CsrMatrix(2, 2).at(0, 5), Error);
}

TEST(Sparse, ColumnsSortedWithinRows) {
  Rng rng(1);
  const auto m = random_csr(rng, 20, 30, 200);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto cols = m.row_cols(r);
    for (std::size_t k = 1; k < cols.size(); ++k) EXPECT_LT(cols[k - 1], cols[k]);
    for (auto v : m.row_values(r)) EXPECT_GT(v, 0);
  }
}

TEST(Sparse, MultiplyMatchesDenseOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 1 + uniform_index(rng, 12), k = 1 + uniform_index(rng, 12), m = 1 + uniform_index(rng, 12);
    const auto a = random_csr(rng, n, k, uniform_index(rng, 40));
    const auto b = random_csr(rng, k, m, uniform_index(rng, 40));
    EXPECT_EQ(oracle::to_dense(multiply(a, b)), oracle::dense_product(oracle::to_dense(a), oracle::to_dense(b)));
  }
}

TEST(Sparse, MultiplyRejectsShapeMismatchAndOverflow) {
  EXPECT_THROW(multiply(CsrMatrix(2, 3), CsrMatrix(2, 3)), Error);
  std::vector<Triplet> big{{0, 0, std::int64_t{1} << 40}};
  const auto a = CsrMatrix::from_triplets(1, 1, big);
  EXPECT_THROW(multiply(a, a), Error);
}

TEST(Sparse, TransposeAndSums) {
  Rng rng(3);
  const auto m = random_csr(rng, 7, 9, 30);
  const auto t = m.transpose();
  EXPECT_EQ(t.transpose(), m);
  EXPECT_EQ(t.row_sums(), m.col_sums());
  EXPECT_EQ(t.col_sums(), m.row_sums());
  const auto d = oracle::to_dense(m);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(t.at(c, r), d[r][c]);
}

TEST(Sparse, BinarizedKeepsPattern) {
  Rng rng(4);
  const auto m = random_csr(rng, 5, 5, 20);
  const auto b = m.binarized();
  EXPECT_EQ(b.col_idx(), m.col_idx());
  for (auto v : b.values()) EXPECT_EQ(v, 1);
}
