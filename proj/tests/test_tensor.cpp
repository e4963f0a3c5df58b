#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "hgnn/tensor.hpp"
#include "oracles.hpp"

using namespace hgnn;

namespace {

// Entries bounded away from zero so kinks (relu, leaky_relu, prelu, elu)
// stay outside the finite-difference stencil.
Matrix away_from_zero(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) {
    const double z = standard_normal(rng);
    x = (z < 0 ? -1.0 : 1.0) * (0.1 + std::abs(z));
  }
  return m;
}

// Distinct entries spaced at least 0.05 apart (for max-type ops).
Matrix well_separated(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> v(rows * cols);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i) - 1.0;
  shuffle(v, rng);
  return Matrix(rows, cols, v);
}

// sum(out * R) for a fixed random R: a scalar whose gradient hits every
// output coordinate with a different weight.
Tensor weighted_sum(const Tensor& out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, Tensor::constant(oracle::random_matrix(rng, out.rows(), out.cols()))));
}

struct Shape {
  std::size_t n, m;
};

Shape random_shape(Rng& rng) { return {1 + uniform_index(rng, 16), 1 + uniform_index(rng, 16)}; }

Index random_index(Rng& rng, std::size_t n, std::size_t segments) {
  Index idx(n);
  for (auto& i : idx) i = static_cast<std::uint32_t>(uniform_index(rng, segments));
  return idx;
}

void expect_grad_ok(const std::function<Tensor()>& f, std::vector<Tensor> params, const char* what) {
  const double err = grad_check(f, params);
  EXPECT_LT(err, 1e-4) << what;
}

}  // namespace

TEST(Tensor, RowSoftmaxOfZerosIsUniform) {
  const auto y = row_softmax(Tensor::constant(Matrix{{0, 0}}));
  EXPECT_EQ(y.value(), (Matrix{{0.5, 0.5}}));
}

TEST(Tensor, SegmentSumHandExample) {
  const auto y = segment_sum(Tensor::constant(Matrix{{1, 2}, {3, 4}, {5, 6}}), {0, 0, 1}, 2);
  EXPECT_EQ(y.value(), (Matrix{{4, 6}, {5, 6}}));
}

TEST(Tensor, L2NormalizeThreeFourFive) {
  const auto y = l2_normalize_rows(Tensor::constant(Matrix{{3, 4}, {0, 0}}));
  EXPECT_NEAR(y.value()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(y.value()(0, 1), 0.8, 1e-15);
  EXPECT_EQ(y.value()(1, 0), 0.0);
  EXPECT_EQ(y.value()(1, 1), 0.0);
}

TEST(Tensor, SoftmaxRowsAndSegmentsSumToOne) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [n, m] = random_shape(rng);
    const auto x = Tensor::constant(oracle::random_matrix(rng, n, m, 5.0));
    const auto y = row_softmax(x);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < m; ++j) s += y.value()(i, j);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    const std::size_t segments = 1 + uniform_index(rng, n + 2);
    const auto idx = random_index(rng, n, segments);
    const auto z = segment_softmax(x, idx, segments);
    std::vector<std::vector<double>> sums(segments, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) sums[idx[i]][j] += z.value()(i, j);
    std::vector<bool> used(segments, false);
    for (auto i : idx) used[i] = true;
    for (std::size_t s = 0; s < segments; ++s)
      for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(sums[s][j], used[s] ? 1.0 : 0.0, 1e-12);
  }
}

TEST(Tensor, SegmentOpsOnEmptyInputAndBadIndex) {
  const auto empty = segment_softmax(Tensor::constant(Matrix(0, 3)), {}, 4);
  EXPECT_EQ(empty.rows(), 0u);
  const auto zeros = segment_sum(Tensor::constant(Matrix(0, 2)), {}, 3);
  EXPECT_EQ(zeros.value(), Matrix(3, 2));
  EXPECT_THROW(segment_sum(Tensor::constant(Matrix(2, 2)), {0, 5}, 3), Error);
  EXPECT_THROW(segment_sum(Tensor::constant(Matrix(2, 2)), {0}, 3), Error);
}

TEST(Tensor, ShapeMismatchesThrow) {
  const auto a = Tensor::constant(Matrix(2, 3));
  const auto b = Tensor::constant(Matrix(2, 2));
  EXPECT_THROW(matmul(a, b), Error);
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(mul(a, b), Error);
  EXPECT_THROW(add_row(a, b), Error);
  EXPECT_THROW(concat({a, Tensor::constant(Matrix(3, 3))}, 1), Error);
  EXPECT_THROW(slice_rows(a, 1, 3), Error);
  EXPECT_THROW(gather_rows(a, {2}), Error);
}

TEST(Tensor, DropoutIdentityCasesAndDeterminism) {
  Rng rng(2);
  const auto x = Tensor::constant(oracle::random_matrix(rng, 20, 10));
  EXPECT_EQ(dropout(x, 0.0, true, 1).value(), x.value());
  EXPECT_EQ(dropout(x, 0.6, false, 1).value(), x.value());
  EXPECT_EQ(dropout(x, 0.3, true, 7).value(), dropout(x, 0.3, true, 7).value());
  EXPECT_NE(dropout(x, 0.3, true, 7).value(), dropout(x, 0.3, true, 8).value());
  const auto y = dropout(x, 0.5, true, 3).value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 2.0 * x.value().data()[i]) < 1e-15);
  }
  const auto ones = Tensor::constant(Matrix(200, 200, 1.0));
  const auto dropped = dropout(ones, 0.3, true, 11);
  double mean = 0.0;
  for (double v : dropped.value().data()) mean += v;
  EXPECT_NEAR(mean / 40000.0, 1.0, 0.02);
}

TEST(Tensor, BatchNormTrainingStandardizesColumns) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 30), d = 1 + uniform_index(rng, 8);
    // Columns with large spread: the normalized variance is var / (var + eps),
    // within 1e-6 of one once var >= 10.
    const auto raw = oracle::random_matrix(rng, n, d, 20.0);
    BatchNormStats stats(d);
    const auto y = batch_norm(Tensor::constant(raw), Tensor::constant(Matrix(1, d, 1.0)),
                              Tensor::constant(Matrix(1, d, 0.0)), stats, true);
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0, var = 0, raw_mu = 0, raw_var = 0;
      for (std::size_t i = 0; i < n; ++i) {
        mu += y.value()(i, j);
        raw_mu += raw(i, j);
      }
      mu /= n;
      raw_mu /= n;
      for (std::size_t i = 0; i < n; ++i) {
        var += (y.value()(i, j) - mu) * (y.value()(i, j) - mu);
        raw_var += (raw(i, j) - raw_mu) * (raw(i, j) - raw_mu);
      }
      var /= n;
      raw_var /= n;
      EXPECT_NEAR(mu, 0.0, 1e-9);
      EXPECT_NEAR(var, raw_var / (raw_var + stats.eps), 1e-12);
      if (raw_var >= 10.0) EXPECT_NEAR(var, 1.0, 1e-6);
    }
  }
}

TEST(Tensor, BatchNormConstantColumnGivesZeros) {
  BatchNormStats stats(2);
  const auto y = batch_norm(Tensor::constant(Matrix{{3, 1}, {3, 2}, {3, 3}}), Tensor::constant(Matrix(1, 2, 1.0)),
                            Tensor::constant(Matrix(1, 2, 0.0)), stats, true);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.value()(i, 0), 0.0);
}

TEST(Tensor, BatchNormRunningStatistics) {
  BatchNormStats stats(1);
  const auto x = Tensor::constant(Matrix{{1}, {3}});
  const auto g = Tensor::constant(Matrix(1, 1, 1.0)), b = Tensor::constant(Matrix(1, 1, 0.0));
  batch_norm(x, g, b, stats, true);
  EXPECT_NEAR(stats.running_mean(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(stats.running_var(0, 0), 0.9 * 1.0 + 0.1 * 2.0, 1e-15);
  const auto y = batch_norm(x, g, b, stats, false);
  EXPECT_NEAR(y.value()(0, 0), (1 - 0.2) / std::sqrt(1.1 + 1e-5), 1e-12);
}

TEST(Tensor, BackwardOfLinearFormIsOuterProduct) {
  Rng rng(4);
  const auto w = Tensor::leaf(oracle::random_matrix(rng, 3, 4));
  const auto x = Tensor::constant(oracle::random_matrix(rng, 5, 3));
  // loss = sum(x W): dW[k][j] = sum_i x[i][k]
  sum(matmul(x, w)).backward();
  for (std::size_t k = 0; k < 3; ++k) {
    double col = 0;
    for (std::size_t i = 0; i < 5; ++i) col += x.value()(i, k);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(w.grad()(k, j), col, 1e-12);
  }
}

TEST(Tensor, BackwardAccumulatesAndIndependentParamsGetZero) {
  auto w = Tensor::leaf(Matrix{{2.0}});
  const auto v = Tensor::leaf(Matrix{{5.0}});
  sum(mul(w, w)).backward();
  sum(mul(w, w)).backward();
  EXPECT_DOUBLE_EQ(w.grad()(0, 0), 8.0);
  EXPECT_EQ(v.grad()(0, 0), 0.0);
  w.zero_grad();
  EXPECT_EQ(w.grad()(0, 0), 0.0);
}

TEST(Tensor, BackwardErrors) {
  const auto w = Tensor::leaf(Matrix{{1.0, 2.0}});
  EXPECT_THROW(mul(w, w).backward(), Error);
  const auto loss = sum(mul(w, w));
  loss.backward();
  EXPECT_THROW(loss.backward(), Error);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  const auto w = Tensor::leaf(Matrix{{1.0}});
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = sum(mul(w, w));
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, GradCheckOfLinearFunctionIsTiny) {
  Rng rng(5);
  const auto x = Tensor::leaf(oracle::random_matrix(rng, 4, 4));
  EXPECT_LT(grad_check([&] { return weighted_sum(x, 1); }, std::vector<Tensor>{x}), 1e-9);
  const auto w = Tensor::leaf(oracle::random_matrix(rng, 4, 3));
  EXPECT_LT(grad_check([&] { return weighted_sum(matmul(x, w), 2); }, std::vector<Tensor>{x, w}), 1e-6);
}

TEST(Tensor, EveryPrimitivePassesGradCheck) {
  Rng rng(6);
  for (int trial = 0; trial < 8; ++trial) {
    const auto [n, m] = random_shape(rng);
    const auto k = 1 + uniform_index(rng, 16);
    auto a = Tensor::leaf(away_from_zero(rng, n, m));
    auto b = Tensor::leaf(away_from_zero(rng, n, m));
    auto c = Tensor::leaf(away_from_zero(rng, m, k));
    auto row = Tensor::leaf(away_from_zero(rng, 1, m));
    auto s = Tensor::leaf(Matrix{{0.7}});
    auto col = Tensor::leaf(away_from_zero(rng, n, 1));
    auto pos = Tensor::leaf(Matrix(n, m));
    for (auto& v : pos.mutable_value().data()) v = 0.5 + uniform01(rng);
    auto sep = Tensor::leaf(well_separated(rng, n, m));
    auto sep2 = Tensor::leaf(well_separated(rng, n, m));
    for (auto& v : sep2.mutable_value().data()) v += 0.025;

    const std::size_t segments = 1 + uniform_index(rng, n);
    const auto idx = random_index(rng, n, segments);
    const auto gidx = random_index(rng, n + 3, n);

    auto op = std::make_shared<SparseOperand>();
    op->rows = 1 + uniform_index(rng, 10);
    op->cols = n;
    for (std::size_t r = 0; r < op->rows; ++r) {
      for (std::size_t j = 0; j < n; ++j)
        if (uniform01(rng) < 0.4) {
          op->col_idx.push_back(static_cast<std::uint32_t>(j));
          op->values.push_back(standard_normal(rng));
        }
      op->row_ptr.push_back(op->col_idx.size());
    }
    std::shared_ptr<const SparseOperand> cop = op;

    std::vector<int> labels(n);
    for (auto& y : labels) y = static_cast<int>(uniform_index(rng, m));
    Index rows_ce;
    for (std::size_t i = 0; i < n; i += 2) rows_ce.push_back(static_cast<std::uint32_t>(i));
    std::vector<double> targets(n);
    for (auto& t : targets) t = static_cast<double>(uniform_index(rng, 2));

    BatchNormStats stats(m);
    auto gamma = Tensor::leaf(away_from_zero(rng, 1, m));
    auto beta = Tensor::leaf(away_from_zero(rng, 1, m));

    const std::uint64_t seed = 100 + trial;
    expect_grad_ok([&] { return weighted_sum(matmul(a, c), seed); }, {a, c}, "matmul");
    expect_grad_ok([&] { return weighted_sum(add(a, b), seed); }, {a, b}, "add");
    expect_grad_ok([&] { return weighted_sum(sub(a, b), seed); }, {a, b}, "sub");
    expect_grad_ok([&] { return weighted_sum(mul(a, b), seed); }, {a, b}, "mul");
    expect_grad_ok([&] { return weighted_sum(add_row(a, row), seed); }, {a, row}, "add_row");
    expect_grad_ok([&] { return weighted_sum(scale(a, -1.5), seed); }, {a}, "scale");
    expect_grad_ok([&] { return weighted_sum(mul_scalar(a, s), seed); }, {a, s}, "mul_scalar");
    expect_grad_ok([&] { return weighted_sum(mul_rows(a, col), seed); }, {a, col}, "mul_rows");
    expect_grad_ok([&] { return weighted_sum(concat({a, b}, 0), seed); }, {a, b}, "concat rows");
    expect_grad_ok([&] { return weighted_sum(concat({a, b}, 1), seed); }, {a, b}, "concat cols");
    expect_grad_ok([&] { return weighted_sum(slice_rows(a, 0, (n + 1) / 2), seed); }, {a}, "slice_rows");
    expect_grad_ok([&] { return weighted_sum(slice_cols(a, m / 2, m), seed); }, {a}, "slice_cols");
    expect_grad_ok([&] { return weighted_sum(transpose(a), seed); }, {a}, "transpose");
    expect_grad_ok([&] { return weighted_sum(expand_rows(row, 5), seed); }, {row}, "expand_rows");
    expect_grad_ok([&] { return weighted_sum(exp(a), seed); }, {a}, "exp");
    expect_grad_ok([&] { return weighted_sum(log(pos), seed); }, {pos}, "log");
    expect_grad_ok([&] { return weighted_sum(relu(a), seed); }, {a}, "relu");
    expect_grad_ok([&] { return weighted_sum(leaky_relu(a, 0.2), seed); }, {a}, "leaky_relu");
    expect_grad_ok([&] { return weighted_sum(elu(a), seed); }, {a}, "elu");
    expect_grad_ok([&] { return weighted_sum(tanh(a), seed); }, {a}, "tanh");
    expect_grad_ok([&] { return weighted_sum(sigmoid(a), seed); }, {a}, "sigmoid");
    expect_grad_ok([&] { return weighted_sum(prelu(a, s), seed); }, {a, s}, "prelu");
    expect_grad_ok([&] { return weighted_sum(row_softmax(a), seed); }, {a}, "row_softmax");
    expect_grad_ok([&] { return weighted_sum(l2_normalize_rows(a), seed); }, {a}, "l2_normalize_rows");
    expect_grad_ok([&] { return mul(sum(a), Tensor::constant(Matrix{{0.3}})); }, {a}, "sum");
    expect_grad_ok([&] { return mul(mean(a), Tensor::constant(Matrix{{-2.0}})); }, {a}, "mean");
    expect_grad_ok([&] { return weighted_sum(mean_rows(a), seed); }, {a}, "mean_rows");
    expect_grad_ok([&] { return weighted_sum(row_dot(a, b), seed); }, {a, b}, "row_dot");
    expect_grad_ok([&] { return weighted_sum(max_n({sep, sep2}), seed); }, {sep, sep2}, "max_n");
    expect_grad_ok([&] { return weighted_sum(gather_rows(a, gidx), seed); }, {a}, "gather_rows");
    expect_grad_ok([&] { return weighted_sum(segment_sum(a, idx, segments), seed); }, {a}, "segment_sum");
    expect_grad_ok([&] { return weighted_sum(segment_mean(a, idx, segments), seed); }, {a}, "segment_mean");
    expect_grad_ok([&] { return weighted_sum(segment_max(sep, idx, segments), seed); }, {sep}, "segment_max");
    expect_grad_ok([&] { return weighted_sum(segment_softmax(a, idx, segments), seed); }, {a}, "segment_softmax");
    expect_grad_ok([&] { return weighted_sum(spmm(cop, a), seed); }, {a}, "spmm");
    expect_grad_ok([&] { return weighted_sum(dropout(a, 0.4, true, 9), seed); }, {a}, "dropout");
    if (n >= 2)
      expect_grad_ok([&] { return weighted_sum(batch_norm(a, gamma, beta, stats, true), seed); }, {a, gamma, beta},
                     "batch_norm train");
    expect_grad_ok([&] { return weighted_sum(batch_norm(a, gamma, beta, stats, false), seed); }, {a, gamma, beta},
                   "batch_norm eval");
    expect_grad_ok([&] { return cross_entropy(a, labels, rows_ce); }, {a}, "cross_entropy");
    expect_grad_ok([&] { return bce_with_logits(col, targets); }, {col}, "bce_with_logits");
  }
}

TEST(Tensor, ChainedSegmentSoftmaxThenSum) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t e = 2 + uniform_index(rng, 20), d = 1 + uniform_index(rng, 6), nodes = 1 + uniform_index(rng, 6);
    const auto idx = random_index(rng, e, nodes);
    auto logits = Tensor::leaf(oracle::random_matrix(rng, e, 1));
    auto msgs = Tensor::leaf(oracle::random_matrix(rng, e, d));
    const double err = grad_check(
        [&] { return weighted_sum(segment_sum(mul_rows(msgs, segment_softmax(logits, idx, nodes)), idx, nodes), 3); },
        std::vector<Tensor>{logits, msgs});
    EXPECT_LT(err, 1e-4);
  }
}

TEST(Tensor, CrossEntropyAndBceValues) {
  const auto logits = Tensor::constant(Matrix{{0.0, 0.0}, {2.0, 0.0}});
  EXPECT_NEAR(cross_entropy(logits, {1, 0}, {0}).item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(logits, {1, 0}, {1}).item(), std::log(1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(bce_with_logits(Tensor::constant(Matrix{{0.0}, {0.0}}), {1.0, 0.0}).item(), std::log(2.0), 1e-15);
  // Large logits stay finite.
  EXPECT_NEAR(bce_with_logits(Tensor::constant(Matrix{{800.0}}), {0.0}).item(), 800.0, 1e-9);
}

TEST(Tensor, ParameterStoreNamesAreUnique) {
  ParameterStore store;
  store.add("w", Matrix(2, 3));
  store.add("b", Matrix(1, 3));
  EXPECT_EQ(store.num_scalars(), 9u);
  EXPECT_THROW(store.add("w", Matrix(1, 1)), Error);
}
