#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hgnn/matrix.hpp"

namespace hgnn {

namespace detail {
struct Node;
}

/// Handle to a node of the reverse-mode differentiation graph.
///
/// Every tensor is a rank-2 matrix of doubles (scalars are 1x1). A tensor
/// produced by a primitive whose inputs require gradients records its
/// parents and a backward rule; together these nodes form the tape that
/// backward() walks in reverse topological order. Handles are cheap to copy
/// and share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
  /// Trainable leaf; gradients accumulate into grad().
  static Tensor leaf(Matrix value) { return Tensor(std::move(value), true); }

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::array<std::size_t, 2> shape() const { return {rows(), cols()}; }

  const Matrix& value() const;
  /// In-place access for optimizers and finite differences. Only meaningful
  /// on leaves.
  Matrix& mutable_value();
  double item() const;

  bool requires_grad() const;
  /// Gradient accumulated by backward(); zeros of the tensor's shape if none.
  const Matrix& grad() const;
  void zero_grad();

  /// Reverse pass from this 1x1 tensor. Gradients are added (+=) into every
  /// reachable leaf. The intermediate part of the tape is released, so a
  /// second call on the same result throws.
  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared_node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Matrix, std::vector<Tensor>, std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer();
  bool is_leaf() const { return !backward; }
};

}  // namespace detail

/// Creates an op result. Records `parents` and `backward` only when some
/// parent requires gradients and recording is enabled on this thread.
Tensor make_result(Matrix value, std::vector<Tensor> parents, std::function<void(detail::Node&)> backward);

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Sparse operator with real weights, used as a constant left factor in
/// message passing (normalized adjacency times features).
struct SparseOperand {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;
};

/// Running statistics owned by a batch-norm layer.
struct BatchNormStats {
  Matrix running_mean;  // 1 x d
  Matrix running_var;   // 1 x d
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t dim = 0);
};

using Index = std::vector<std::uint32_t>;

// Primitives. All shapes are checked; violations throw Error.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a (n x m) + row (1 x m) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double factor);
/// a * s for a learned 1x1 scalar s.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
/// Row i of a scaled by c(i, 0); c is n x 1.
Tensor mul_rows(const Tensor& a, const Tensor& c);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor transpose(const Tensor& a);
/// Repeats a 1 x m row n times.
Tensor expand_rows(const Tensor& row, std::size_t n);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// max(x, 0) + slope * min(x, 0) with a learned 1x1 slope.
Tensor prelu(const Tensor& a, const Tensor& slope);

Tensor row_softmax(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column means, 1 x m.
Tensor mean_rows(const Tensor& a);
/// Row-wise dot product of equally shaped a and b, n x 1.
Tensor row_dot(const Tensor& a, const Tensor& b);
/// Elementwise maximum across equally shaped tensors; ties go to the first.
Tensor max_n(const std::vector<Tensor>& parts);

/// out[i] = a[index[i]].
Tensor gather_rows(const Tensor& a, const Index& index);
/// out[s] = sum of rows i with index[i] == s; empty segments give zero rows.
Tensor segment_sum(const Tensor& a, const Index& index, std::size_t num_segments);
Tensor segment_mean(const Tensor& a, const Index& index, std::size_t num_segments);
Tensor segment_max(const Tensor& a, const Index& index, std::size_t num_segments);
/// Softmax of each column within every segment. Rows in the same segment sum
/// to 1; empty segments simply produce no rows.
Tensor segment_softmax(const Tensor& a, const Index& index, std::size_t num_segments);

/// op * a for a constant sparse op.
Tensor spmm(const std::shared_ptr<const SparseOperand>& op, const Tensor& a);

/// Inverted dropout: kept entries are scaled by 1/(1-p). Identity when
/// !training or p == 0.
Tensor dropout(const Tensor& a, double p, bool training, std::uint64_t seed);

/// Per-feature normalization over rows. Training mode normalizes with the
/// batch statistics and updates `stats`; eval mode uses the running ones.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training);

/// Mean cross-entropy of row-wise softmax(logits) at `rows` against `labels`.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels, const Index& rows);
/// Mean binary cross-entropy of sigmoid(logits) (n x 1) against 0/1 targets.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Owns the trainable leaves of a model under unique names.
class ParameterStore {
 public:
  Tensor add(std::string name, Matrix init);
  const std::vector<NamedParameter>& all() const { return params_; }
  std::vector<Tensor> tensors() const;
  std::size_t num_scalars() const;
  void zero_grad();

 private:
  std::vector<NamedParameter> params_;
};

struct GradCheckOptions {
  double eps = 1e-3;
  /// Coordinates per parameter; larger parameters are sampled.
  std::size_t max_coords = 64;
  std::uint64_t seed = 0;
  /// Denominator floor in |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
};

/// Compares backward() against central differences of `f` (which must build
/// a fresh scalar each call) and returns the largest relative error.
double grad_check(const std::function<Tensor()>& f, std::span<const Tensor> params, GradCheckOptions options = {});

}  // namespace hgnn
