#include "hgnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "hgnn/common.hpp"

namespace hgnn {

namespace detail {

Matrix& Node::grad_buffer() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix(value.rows(), value.cols());
  return grad;
}

}  // namespace detail

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require(bool ok, const std::string& op, const std::string& what) {
  if (!ok) throw Error(op + ": " + what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), op, "shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
}

void accumulate(Matrix& dst, const Matrix& src) {
  auto& d = dst.data();
  const auto& s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D d) {
  const auto& x = a.value().data();
  Matrix out(a.rows(), a.cols());
  auto& y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(std::move(out), {a}, [d](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer().data();
    const auto& up = self.grad.data();
    const auto& xv = p.value.data();
    const auto& yv = self.value.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * d(xv[i], yv[i]);
  });
}

void check_index(const Index& index, std::size_t bound, const char* op) {
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= bound)
      throw Error(std::string(op) + ": index " + std::to_string(index[i]) + " at position " + std::to_string(i) +
                  " out of range " + std::to_string(bound));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor handle and tape

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

std::size_t Tensor::rows() const { return node_ ? node_->value.rows() : 0; }
std::size_t Tensor::cols() const { return node_ ? node_->value.cols() : 0; }

const Matrix& Tensor::value() const {
  if (!node_) throw Error("tensor is undefined");
  return node_->value;
}

Matrix& Tensor::mutable_value() {
  if (!node_) throw Error("tensor is undefined");
  return node_->value;
}

double Tensor::item() const {
  require(value().size() == 1, "item", "tensor is " + shape_str(value()) + ", not 1x1");
  return node_->value.data()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const Matrix& Tensor::grad() const {
  if (!node_) throw Error("tensor is undefined");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) node_->grad_buffer().fill(0.0);
}

void Tensor::backward() const {
  if (!node_) throw Error("backward: tensor is undefined");
  require(node_->value.rows() == 1 && node_->value.cols() == 1, "backward",
          "loss must be 1x1, got " + shape_str(node_->value));
  if (node_->consumed) throw Error("backward: tape already consumed; run the forward pass again");
  if (!node_->requires_grad) return;

  // Post-order DFS: every node lands after all of its parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (n->consumed) throw Error("backward: tape already consumed; run the forward pass again");
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer().data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->grad_buffer();
      n->backward(*n);
    }
  }
  for (Node* n : order) {
    if (!n->backward) continue;
    n->consumed = true;
    n->backward = nullptr;
    n->parents.clear();
    n->grad = Matrix();
  }
  // A non-leaf root keeps its value but is marked consumed above; a leaf root
  // simply accumulates.
}

Tensor make_result(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.shared_node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

BatchNormStats::BatchNormStats(std::size_t dim) : running_mean(1, dim, 0.0), running_var(1, dim, 1.0) {}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul",
          "inner dimensions differ: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  return make_result(matmul(a.value(), b.value()), {a, b}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) accumulate(pa.grad_buffer(), matmul_nt(self.grad, pb.value));
    if (pb.requires_grad) accumulate(pb.grad_buffer(), matmul_tn(pa.value, self.grad));
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value();
  accumulate(out, b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      auto& p = parent(self, i);
      if (p.requires_grad) accumulate(p.grad_buffer(), self.grad);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.value().data()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) accumulate(pa.grad_buffer(), self.grad);
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad.data()[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    const auto& up = self.grad.data();
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * pb.value.data()[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * pa.value.data()[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row",
          "row must be 1x" + std::to_string(a.cols()) + ", got " + shape_str(row.value()));
  Matrix out = a.value();
  const std::size_t m = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) += row.value()(0, j);
  return make_result(std::move(out), {a, row}, [m](Node& self) {
    auto& pa = parent(self, 0);
    auto& pr = parent(self, 1);
    if (pa.requires_grad) accumulate(pa.grad_buffer(), self.grad);
    if (pr.requires_grad) {
      auto& g = pr.grad_buffer();
      for (std::size_t i = 0; i < self.grad.rows(); ++i)
        for (std::size_t j = 0; j < m; ++j) g(0, j) += self.grad(i, j);
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  Matrix out = a.value();
  for (auto& v : out.data()) v *= factor;
  return make_result(std::move(out), {a}, [factor](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer().data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad.data()[i];
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  require(s.rows() == 1 && s.cols() == 1, "mul_scalar", "scalar must be 1x1, got " + shape_str(s.value()));
  const double k = s.value()(0, 0);
  Matrix out = a.value();
  for (auto& v : out.data()) v *= k;
  return make_result(std::move(out), {a, s}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& ps = parent(self, 1);
    const auto& up = self.grad.data();
    if (pa.requires_grad) {
      const double k = ps.value(0, 0);
      auto& g = pa.grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * up[i];
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) acc += up[i] * pa.value.data()[i];
      ps.grad_buffer()(0, 0) += acc;
    }
  });
}

Tensor mul_rows(const Tensor& a, const Tensor& c) {
  require(c.rows() == a.rows() && c.cols() == 1, "mul_rows",
          "scale must be " + std::to_string(a.rows()) + "x1, got " + shape_str(c.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (auto& v : out.row(i)) v *= c.value()(i, 0);
  return make_result(std::move(out), {a, c}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& pc = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double k = pc.value(i, 0);
        for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += k * self.grad(i, j);
      }
    }
    if (pc.requires_grad) {
      auto& g = pc.grad_buffer();
      for (std::size_t i = 0; i < pa.value.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < pa.value.cols(); ++j) acc += self.grad(i, j) * pa.value(i, j);
        g(i, 0) += acc;
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat", "no inputs");
  require(axis == 0 || axis == 1, "concat", "axis must be 0 or 1");
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      require(p.cols() == parts[0].cols(), "concat", "column counts differ");
      rows += p.rows();
    } else {
      require(p.rows() == parts[0].rows(), "concat", "row counts differ");
      cols += p.cols();
    }
  }
  if (axis == 0) cols = parts[0].cols();
  else rows = parts[0].rows();
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (axis == 0) out(offset + i, j) = v(i, j);
        else out(i, offset + j) = v(i, j);
      }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  return make_result(std::move(out), parts, [axis](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = parent(self, k);
      const std::size_t r = p.value.rows();
      const std::size_t c = p.value.cols();
      if (p.requires_grad) {
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g(i, j) += axis == 0 ? self.grad(off + i, j) : self.grad(i, off + j);
      }
      off += axis == 0 ? r : c;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= a.rows(), "slice_rows", "range out of bounds");
  const std::size_t m = a.cols();
  Matrix out(end - begin, m);
  std::copy(a.value().data().begin() + static_cast<std::ptrdiff_t>(begin * m),
            a.value().data().begin() + static_cast<std::ptrdiff_t>(end * m), out.data().begin());
  return make_result(std::move(out), {a}, [begin, m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * m + i] += self.grad.data()[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= a.cols(), "slice_cols", "range out of bounds");
  Matrix out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a.value()(i, j);
  return make_result(std::move(out), {a}, [begin](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.rows(); ++i)
      for (std::size_t j = 0; j < self.grad.cols(); ++j) g(i, begin + j) += self.grad(i, j);
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transposed(), {a}, [](Node& self) {
    auto& p = parent(self, 0);
    if (p.requires_grad) accumulate(p.grad_buffer(), self.grad.transposed());
  });
}

Tensor expand_rows(const Tensor& row, std::size_t n) {
  require(row.rows() == 1, "expand_rows", "input must be a single row");
  Matrix out(n, row.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < row.cols(); ++j) out(i, j) = row.value()(0, j);
  return make_result(std::move(out), {row}, [](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.rows(); ++i)
      for (std::size_t j = 0; j < self.grad.cols(); ++j) g(0, j) += self.grad(i, j);
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.value().data()) require(v > 0.0, "log", "non-positive input");
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor prelu(const Tensor& a, const Tensor& slope) {
  require(slope.rows() == 1 && slope.cols() == 1, "prelu", "slope must be 1x1");
  const double k = slope.value()(0, 0);
  Matrix out = a.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : k * v;
  return make_result(std::move(out), {a, slope}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& ps = parent(self, 1);
    const double k = ps.value(0, 0);
    const auto& x = pa.value.data();
    const auto& up = self.grad.data();
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * (x[i] > 0.0 ? 1.0 : k);
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] <= 0.0) acc += up[i] * x[i];
      ps.grad_buffer()(0, 0) += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations and reductions

Tensor row_softmax(const Tensor& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto x = a.value().row(i);
    if (x.empty()) continue;
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) z += (out(i, j) = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < x.size(); ++j) out(i, j) /= z;
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < self.value.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < self.value.cols(); ++j) dot += self.grad(i, j) * self.value(i, j);
      for (std::size_t j = 0; j < self.value.cols(); ++j) g(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
    }
  });
}

Tensor l2_normalize_rows(const Tensor& a) {
  Matrix out(a.rows(), a.cols());
  std::vector<double> norms(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.value().row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0)
      for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a.value()(i, j) / norms[i];
  }
  return make_result(std::move(out), {a}, [norms = std::move(norms)](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < self.value.rows(); ++i) {
      if (norms[i] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < self.value.cols(); ++j) dot += self.grad(i, j) * self.value(i, j);
      for (std::size_t j = 0; j < self.value.cols(); ++j)
        g(i, j) += (self.grad(i, j) - self.value(i, j) * dot) / norms[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_result(Matrix(1, 1, s), {a}, [](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    const double up = self.grad(0, 0);
    for (auto& g : p.grad_buffer().data()) g += up;
  });
}

Tensor mean(const Tensor& a) {
  require(a.value().size() > 0, "mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor mean_rows(const Tensor& a) {
  require(a.rows() > 0, "mean_rows", "no rows");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += a.value()(i, j);
  for (auto& v : out.data()) v *= inv;
  return make_result(std::move(out), {a}, [inv](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += inv * self.grad(0, j);
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a.value()(i, j) * b.value()(i, j);
    out(i, 0) = s;
  }
  return make_result(std::move(out), {a, b}, [](Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.value.rows(); ++i) {
      const double up = self.grad(i, 0);
      for (std::size_t j = 0; j < pa.value.cols(); ++j) {
        if (pa.requires_grad) pa.grad_buffer()(i, j) += up * pb.value(i, j);
        if (pb.requires_grad) pb.grad_buffer()(i, j) += up * pa.value(i, j);
      }
    }
  });
}

Tensor max_n(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "max_n", "no inputs");
  for (const auto& p : parts) require_same_shape(parts[0], p, "max_n");
  Matrix out = parts[0].value();
  std::vector<std::uint32_t> arg(out.size(), 0);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto& v = parts[k].value().data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > out.data()[i]) {
        out.data()[i] = v[i];
        arg[i] = static_cast<std::uint32_t>(k);
      }
    }
  }
  return make_result(std::move(out), parts, [arg = std::move(arg)](Node& self) {
    for (std::size_t i = 0; i < arg.size(); ++i) {
      auto& p = parent(self, arg[i]);
      if (p.requires_grad) p.grad_buffer().data()[i] += self.grad.data()[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Gather / segment ops (message passing)

Tensor gather_rows(const Tensor& a, const Index& index) {
  check_index(index, a.rows(), "gather_rows");
  const std::size_t m = a.cols();
  Matrix out(index.size(), m);
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(a.value().data().begin() + static_cast<std::ptrdiff_t>(index[i] * m), m,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * m));
  return make_result(std::move(out), {a}, [index, m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer().data();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) g[index[i] * m + j] += self.grad.data()[i * m + j];
  });
}

Tensor segment_sum(const Tensor& a, const Index& index, std::size_t num_segments) {
  require(index.size() == a.rows(), "segment_sum", "index length differs from row count");
  check_index(index, num_segments, "segment_sum");
  const std::size_t m = a.cols();
  Matrix out(num_segments, m);
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(index[i], j) += a.value()(i, j);
  return make_result(std::move(out), {a}, [index, m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) g(i, j) += self.grad(index[i], j);
  });
}

Tensor segment_mean(const Tensor& a, const Index& index, std::size_t num_segments) {
  require(index.size() == a.rows(), "segment_mean", "index length differs from row count");
  check_index(index, num_segments, "segment_mean");
  std::vector<double> inv(num_segments, 0.0);
  for (auto s : index) inv[s] += 1.0;
  for (auto& v : inv) v = v > 0.0 ? 1.0 / v : 0.0;
  const std::size_t m = a.cols();
  Matrix out(num_segments, m);
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(index[i], j) += a.value()(i, j) * inv[index[i]];
  return make_result(std::move(out), {a}, [index, inv = std::move(inv), m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) g(i, j) += self.grad(index[i], j) * inv[index[i]];
  });
}

Tensor segment_max(const Tensor& a, const Index& index, std::size_t num_segments) {
  require(index.size() == a.rows(), "segment_max", "index length differs from row count");
  check_index(index, num_segments, "segment_max");
  const std::size_t m = a.cols();
  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
  Matrix out(num_segments, m);
  std::vector<std::uint32_t> arg(num_segments * m, kNone);
  for (std::size_t i = 0; i < index.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      auto& slot = arg[index[i] * m + j];
      if (slot == kNone || a.value()(i, j) > out(index[i], j)) {
        slot = static_cast<std::uint32_t>(i);
        out(index[i], j) = a.value()(i, j);
      }
    }
  }
  return make_result(std::move(out), {a}, [arg = std::move(arg), m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t k = 0; k < arg.size(); ++k)
      if (arg[k] != kNone) g(arg[k], k % m) += self.grad.data()[k];
  });
}

Tensor segment_softmax(const Tensor& a, const Index& index, std::size_t num_segments) {
  require(index.size() == a.rows(), "segment_softmax", "index length differs from row count");
  check_index(index, num_segments, "segment_softmax");
  const std::size_t m = a.cols();
  Matrix mx(num_segments, m, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) mx(index[i], j) = std::max(mx(index[i], j), a.value()(i, j));
  Matrix out(a.rows(), m);
  Matrix z(num_segments, m);
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) z(index[i], j) += (out(i, j) = std::exp(a.value()(i, j) - mx(index[i], j)));
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) /= z(index[i], j);
  return make_result(std::move(out), {a}, [index, num_segments, m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    Matrix dot(num_segments, m);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) dot(index[i], j) += self.grad(i, j) * self.value(i, j);
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) g(i, j) += self.value(i, j) * (self.grad(i, j) - dot(index[i], j));
  });
}

Tensor spmm(const std::shared_ptr<const SparseOperand>& op, const Tensor& a) {
  require(op != nullptr, "spmm", "null operator");
  require(op->cols == a.rows(), "spmm",
          "operator is " + std::to_string(op->rows) + "x" + std::to_string(op->cols) + ", input " +
              shape_str(a.value()));
  const std::size_t m = a.cols();
  Matrix out(op->rows, m);
  for (std::size_t r = 0; r < op->rows; ++r) {
    double* o = out.data().data() + r * m;
    for (std::size_t k = op->row_ptr[r]; k < op->row_ptr[r + 1]; ++k) {
      const double w = op->values[k];
      const double* x = a.value().data().data() + op->col_idx[k] * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += w * x[j];
    }
  }
  return make_result(std::move(out), {a}, [op, m](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer().data();
    for (std::size_t r = 0; r < op->rows; ++r) {
      const double* up = self.grad.data().data() + r * m;
      for (std::size_t k = op->row_ptr[r]; k < op->row_ptr[r + 1]; ++k) {
        const double w = op->values[k];
        double* gx = g.data() + op->col_idx[k] * m;
        for (std::size_t j = 0; j < m; ++j) gx[j] += w * up[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Regularizers

Tensor dropout(const Tensor& a, double p, bool training, std::uint64_t seed) {
  require(p >= 0.0 && p <= 1.0, "dropout", "p must lie in [0,1]");
  if (!training || p == 0.0) return a;
  Rng rng(seed);
  const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  std::vector<double> mask(a.value().size());
  for (auto& v : mask) v = uniform01(rng) >= p ? keep_scale : 0.0;
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask[i];
  return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    auto& pa = parent(self, 0);
    if (!pa.requires_grad) return;
    auto& g = pa.grad_buffer().data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += mask[i] * self.grad.data()[i];
  });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d, "batch_norm",
          "affine parameters must be 1x" + std::to_string(d));
  require(stats.running_mean.cols() == d, "batch_norm", "running statistics width mismatch");
  require(!training || n > 0, "batch_norm", "empty batch");

  std::vector<double> mu(d, 0.0);
  std::vector<double> inv_std(d, 0.0);
  if (training) {
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mu[j] += x.value()(i, j);
    for (auto& v : mu) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = x.value()(i, j) - mu[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double biased = var[j] / static_cast<double>(n);
      const double unbiased = n > 1 ? var[j] / static_cast<double>(n - 1) : biased;
      inv_std[j] = 1.0 / std::sqrt(biased + stats.eps);
      stats.running_mean(0, j) = (1.0 - stats.momentum) * stats.running_mean(0, j) + stats.momentum * mu[j];
      stats.running_var(0, j) = (1.0 - stats.momentum) * stats.running_var(0, j) + stats.momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      mu[j] = stats.running_mean(0, j);
      inv_std[j] = 1.0 / std::sqrt(stats.running_var(0, j) + stats.eps);
    }
  }

  Matrix xhat(n, d);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (x.value()(i, j) - mu[j]) * inv_std[j];
      out(i, j) = gamma.value()(0, j) * xhat(i, j) + beta.value()(0, j);
    }
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), training, n, d](Node& self) {
                       auto& px = parent(self, 0);
                       auto& pg = parent(self, 1);
                       auto& pb = parent(self, 2);
                       const auto& up = self.grad;
                       if (pg.requires_grad || pb.requires_grad) {
                         for (std::size_t j = 0; j < d; ++j) {
                           double dg = 0.0;
                           double db = 0.0;
                           for (std::size_t i = 0; i < n; ++i) {
                             dg += up(i, j) * xhat(i, j);
                             db += up(i, j);
                           }
                           if (pg.requires_grad) pg.grad_buffer()(0, j) += dg;
                           if (pb.requires_grad) pb.grad_buffer()(0, j) += db;
                         }
                       }
                       if (!px.requires_grad) return;
                       auto& g = px.grad_buffer();
                       for (std::size_t j = 0; j < d; ++j) {
                         const double gj = pg.value(0, j);
                         if (!training) {
                           for (std::size_t i = 0; i < n; ++i) g(i, j) += up(i, j) * gj * inv_std[j];
                           continue;
                         }
                         double s1 = 0.0;
                         double s2 = 0.0;
                         for (std::size_t i = 0; i < n; ++i) {
                           const double dxh = up(i, j) * gj;
                           s1 += dxh;
                           s2 += dxh * xhat(i, j);
                         }
                         const double nn = static_cast<double>(n);
                         for (std::size_t i = 0; i < n; ++i) {
                           const double dxh = up(i, j) * gj;
                           g(i, j) += inv_std[j] / nn * (nn * dxh - s1 - xhat(i, j) * s2);
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Losses

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels, const Index& rows) {
  require(!rows.empty(), "cross_entropy", "no rows selected");
  require(labels.size() == logits.rows(), "cross_entropy", "label count differs from logits rows");
  check_index(rows, logits.rows(), "cross_entropy");
  const std::size_t c = logits.cols();
  Matrix probs(rows.size(), c);
  double loss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto x = logits.value().row(rows[k]);
    const int y = labels[rows[k]];
    require(y >= 0 && static_cast<std::size_t>(y) < c, "cross_entropy",
            "label " + std::to_string(y) + " outside " + std::to_string(c) + " classes");
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (probs(k, j) = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) probs(k, j) /= z;
    loss -= (x[static_cast<std::size_t>(y)] - mx) - std::log(z);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  return make_result(Matrix(1, 1, loss * inv), {logits},
                     [probs = std::move(probs), rows, labels, inv, c](Node& self) {
                       auto& p = parent(self, 0);
                       if (!p.requires_grad) return;
                       auto& g = p.grad_buffer();
                       const double up = self.grad(0, 0) * inv;
                       for (std::size_t k = 0; k < rows.size(); ++k) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const double target = static_cast<int>(j) == labels[rows[k]] ? 1.0 : 0.0;
                           g(rows[k], j) += up * (probs(k, j) - target);
                         }
                       }
                     });
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
  require(logits.cols() == 1 && logits.rows() == targets.size(), "bce_with_logits",
          "logits must be n x 1 with one target per row");
  require(!targets.empty(), "bce_with_logits", "no targets");
  const std::size_t n = targets.size();
  double loss = 0.0;
  std::vector<double> sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.value()(i, 0);
    loss += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
    sig[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  const double inv = 1.0 / static_cast<double>(n);
  return make_result(Matrix(1, 1, loss * inv), {logits}, [sig = std::move(sig), targets, inv](Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    const double up = self.grad(0, 0) * inv;
    for (std::size_t i = 0; i < sig.size(); ++i) g(i, 0) += up * (sig[i] - targets[i]);
  });
}

// ---------------------------------------------------------------------------
// Parameters

Tensor ParameterStore::add(std::string name, Matrix init) {
  for (const auto& p : params_)
    if (p.name == name) throw Error("duplicate parameter name '" + name + "'");
  Tensor t = Tensor::leaf(std::move(init));
  params_.push_back({std::move(name), t});
  return t;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace hgnn
