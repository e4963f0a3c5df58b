#include "hgnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "hgnn/common.hpp"
#include "hgnn/metrics.hpp"
#include "hgnn/model.hpp"

namespace hgnn {

namespace {

constexpr std::uint64_t kTrainNegStream = 0x7e9a;
constexpr std::uint64_t kEvalNegStream = 0xe7a1;
constexpr std::uint64_t kRankNegStream = 0x3a2c;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t validation_size(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

struct Evaluation {
  double score = kNaN;
  double secondary = kNaN;
};

}  // namespace

std::vector<Split> make_splits(const Task& task, const HeteroGraph& g, std::size_t n_splits, std::uint64_t seed) {
  std::vector<Split> out;
  if (task.kind == TaskKind::NodeClassification) {
    const auto t = g.type_index(task.target);
    if (!g.has_labels(t)) throw Error("make_splits: node type '" + task.target + "' has no labels");
    Index labeled;
    std::map<int, std::size_t> per_class;
    for (std::size_t v = 0; v < g.labels(t).size(); ++v) {
      const int l = g.labels(t)[v];
      if (l == kUnlabeled) continue;
      labeled.push_back(static_cast<std::uint32_t>(v));
      ++per_class[l];
    }
    for (const auto& [cls, count] : per_class)
      if (count < 5)
        throw Error("make_splits: class " + std::to_string(cls) + " has only " + std::to_string(count) +
                    " labeled nodes (at least 5 required)");
    if (per_class.empty()) throw Error("make_splits: no labeled nodes");
    for (std::size_t k = 0; k < n_splits; ++k) {
      Split s;
      s.id = k;
      s.seed = derive_seed(seed, k);
      auto items = labeled;
      Rng rng(s.seed);
      shuffle(items, rng);
      const auto n_val = validation_size(items.size());
      s.valid_nodes.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_val));
      s.train_nodes.assign(items.begin() + static_cast<std::ptrdiff_t>(n_val), items.end());
      std::sort(s.valid_nodes.begin(), s.valid_nodes.end());
      std::sort(s.train_nodes.begin(), s.train_nodes.end());
      out.push_back(std::move(s));
    }
    return out;
  }

  const auto r = g.relation_index(task.target);
  auto edges = g.edges(r);
  if (edges.size() < 5) throw Error("make_splits: relation '" + task.target + "' has fewer than 5 edges");
  for (auto& e : edges) e.count = 1;
  for (std::size_t k = 0; k < n_splits; ++k) {
    Split s;
    s.id = k;
    s.seed = derive_seed(seed, k);
    auto items = edges;
    Rng rng(s.seed);
    shuffle(items, rng);
    const auto n_val = validation_size(items.size());
    auto by_pair = [](const Edge& a, const Edge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); };
    s.valid_edges.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train_edges.assign(items.begin() + static_cast<std::ptrdiff_t>(n_val), items.end());
    std::sort(s.valid_edges.begin(), s.valid_edges.end(), by_pair);
    std::sort(s.train_edges.begin(), s.train_edges.end(), by_pair);
    out.push_back(std::move(s));
  }
  return out;
}

HeteroGraph training_graph(const Task& task, const HeteroGraph& g, const Split& split) {
  if (task.kind == TaskKind::NodeClassification) return g;
  return remove_edges(g, task.target, split.valid_edges, task.reverse_relation);
}

std::vector<Edge> negative_sample(const HeteroGraph& g, std::string_view relation, const std::vector<Edge>& positives,
                                  std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error("negative_sample: k must be at least 1");
  const auto r = g.relation_index(relation);
  const auto n_src = g.node_type(g.relation_src(r)).count;
  const auto n_dst = g.node_type(g.relation_dst(r)).count;
  std::set<std::pair<std::uint32_t, std::uint32_t>> taken;
  for (const auto& e : g.edges(r)) taken.emplace(e.src, e.dst);
  for (const auto& e : positives) {
    if (e.src >= n_src || e.dst >= n_dst) throw Error("negative_sample: positive pair out of range");
    taken.emplace(e.src, e.dst);
  }
  if (taken.size() >= n_src * n_dst)
    throw Error("negative_sample: relation '" + std::string(relation) + "' is saturated (every pair is positive)");
  std::vector<std::size_t> row_used(n_src, 0);
  for (const auto& [s, d] : taken) ++row_used[s];

  Rng rng(seed);
  std::vector<Edge> out;
  out.reserve(positives.size() * k);
  for (const auto& p : positives) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uint32_t src = p.src;
      if (row_used[src] >= n_dst) {
        do {
          src = static_cast<std::uint32_t>(uniform_index(rng, n_src));
        } while (row_used[src] >= n_dst);
      }
      std::uint32_t dst = 0;
      do {
        dst = static_cast<std::uint32_t>(uniform_index(rng, n_dst));
      } while (taken.count({src, dst}));
      out.push_back({src, dst, 1});
    }
  }
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, std::vector<Tensor> params)
    : kind_(kind), lr_(lr), params_(std::move(params)) {
  if (kind_ == OptimizerKind::Adam) {
    for (const auto& p : params_) {
      m_.emplace_back(p.rows(), p.cols());
      v_.emplace_back(p.rows(), p.cols());
    }
  }
}

void Optimizer::step() {
  ++t_;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i].mutable_value().data();
    const auto& g = params_[i].grad().data();
    if (kind_ == OptimizerKind::SGD) {
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr_ * g[j];
      continue;
    }
    auto& m = m_[i].data();
    auto& v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

TrialRecord train_trial(const DesignConfig& cfg, const HeteroGraph& g, const Split& split, TrainOptions options) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.config = to_kv(cfg);
  rec.seed = cfg.seed;
  rec.split_id = split.id;
  const int epochs = options.epochs.value_or(cfg.epochs);
  if (epochs < 0) throw Error("train_trial: negative epoch count");

  const bool nc = cfg.task.kind == TaskKind::NodeClassification;
  rec.metric = nc ? "macro_f1" : "roc_auc";
  rec.secondary_metric = nc ? "micro_f1" : "mrr";

  const HeteroGraph train_g = training_graph(cfg.task, g, split);
  Model model(cfg, train_g);
  Optimizer opt(cfg.optimizer, cfg.lr, model.parameters().tensors());

  std::vector<int> labels;
  std::vector<Edge> eval_pairs;
  std::vector<int> eval_targets;
  std::vector<Edge> rank_negatives;
  if (nc) {
    labels = g.labels(g.type_index(cfg.task.target));
  } else {
    const auto negs = negative_sample(g, cfg.task.target, split.valid_edges, 1, derive_seed(split.seed, kEvalNegStream));
    eval_pairs = split.valid_edges;
    eval_pairs.insert(eval_pairs.end(), negs.begin(), negs.end());
    eval_targets.assign(split.valid_edges.size(), 1);
    eval_targets.resize(eval_pairs.size(), 0);
    rank_negatives = negative_sample(g, cfg.task.target, split.valid_edges, cfg.task.eval_negatives,
                                     derive_seed(split.seed, kRankNegStream));
  }

  auto evaluate = [&]() -> Evaluation {
    NoGradGuard guard;
    const auto out = model.forward(false);
    Evaluation ev;
    if (nc) {
      const auto& logits = out.logits.value();
      if (!all_finite(logits)) return ev;
      std::vector<int> preds, truth;
      for (auto v : split.valid_nodes) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
          if (logits(v, c) > logits(v, best)) best = c;
        preds.push_back(static_cast<int>(best));
        truth.push_back(labels[v]);
      }
      ev.score = macro_f1(preds, truth);
      ev.secondary = micro_f1(preds, truth);
      return ev;
    }
    const auto scores = model.link_logits(out, eval_pairs).value();
    if (!all_finite(scores)) return ev;
    ev.score = roc_auc(scores.data(), eval_targets);
    const auto k = cfg.task.eval_negatives;
    const auto pos = model.link_logits(out, split.valid_edges).value();
    const auto neg = model.link_logits(out, rank_negatives).value();
    if (!all_finite(pos) || !all_finite(neg)) return ev;
    std::vector<std::vector<double>> groups(split.valid_edges.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      groups[i].push_back(pos(i, 0));
      for (std::size_t j = 0; j < k; ++j) groups[i].push_back(neg(i * k + j, 0));
    }
    ev.secondary = mrr(groups);
    return ev;
  };

  auto fail = [&](std::string reason) {
    rec.status = TrialStatus::Failed;
    rec.score = kNaN;
    rec.secondary = kNaN;
    rec.error = std::move(reason);
  };

  auto ev = evaluate();
  rec.history.push_back(ev.score);
  if (!std::isfinite(ev.score)) {
    fail("non-finite validation score at initialization");
  } else {
    rec.score = ev.score;
    rec.secondary = ev.secondary;
    rec.best_epoch = 0;
  }

  for (int epoch = 1; epoch <= epochs && rec.status == TrialStatus::Ok; ++epoch) {
    model.parameters().zero_grad();
    Tensor loss;
    {
      const auto out = model.forward(true, static_cast<std::uint64_t>(epoch));
      if (nc) {
        loss = cross_entropy(out.logits, labels, split.train_nodes);
      } else {
        auto pairs = split.train_edges;
        const auto negs = negative_sample(train_g, cfg.task.target, split.train_edges, cfg.task.negatives,
                                          derive_seed(cfg.seed, kTrainNegStream + split.id, epoch));
        std::vector<double> targets(pairs.size(), 1.0);
        pairs.insert(pairs.end(), negs.begin(), negs.end());
        targets.resize(pairs.size(), 0.0);
        loss = bce_with_logits(model.link_logits(out, pairs), targets);
      }
    }
    const double lv = loss.item();
    rec.losses.push_back(lv);
    if (!std::isfinite(lv)) {
      fail("non-finite loss at epoch " + std::to_string(epoch));
      break;
    }
    loss.backward();
    opt.step();
    ev = evaluate();
    rec.history.push_back(ev.score);
    if (!std::isfinite(ev.score)) {
      fail("non-finite validation score at epoch " + std::to_string(epoch));
      break;
    }
    if (ev.score > rec.score) {
      rec.score = ev.score;
      rec.secondary = ev.secondary;
      rec.best_epoch = epoch;
    }
  }

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace hgnn
