#include "hgnn/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "hgnn/common.hpp"

namespace hgnn {

namespace {

void check_pairs(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.empty()) throw Error("metric needs at least one prediction");
  if (preds.size() != labels.size()) throw Error("predictions and labels differ in length");
}

}  // namespace

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pairs(preds, labels);
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<int, Counts> per_class;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) {
      ++per_class[labels[i]].tp;
    } else {
      ++per_class[preds[i]].fp;
      ++per_class[labels[i]].fn;
    }
  }
  double total = 0.0;
  for (const auto& [cls, c] : per_class) {
    const auto denom = 2 * c.tp + c.fp + c.fn;
    total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
  }
  return total / static_cast<double>(per_class.size());
}

double micro_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pairs(preds, labels);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error("roc_auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error("roc_auc: labels must be 0 or 1");
    pos += l == 1;
  }
  const auto neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw Error("roc_auc: undefined with a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum += mid;
    i = j;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double mrr(const std::vector<std::vector<double>>& groups) {
  if (groups.empty()) throw Error("mrr: no groups");
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("mrr: empty group");
    std::size_t rank = 1;
    for (std::size_t i = 1; i < g.size(); ++i) rank += g[i] >= g[0];
    total += 1.0 / static_cast<double>(rank);
  }
  return total / static_cast<double>(groups.size());
}

std::vector<int> argmax_rows(const std::vector<double>& values, std::size_t cols) {
  if (cols == 0 || values.size() % cols != 0) throw Error("argmax_rows: bad shape");
  std::vector<int> out(values.size() / cols);
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (values[r * cols + c] > values[r * cols + best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace hgnn
