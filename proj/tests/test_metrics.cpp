#include <gtest/gtest.h>

#include <cmath>

#include "hgnn/common.hpp"
#include "hgnn/metrics.hpp"

using namespace hgnn;

namespace {

// Probability that a random positive outscores a random negative, ties half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

}  // namespace

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  EXPECT_EQ(macro_f1(y, y), 1.0);
  EXPECT_EQ(micro_f1(y, y), 1.0);
  EXPECT_EQ(mrr({{0.9, 0.1, 0.2}, {3.0, -1.0}}), 1.0);
}

TEST(Metrics, HandComputedValues) {
  // class 0: tp 1 fp 0 fn 1 -> 2/3; class 1: tp 1 fp 1 fn 0 -> 2/3
  EXPECT_DOUBLE_EQ(macro_f1({0, 1, 1}, {0, 0, 1}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(micro_f1({0, 1, 1}, {0, 0, 1}), 2.0 / 3.0);
  // A class that is only ever predicted contributes F1 0.
  EXPECT_DOUBLE_EQ(macro_f1({0, 2}, {0, 1}), 1.0 / 3.0);
  // Ranks 1, 2 and 4; a tie with the positive counts against it.
  EXPECT_DOUBLE_EQ(mrr({{0.9, 0.1, 0.2}, {0.5, 0.7, 0.1}, {0.2, 0.3, 0.4, 0.2}}), 7.0 / 12.0);
}

TEST(Metrics, AucSeparationAndTies) {
  EXPECT_EQ(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}), 0.0);
  EXPECT_EQ(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}), 0.5);
  EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), Error);
  EXPECT_THROW(roc_auc({0.1, 0.2}, {0, 0}), Error);
  EXPECT_THROW(roc_auc({0.1}, {2}), Error);
}

TEST(Metrics, AucMatchesPairwiseCount) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 2 + uniform_index(rng, 30);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 6));  // coarse grid forces ties
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(roc_auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(Metrics, AucInvariantUnderMonotoneTransform) {
  Rng rng(5);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = standard_normal(rng);
    y[i] = static_cast<int>(i % 2);
  }
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
  EXPECT_EQ(roc_auc(s, y), roc_auc(t, y));
}

TEST(Metrics, F1InvariantUnderClassRelabeling) {
  Rng rng(9);
  std::vector<int> p(60), y(60);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<int>(uniform_index(rng, 4));
    y[i] = static_cast<int>(uniform_index(rng, 4));
  }
  const int relabel[] = {2, 3, 0, 1};
  std::vector<int> p2(p.size()), y2(y.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p2[i] = relabel[p[i]];
    y2[i] = relabel[y[i]];
  }
  EXPECT_DOUBLE_EQ(macro_f1(p, y), macro_f1(p2, y2));
  EXPECT_DOUBLE_EQ(micro_f1(p, y), micro_f1(p2, y2));
  EXPECT_THROW(macro_f1({}, {}), Error);
  EXPECT_THROW(micro_f1({1}, {1, 2}), Error);
}

TEST(Metrics, ArgmaxRows) {
  EXPECT_EQ(argmax_rows({1, 3, 3, 0, -1, -2}, 3), (std::vector<int>{1, 0}));
  EXPECT_THROW(argmax_rows({1, 2, 3}, 2), Error);
}
