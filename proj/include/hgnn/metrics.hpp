#pragma once

#include <vector>

namespace hgnn {

/// Unweighted mean of per-class F1 over every class occurring in labels or
/// predictions.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels);
/// Micro-averaged F1; equals accuracy for single-label predictions.
double micro_f1(const std::vector<int>& preds, const std::vector<int>& labels);

/// Area under the ROC curve from the Mann-Whitney rank statistic; tied scores
/// share the midpoint rank. labels are 0/1. Throws Error when only one class
/// is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mean reciprocal rank. Each group holds the positive's score first, then
/// its negatives; a negative scoring equal to the positive ranks ahead of it.
double mrr(const std::vector<std::vector<double>>& groups);

/// Row-wise argmax (first on ties) of a row-major n x m score array.
std::vector<int> argmax_rows(const std::vector<double>& values, std::size_t cols);

}  // namespace hgnn
