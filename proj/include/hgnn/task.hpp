#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace hgnn {

enum class TaskKind { NodeClassification, LinkPrediction };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view name);

struct Task {
  TaskKind kind = TaskKind::NodeClassification;
  /// Node type (node classification) or relation (link prediction).
  std::string target;
  /// Link prediction: relation mirroring `target`; held-out edges are removed
  /// from it as well.
  std::string reverse_relation;
  /// 0 = take from the graph's labels.
  std::size_t num_classes = 0;
  /// Negatives per positive in the training loss.
  std::size_t negatives = 1;
  /// Negatives per positive in each MRR evaluation group.
  std::size_t eval_negatives = 50;

  bool operator==(const Task&) const = default;
};

}  // namespace hgnn
