#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "hgnn/hgraph.hpp"

namespace fixture {

/// Fresh empty directory under the test temp root.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto* info = testing::UnitTest::GetInstance()->current_test_info();
  std::string name = tag;
  if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
  name += "_" + std::to_string(counter++);
  const auto dir = std::filesystem::path(testing::TempDir()) / "hgnn_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Three-type academic schema: paper (3), author (2), conference (1);
/// relations written (A->P), written_by (P->A), published (P->C),
/// publishes (C->P).
inline hgnn::HeteroGraph academic_toy() {
  using hgnn::Edge;
  std::vector<hgnn::NodeType> types{{"P", 3, 2}, {"A", 2, 0}, {"C", 1, 0}};
  std::vector<hgnn::Relation> rels{
      {"written", "A", "P"}, {"written_by", "P", "A"}, {"published", "P", "C"}, {"publishes", "C", "P"}};
  std::vector<std::vector<Edge>> edges{
      {{0, 0}, {0, 1}, {1, 1}},
      {{0, 0}, {1, 0}, {1, 1}},
      {{0, 0}, {1, 0}, {2, 0}},
      {{0, 0}, {0, 1}, {0, 2}},
  };
  std::vector<hgnn::Matrix> features{hgnn::Matrix{{1, 0}, {0, 1}, {1, 1}}, hgnn::Matrix(2, 0), hgnn::Matrix(1, 0)};
  std::vector<std::vector<int>> labels{{0, 1, 0}, {}, {}};
  return hgnn::build_graph(types, rels, edges, features, labels);
}

}  // namespace fixture
