// Graph bundle reader/writer.
//
// graph.json:
//   { "format": "hgnn-graph/1",
//     "node_types": [ {"name", "count", "feature_dim", "features": file|null, "labels": file|null} ],
//     "relations":  [ {"name", "src", "dst", "edges": file} ] }
// <relation>.csv        src,dst[,count]   one edge per line
// <type>.features.csv   row i = features of node i, comma separated
// <type>.labels.csv     one integer per line, -1 = unlabeled

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hgnn/common.hpp"
#include "hgnn/hgraph.hpp"

namespace hgnn {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kFormat = "hgnn-graph/1";

void check_file_name(const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
      name == "." || name == "..")
    throw Error("name '" + name + "' cannot be used as a bundle file name");
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format feature value");
  return std::string(buf, end);
}

template <typename T>
T parse_number(std::string_view field, const fs::path& file, std::size_t line) {
  const auto text = trim(field);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(file.filename().string() + ":" + std::to_string(line) + ": cannot parse '" + text + "'");
  }
  return value;
}

std::ifstream open_input(const fs::path& file, const std::string& what) {
  std::ifstream in(file);
  if (!in) throw Error("missing " + what + " file '" + file.string() + "'");
  return in;
}

std::ofstream open_output(const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + file.string() + "'");
  return out;
}

}  // namespace

void save_graph(const HeteroGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  json doc;
  doc["format"] = kFormat;
  doc["node_types"] = json::array();
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    const auto& nt = g.node_type(t);
    check_file_name(nt.name);
    json entry{{"name", nt.name}, {"count", nt.count}, {"feature_dim", nt.feature_dim}};
    if (nt.feature_dim > 0) {
      const std::string file = nt.name + ".features.csv";
      entry["features"] = file;
      auto out = open_output(dir / file);
      const auto& f = g.features(t);
      for (std::size_t i = 0; i < f.rows(); ++i) {
        for (std::size_t j = 0; j < f.cols(); ++j) {
          if (j) out << ',';
          out << shortest(f(i, j));
        }
        out << '\n';
      }
    } else {
      entry["features"] = nullptr;
    }
    if (g.has_labels(t)) {
      const std::string file = nt.name + ".labels.csv";
      entry["labels"] = file;
      auto out = open_output(dir / file);
      for (int y : g.labels(t)) out << y << '\n';
    } else {
      entry["labels"] = nullptr;
    }
    doc["node_types"].push_back(entry);
  }
  doc["relations"] = json::array();
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    const auto& rel = g.relation(r);
    check_file_name(rel.name);
    const std::string file = rel.name + ".csv";
    doc["relations"].push_back({{"name", rel.name}, {"src", rel.src_type}, {"dst", rel.dst_type}, {"edges", file}});
    auto out = open_output(dir / file);
    for (const auto& e : g.edges(r)) out << e.src << ',' << e.dst << ',' << e.count << '\n';
  }
  auto out = open_output(dir / "graph.json");
  out << doc.dump(2) << '\n';
}

HeteroGraph load_graph(const fs::path& dir) {
  json doc;
  {
    auto in = open_input(dir / "graph.json", "graph header");
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("malformed graph.json: " + std::string(e.what()));
    }
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat || !doc.contains("node_types") ||
      !doc.contains("relations") || !doc["node_types"].is_array() || !doc["relations"].is_array())
    throw Error("malformed graph.json: expected format '" + std::string(kFormat) + "' with node_types and relations");

  std::vector<NodeType> types;
  std::vector<Matrix> features;
  std::vector<std::vector<int>> labels;
  try {
    for (const auto& entry : doc["node_types"]) {
      NodeType nt{entry.at("name").get<std::string>(), entry.at("count").get<std::size_t>(),
                  entry.value("feature_dim", std::size_t{0})};
      Matrix f(nt.count, nt.feature_dim);
      if (nt.feature_dim > 0) {
        if (!entry.contains("features") || !entry["features"].is_string())
          throw Error("node type '" + nt.name + "' has feature_dim " + std::to_string(nt.feature_dim) +
                      " but no feature file");
        const fs::path file = dir / entry["features"].get<std::string>();
        std::ifstream in(file);
        if (!in) throw Error("node type '" + nt.name + "': missing feature file '" + file.string() + "'");
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
          if (trim(line).empty()) continue;
          if (row >= nt.count)
            throw Error("node type '" + nt.name + "': feature file has more than " + std::to_string(nt.count) +
                        " rows");
          const auto fields = split(line, ',');
          if (fields.size() != nt.feature_dim)
            throw Error(file.filename().string() + ":" + std::to_string(row + 1) + ": expected " +
                        std::to_string(nt.feature_dim) + " values, got " + std::to_string(fields.size()));
          for (std::size_t j = 0; j < fields.size(); ++j) f(row, j) = parse_number<double>(fields[j], file, row + 1);
          ++row;
        }
        if (row != nt.count)
          throw Error("node type '" + nt.name + "': feature file has " + std::to_string(row) + " rows, expected " +
                      std::to_string(nt.count));
      }
      std::vector<int> y;
      if (entry.contains("labels") && entry["labels"].is_string()) {
        const fs::path file = dir / entry["labels"].get<std::string>();
        auto in = open_input(file, "label");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
          ++lineno;
          if (trim(line).empty()) continue;
          y.push_back(parse_number<int>(line, file, lineno));
        }
      }
      types.push_back(std::move(nt));
      features.push_back(std::move(f));
      labels.push_back(std::move(y));
    }

    std::vector<Relation> relations;
    std::vector<std::vector<Edge>> edge_lists;
    for (const auto& entry : doc["relations"]) {
      Relation rel{entry.at("name").get<std::string>(), entry.at("src").get<std::string>(),
                   entry.at("dst").get<std::string>()};
      const fs::path file = dir / entry.value("edges", rel.name + ".csv");
      auto in = open_input(file, "edge");
      std::vector<Edge> edges;
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2 && fields.size() != 3)
          throw Error(file.filename().string() + ":" + std::to_string(lineno) + ": expected src,dst[,count]");
        Edge e;
        e.src = parse_number<std::uint32_t>(fields[0], file, lineno);
        e.dst = parse_number<std::uint32_t>(fields[1], file, lineno);
        if (fields.size() == 3) e.count = parse_number<std::int64_t>(fields[2], file, lineno);
        edges.push_back(e);
      }
      relations.push_back(std::move(rel));
      edge_lists.push_back(std::move(edges));
    }
    return build_graph(std::move(types), std::move(relations), std::move(edge_lists), std::move(features),
                       std::move(labels));
  } catch (const json::exception& e) {
    throw Error("malformed graph.json: " + std::string(e.what()));
  }
}

}  // namespace hgnn
