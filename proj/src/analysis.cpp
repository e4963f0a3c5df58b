#include "hgnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "hgnn/common.hpp"
#include "hgnn/designspace.hpp"

namespace hgnn {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw Error("write failed: " + path.string());
}

std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

}  // namespace

std::vector<double> rank_descending(const std::vector<double>& scores, const std::vector<bool>& failed) {
  if (scores.size() != failed.size()) throw Error("rank_descending: scores and failure flags differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (failed[a] != failed[b]) return !failed[a];
    if (failed[a]) return false;
    return scores[a] > scores[b];
  };
  std::stable_sort(order.begin(), order.end(), better);
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && !better(order[i], order[j]) && !better(order[j], order[i])) ++j;
    const double mean = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean;
    i = j;
  }
  return ranks;
}

RankingTable rank_choices(const std::vector<TrialRecord>& records, std::string_view dimension) {
  const std::string dim(dimension);
  std::set<std::string> observed;
  for (const auto& r : records)
    if (auto it = r.config.find(dim); it != r.config.end()) observed.insert(it->second);
  if (observed.empty()) throw Error("rank: no record sets dimension '" + dim + "'");

  RankingTable table;
  table.dimension = dim;
  const auto space = full_space();
  if (const auto* d = space.find(dim)) {
    for (const auto& c : d->choices)
      if (observed.count(c)) table.choices.push_back(c);
    for (const auto& c : observed)
      if (std::find(table.choices.begin(), table.choices.end(), c) == table.choices.end()) table.choices.push_back(c);
  } else {
    table.choices.assign(observed.begin(), observed.end());
  }
  const auto m = table.choices.size();
  std::map<std::string, std::size_t> choice_index;
  for (std::size_t i = 0; i < m; ++i) choice_index[table.choices[i]] = i;

  std::map<std::pair<ConfigMap, std::size_t>, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) {
    if (!r.config.count(dim)) continue;
    auto key = r.config;
    key.erase(dim);
    groups[{std::move(key), r.split_id}].push_back(&r);
  }

  table.ranks.assign(m, {});
  for (const auto& [key, members] : groups) {
    std::vector<const TrialRecord*> by_choice(m, nullptr);
    for (const auto* r : members) {
      auto& slot = by_choice[choice_index.at(r->config.at(dim))];
      if (!slot) slot = r;
    }
    if (std::any_of(by_choice.begin(), by_choice.end(), [](auto* p) { return p == nullptr; })) continue;
    std::vector<double> scores(m);
    std::vector<bool> failed(m);
    for (std::size_t i = 0; i < m; ++i) {
      failed[i] = by_choice[i]->status == TrialStatus::Failed || !std::isfinite(by_choice[i]->score);
      scores[i] = failed[i] ? 0.0 : by_choice[i]->score;
    }
    const auto ranks = rank_descending(scores, failed);
    for (std::size_t i = 0; i < m; ++i) table.ranks[i].push_back(ranks[i]);
    ++table.setups;
  }
  if (table.setups == 0) throw Error("rank: no complete setup for dimension '" + dim + "'");
  for (const auto& rs : table.ranks)
    table.average_rank.push_back(std::accumulate(rs.begin(), rs.end(), 0.0) / static_cast<double>(rs.size()));
  return table;
}

EdfCurve::EdfCurve(std::vector<double> scores, std::string name) : scores_(std::move(scores)), name_(std::move(name)) {
  if (scores_.empty()) throw Error("edf: no scores");
  for (double s : scores_)
    if (!std::isfinite(s)) throw Error("edf: non-finite score");
  std::sort(scores_.begin(), scores_.end());
}

double EdfCurve::operator()(double s) const {
  const auto below = std::lower_bound(scores_.begin(), scores_.end(), s) - scores_.begin();
  return static_cast<double>(below) / static_cast<double>(scores_.size());
}

double EdfCurve::right_limit(double s) const {
  const auto upto = std::upper_bound(scores_.begin(), scores_.end(), s) - scores_.begin();
  return static_cast<double>(upto) / static_cast<double>(scores_.size());
}

std::vector<double> EdfCurve::breakpoints() const {
  std::vector<double> out = scores_;
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EdfCurve edf(std::vector<double> scores, std::string name) { return EdfCurve(std::move(scores), std::move(name)); }

EdfCurve edf_from_records(const std::vector<TrialRecord>& records, std::string name) {
  std::vector<double> scores;
  for (const auto& r : records)
    if (r.status == TrialStatus::Ok && std::isfinite(r.score)) scores.push_back(r.score);
  return EdfCurve(std::move(scores), std::move(name));
}

std::string ranking_csv(const RankingTable& table) {
  std::set<double> values;
  for (const auto& rs : table.ranks) values.insert(rs.begin(), rs.end());
  std::string out = "choice,avg_rank,setups";
  for (double v : values) out += ",rank_" + format_decimal(v);
  out += "\n";
  for (std::size_t i = 0; i < table.choices.size(); ++i) {
    out += table.choices[i] + "," + fmt(table.average_rank[i], "%.6f") + "," + std::to_string(table.ranks[i].size());
    for (double v : values) out += "," + std::to_string(std::count(table.ranks[i].begin(), table.ranks[i].end(), v));
    out += "\n";
  }
  return out;
}

std::string edf_csv(const std::vector<EdfCurve>& curves) {
  std::string out = "space,score,f_at,f_right\n";
  for (const auto& c : curves)
    for (double s : c.breakpoints())
      out += c.name() + "," + fmt(s, "%.17g") + "," + fmt(c(s), "%.17g") + "," + fmt(c.right_limit(s), "%.17g") + "\n";
  return out;
}

std::string ranking_svg(const RankingTable& table) {
  const int bar = 48, gap = 24, left = 50, top = 40, height = 200;
  const int width = left + static_cast<int>(table.choices.size()) * (bar + gap) + gap;
  const double max_rank = static_cast<double>(table.choices.size());
  std::string out = svg_open(width, top + height + 60);
  out += "<text x=\"" + std::to_string(left) + "\" y=\"20\">average rank: " + xml_escape(table.dimension) + " (" +
         std::to_string(table.setups) + " setups, lower is better)</text>\n";
  out += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top + height) + "\" x2=\"" +
         std::to_string(width - gap / 2) + "\" y2=\"" + std::to_string(top + height) + "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < table.choices.size(); ++i) {
    const double h = max_rank > 0 ? table.average_rank[i] / max_rank * height : 0.0;
    const int x = left + gap + static_cast<int>(i) * (bar + gap);
    out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + fmt(top + height - h) + "\" width=\"" + std::to_string(bar) +
           "\" height=\"" + fmt(h) + "\" fill=\"" + kPalette[i % 8] + "\"/>\n";
    out += "<text x=\"" + std::to_string(x) + "\" y=\"" + fmt(top + height - h - 4) + "\">" +
           fmt(table.average_rank[i], "%.2f") + "</text>\n";
    out += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top + height + 16) + "\">" +
           xml_escape(table.choices[i]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string edf_svg(const std::vector<EdfCurve>& curves) {
  const int left = 50, top = 30, w = 400, h = 240;
  double lo = 1.0, hi = 0.0;
  for (const auto& c : curves) {
    lo = std::min(lo, c.scores().front());
    hi = std::max(hi, c.scores().back());
  }
  if (curves.empty()) lo = 0.0, hi = 1.0;
  if (hi <= lo) hi = lo + 1.0;
  auto px = [&](double s) { return left + (s - lo) / (hi - lo) * w; };
  auto py = [&](double f) { return top + (1.0 - f) * h; };
  std::string out = svg_open(left + w + 140, top + h + 50);
  out += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top) + "\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  out += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top + h + 20) + "\">" + fmt(lo) + "</text>\n";
  out += "<text x=\"" + std::to_string(left + w - 30) + "\" y=\"" + std::to_string(top + h + 20) + "\">" + fmt(hi) +
         "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    std::string points = fmt(px(lo)) + "," + fmt(py(0.0));
    for (double s : c.breakpoints()) {
      points += " " + fmt(px(s)) + "," + fmt(py(c(s)));
      points += " " + fmt(px(s)) + "," + fmt(py(c.right_limit(s)));
    }
    points += " " + fmt(px(hi)) + "," + fmt(py(1.0));
    out += "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[i % 8]) + "\" stroke-width=\"2\" points=\"" +
           points + "\"/>\n";
    out += "<text x=\"" + std::to_string(left + w + 10) + "\" y=\"" + std::to_string(top + 16 + 16 * static_cast<int>(i)) +
           "\" fill=\"" + kPalette[i % 8] + "\">" + xml_escape(c.name()) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::vector<fs::path> emit_report(const std::vector<RankingTable>& tables, const std::vector<EdfCurve>& curves,
                                  const fs::path& out_dir) {
  if (tables.empty() && curves.empty()) throw Error("report: nothing to emit");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("report: cannot create directory " + out_dir.string());
  std::vector<fs::path> written;
  for (const auto& t : tables) {
    const auto base = out_dir / ("rank_" + t.dimension);
    write_file(base.string() + ".csv", ranking_csv(t));
    write_file(base.string() + ".svg", ranking_svg(t));
    written.emplace_back(base.string() + ".csv");
    written.emplace_back(base.string() + ".svg");
  }
  if (!curves.empty()) {
    write_file(out_dir / "edf.csv", edf_csv(curves));
    write_file(out_dir / "edf.svg", edf_svg(curves));
    written.push_back(out_dir / "edf.csv");
    written.push_back(out_dir / "edf.svg");
  }
  return written;
}

}  // namespace hgnn
