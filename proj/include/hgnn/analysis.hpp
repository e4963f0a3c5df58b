#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hgnn/train.hpp"

namespace hgnn {

/// Ranks of `scores` in descending order (1 = best). Failed entries come
/// after every successful one; tied entries share the mean of their
/// positions.
std::vector<double> rank_descending(const std::vector<double>& scores, const std::vector<bool>& failed);

struct RankingTable {
  std::string dimension;
  std::vector<std::string> choices;
  std::vector<double> average_rank;        // per choice
  std::vector<std::vector<double>> ranks;  // per choice, one entry per setup
  std::size_t setups = 0;
};

/// Groups records into setups (same config apart from `dimension`, same
/// split), keeps the setups holding every observed choice exactly once, and
/// averages the within-setup ranks. Throws Error when no setup is complete.
RankingTable rank_choices(const std::vector<TrialRecord>& records, std::string_view dimension);

/// Empirical distribution function F(s) = #{i : s_i < s} / n.
class EdfCurve {
 public:
  /// Throws Error on empty input.
  explicit EdfCurve(std::vector<double> scores, std::string name = {});

  double operator()(double s) const;
  /// Limit from the right, #{i : s_i <= s} / n.
  double right_limit(double s) const;
  const std::vector<double>& scores() const { return scores_; }
  /// Distinct scores, ascending.
  std::vector<double> breakpoints() const;
  const std::string& name() const { return name_; }

 private:
  std::vector<double> scores_;
  std::string name_;
};

EdfCurve edf(std::vector<double> scores, std::string name = {});
/// EDF over the finite scores of successful records.
EdfCurve edf_from_records(const std::vector<TrialRecord>& records, std::string name);

/// choice,avg_rank,setups,rank_<r>... (rank histogram columns, ascending r).
std::string ranking_csv(const RankingTable& table);
/// space,score,f_at,f_right for every breakpoint of every curve.
std::string edf_csv(const std::vector<EdfCurve>& curves);
std::string ranking_svg(const RankingTable& table);
std::string edf_svg(const std::vector<EdfCurve>& curves);

/// Writes rank_<dimension>.csv/.svg per table and edf.csv/.svg when curves
/// are given. Returns the written paths. Throws Error when the directory is
/// not writable.
std::vector<std::filesystem::path> emit_report(const std::vector<RankingTable>& tables,
                                               const std::vector<EdfCurve>& curves,
                                               const std::filesystem::path& out_dir);

}  // namespace hgnn
