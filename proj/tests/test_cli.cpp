#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Output {
  int status = -1;
  std::string text;
};

// Runs hgnn-space with the given arguments, capturing stdout and stderr.
Output cli(const std::string& args) {
  const std::string cmd = std::string(HGNN_SPACE_BIN) + " " + args + " 2>&1";
  Output out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return out;
  std::array<char, 4096> buf{};
  while (auto n = fread(buf.data(), 1, buf.size(), pipe)) out.text.append(buf.data(), n);
  const int raw = pclose(pipe);
  out.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return out;
}

}  // namespace

TEST(Cli, Cardinality) {
  const auto both = cli("space cardinality");
  EXPECT_EQ(both.status, 0);
  EXPECT_EQ(both.text, "full 41990400\ncondensed 82944\nratio 506.25\n");
  EXPECT_EQ(cli("space cardinality --space condensed").text, "82944\n");
  EXPECT_NE(cli("space cardinality --space tiny").status, 0);
}

TEST(Cli, Describe) {
  const auto out = cli("space describe --space condensed");
  EXPECT_EQ(out.status, 0);
  EXPECT_NE(out.text.find("activation: Elu LeakyRelu Tanh"), std::string::npos);
  EXPECT_NE(out.text.find("macro_agg: Mean Max Sum Attention  (when model_family in Relation Metapath)"), std::string::npos);
  EXPECT_NE(out.text.find("cardinality: 82944"), std::string::npos);
}

TEST(Cli, SampleWritesConfigs) {
  const auto dir = fixture::temp_dir("cli_sample");
  const auto out = cli("space sample --n 24 --strata-hits 2 --seed 5 --out " + (dir / "cfgs").string());
  EXPECT_EQ(out.status, 0) << out.text;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "cfgs")) files += e.path().extension() == ".cfg";
  EXPECT_EQ(files, 24u);
  EXPECT_TRUE(fs::exists(dir / "cfgs" / "config_0000.cfg"));
  EXPECT_EQ(cli("space sample --n 4 --seed 5").text, cli("space sample --n 4 --seed 5").text);
  EXPECT_NE(cli("space sample --n 3 --strata-hits 1").status, 0);
}

TEST(Cli, SynthAndHomophily) {
  const auto dir = fixture::temp_dir("cli_graph");
  const auto g = (dir / "g").string();
  EXPECT_EQ(cli("graph synth --out " + g + " --papers 200 --authors 100 --edges 600 --boost 1 --seed 2").status, 0);
  const auto out = cli("analyze homophily --graph " + g + " --metapath PAP=written_by,writes");
  EXPECT_EQ(out.status, 0) << out.text;
  EXPECT_EQ(out.text, "metapath,beta\nPAP,1\n");
  const auto bad = cli("analyze homophily --graph " + g + " --metapath PAP=writes,writes");
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.text.find("error:"), std::string::npos);
}

TEST(Cli, RunAndAnalyze) {
  const auto dir = fixture::temp_dir("cli_run");
  ASSERT_EQ(cli("graph synth --out " + (dir / "g").string() + " --papers 40 --authors 30 --edges 120 --seed 1").status, 0);
  std::ofstream(dir / "plan.txt") << "graph = g\ntarget = paper\nn = 12\nstrata_hits = 1\nsplits = 1\nepochs = 1\n"
                                     "hidden_dim_note = x\n";
  EXPECT_EQ(cli("run --plan " + (dir / "plan.txt").string()).status, 1);

  std::ofstream(dir / "plan.txt") << "graph = g\ntarget = paper\nn = 12\nstrata_hits = 1\nsplits = 1\nepochs = 1\n"
                                     "perturb = batch_norm\nmetapath.PAP = written_by,writes\n";
  const auto run = cli("run --plan " + (dir / "plan.txt").string());
  EXPECT_EQ(run.status, 0) << run.text;
  EXPECT_NE(run.text.find("24 trials, 24 executed"), std::string::npos) << run.text;

  const auto results = (dir / "results.ndrec").string();
  const auto rank = cli("analyze rank --dim batch_norm --results " + results + " --out " + (dir / "rep").string());
  EXPECT_EQ(rank.status, 0) << rank.text;
  EXPECT_EQ(rank.text.rfind("choice,avg_rank,setups", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "rep" / "rank_batch_norm.svg"));

  const auto edf = cli("analyze edf --results " + results + " --out " + (dir / "rep").string());
  EXPECT_EQ(edf.status, 0) << edf.text;
  EXPECT_TRUE(fs::exists(dir / "rep" / "edf.csv"));

  const auto resume = cli("run --resume --plan " + (dir / "plan.txt").string());
  EXPECT_NE(resume.text.find("0 executed"), std::string::npos) << resume.text;
}
