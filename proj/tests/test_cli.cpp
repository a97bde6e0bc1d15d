#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "jcpa/cli.hpp"
#include "support.hpp"

namespace jcpa {
namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "jcpa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return CliResult{code, out.str(), err.str()};
}

std::string write_config(const test::TempDir& dir) {
  const std::string path = dir / "cfg.json";
  std::ofstream(path) << R"({"geometry": {"d_pairs": 3, "area_side": 55.0}, "train_size": 48, "val_size": 8,
    "test_size": 6, "train": {"epochs": 2}, "robustness": {"pairs": 4, "size": 4},
    "generalize": {"factors": [1, 2], "size": 3}, "timing": {"pairs": [3], "instances": 2}})";
  return path;
}

void expect_single_line_error(const CliResult& r, const std::string& kind) {
  EXPECT_NE(r.code, 0);
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1) << r.err;
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), kind) << r.err;
  EXPECT_TRUE(j.at("message").is_string());
}

TEST(Cli, FullPipeline) {
  test::TempDir dir("cli");
  const std::string cfg = write_config(dir);
  const std::string out = dir / "out";
  ASSERT_EQ(run({"--config", cfg, "--out", out, "generate"}).code, 0);
  const CliResult tr = run({"--config", cfg, "--out", out, "--dataset", out, "train"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_TRUE(std::filesystem::exists(out + "/checkpoint.json"));
  for (const char* cmd : {"eval", "baseline", "robustness", "generalize", "bench"}) {
    const CliResult r = run({"--config", cfg, "--out", out, cmd});
    ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
  }
  const CliResult rep = run({"--out", out, "report"});
  ASSERT_EQ(rep.code, 0) << rep.err;
  const auto rows = read_results(out + "/results.csv");
  std::set<std::string> experiments;
  for (const auto& r : rows) experiments.insert(r.experiment);
  EXPECT_EQ(experiments, (std::set<std::string>{"eval", "baseline", "robustness", "generalize", "bench"}));
  for (const char* f : {"summary.json", "fig3.csv", "fig5.csv", "fig6.csv", "table1.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(out + "/" + f)) << f;
  }
}

TEST(Cli, SeedOverrideChangesData) {
  test::TempDir dir("cli");
  const std::string cfg = write_config(dir);
  ASSERT_EQ(run({"--config", cfg, "--out", dir / "a", "--solvers", "closest", "baseline"}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "--out", dir / "b", "--solvers", "closest", "baseline"}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "--out", dir / "c", "--seed", "99", "--solvers", "closest", "baseline"}).code, 0);
  const auto a = read_results(dir / "a/results.csv");
  const auto b = read_results(dir / "b/results.csv");
  const auto c = read_results(dir / "c/results.csv");
  EXPECT_EQ(a[0].mean_objective, b[0].mean_objective);
  EXPECT_NE(a[0].mean_objective, c[0].mean_objective);
  EXPECT_NE(a[0].config_hash, c[0].config_hash);
}

TEST(Cli, ErrorsAreSingleJsonLines) {
  test::TempDir dir("cli");
  const std::string cfg = write_config(dir);
  expect_single_line_error(run({}), "usage");
  expect_single_line_error(run({"frobnicate"}), "usage");
  expect_single_line_error(run({"--desk", "--paper-scale", "eval"}), "usage");
  expect_single_line_error(run({"--config", cfg, "--out", dir / "o", "--solvers", "nope", "eval"}), "config");
  expect_single_line_error(run({"--config", dir / "missing.json", "eval"}), "runtime");
  expect_single_line_error(run({"--config", cfg, "--out", dir / "o", "--solvers", "jcpgnn", "baseline"}), "config");
  expect_single_line_error(run({"--config", cfg, "--out", dir / "o", "--solvers", "jcpgnn", "eval"}), "runtime");
  std::ofstream(dir / "junk.jsonl") << "{}\n";
  expect_single_line_error(run({"--config", cfg, "--out", dir / "o", "--dataset", dir / "junk.jsonl", "eval"}), "parse");
  std::ofstream(dir / "bad.json") << R"({"train_size": "many"})";
  expect_single_line_error(run({"--config", dir / "bad.json", "eval"}), "config");
  expect_single_line_error(run({"--out", dir / "o", "report"}), "runtime");
}

TEST(Cli, CheckpointMismatchIsAnError) {
  test::TempDir dir("cli");
  const std::string cfg = write_config(dir);
  ASSERT_EQ(run({"--config", cfg, "--out", dir / "o", "train"}).code, 0);
  const Dataset three = generate_dataset(test::geometry(3, 3, 55.0), FadingConfig{}, 2, 1);
  save_dataset(three, dir / "m3.jsonl");
  expect_single_line_error(
      run({"--config", cfg, "--out", dir / "o", "--dataset", dir / "m3.jsonl", "--solvers", "jcpgnn", "eval"}), "config");
}

TEST(Cli, HelpExitsCleanly) {
  const CliResult r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("generate"), std::string::npos);
}

}  // namespace
}  // namespace jcpa
