#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "jcpa/experiment.hpp"
#include "support.hpp"

namespace jcpa {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig c = ExperimentConfig::desk();
  c.geometry = test::geometry(3, 2, 55.0);
  c.train_size = 64;
  c.val_size = 16;
  c.test_size = 12;
  c.train.epochs = 2;
  c.robustness_pairs = 4;
  c.robustness_size = 8;
  c.generalize_size = 4;
  c.scale_factors = {1.0, 2.0};
  c.timing_pairs = {3};
  c.timing_instances = 2;
  return c;
}

std::size_t zero_offdiag(const NetworkInstance& inst) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < inst.d_pairs; ++r) {
    for (std::size_t t = 0; t < inst.d_pairs; ++t) {
      for (std::size_t c = 0; c < inst.m_channels; ++c) n += r != t && inst.gains(r, t, c) == 0.0;
    }
  }
  return n;
}

TEST(CorruptCsi, RemovesExactlyTheRoundedCount) {
  const auto inst = test::instance(10, 2, 1);
  const auto half = corrupt_csi(inst, 0.5, 7);
  EXPECT_EQ(zero_offdiag(half), 90u);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(half.gains(i, i, c), inst.gains(i, i, c));
  }
  EXPECT_EQ(zero_offdiag(corrupt_csi(inst, 0.1, 7)), 18u);
  EXPECT_EQ(zero_offdiag(corrupt_csi(test::instance(5, 3, 2), 1.0 / 3.0, 1)), 20u);
}

TEST(CorruptCsi, Extremes) {
  const auto inst = test::instance(6, 2, 2);
  EXPECT_EQ(corrupt_csi(inst, 0.0, 3), inst);
  const auto all = corrupt_csi(inst, 1.0, 3);
  EXPECT_EQ(zero_offdiag(all), 60u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(all.gains(i, i, 1), inst.gains(i, i, 1));
  EXPECT_THROW(corrupt_csi(inst, 1.5, 3), std::invalid_argument);
  EXPECT_THROW(corrupt_csi(inst, -0.1, 3), std::invalid_argument);
}

TEST(CorruptCsi, MasksAreNestedAndSeeded) {
  const auto inst = test::instance(8, 2, 3);
  const auto small = corrupt_csi(inst, 0.2, 11);
  const auto large = corrupt_csi(inst, 0.4, 11);
  for (std::size_t k = 0; k < inst.gains.data().size(); ++k) {
    if (small.gains.data()[k] == 0.0) {
      EXPECT_EQ(large.gains.data()[k], 0.0);
    }
  }
  EXPECT_EQ(corrupt_csi(inst, 0.3, 5), corrupt_csi(inst, 0.3, 5));
  EXPECT_NE(corrupt_csi(inst, 0.3, 5), corrupt_csi(inst, 0.3, 6));
}

TEST(ExperimentConfig, Presets) {
  const auto desk = ExperimentConfig::desk();
  EXPECT_EQ(desk.geometry.d_pairs, 10u);
  EXPECT_EQ(desk.geometry.m_channels, 2u);
  EXPECT_EQ(desk.train_size, 2000u);
  EXPECT_EQ(desk.test_size, 500u);
  EXPECT_EQ(desk.train.batch_size, 64u);
  EXPECT_EQ(desk.train.adam.lr, 1e-3);
  EXPECT_EQ(desk.fractions, (std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5}));
  const auto large = ExperimentConfig::paper_scale();
  EXPECT_EQ(large.train_size, 10000u);
  EXPECT_EQ(large.test_size, 1000u);
  EXPECT_EQ(large.geometry.d_pairs, 15u);
  std::vector<std::size_t> ds;
  for (double k : large.scale_factors) ds.push_back(scaled_geometry(large.geometry, k).d_pairs);
  EXPECT_EQ(ds, (std::vector<std::size_t>{15, 30, 50, 80}));
}

TEST(ExperimentConfig, ScaledGeometryKeepsDensity) {
  const auto base = test::geometry(10, 2, 100.0);
  const auto g = scaled_geometry(base, 3.0);
  EXPECT_EQ(g.d_pairs, 30u);
  EXPECT_NEAR(g.d_pairs / (g.area_side * g.area_side), base.d_pairs / (base.area_side * base.area_side), 1e-15);
  EXPECT_EQ(scaled_geometry(base, 1.0), base);
}

TEST(ExperimentConfig, JsonRoundTripAndHash) {
  ExperimentConfig c = small_config();
  c.model.aggregation = Aggregation::kSum;
  c.model.floor = FloorRule::below_minimum(30.0);
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  ExperimentConfig d = c;
  d.seed += 1;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(ExperimentConfig, PartialJsonOverridesPreset) {
  const auto c = config_from_json({{"preset", "paper-scale"}, {"train", {{"epochs", 5}}}, {"geometry", {{"d_pairs", 12}}}});
  EXPECT_EQ(c.train_size, 10000u);
  EXPECT_EQ(c.train.epochs, 5u);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.geometry.d_pairs, 12u);
  EXPECT_EQ(c.geometry.area_side, ExperimentConfig::paper_scale().geometry.area_side);
}

TEST(ExperimentConfig, InvalidJsonIsRejected) {
  EXPECT_THROW(config_from_json({{"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json({{"preset", "huge"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"solvers", {"magic"}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"timing", {{"reps", 2}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"robustness", {{"fractions", {0.5, 2.0}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"geometry", {{"d_pairs", "ten"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST(Results, CsvRoundTrip) {
  test::TempDir dir("res");
  ResultRow a;
  a.experiment = "eval";
  a.solver = "jcpgnn";
  a.d_pairs = 10;
  a.m_channels = 2;
  a.mean_objective = 1.0 / 3.0;
  a.std_objective = 0.1;
  a.ratio = 0.9;
  a.mean_time_s = 1e-4;
  a.seed = 18446744073709551615ULL;
  a.config_hash = "0123456789abcdef";
  ResultRow b = a;
  b.solver = "exhaustive";
  b.status = "unavailable";
  b.mean_objective = b.std_objective = b.ratio = b.mean_time_s = std::nan("");
  append_results(dir / "r.csv", {a});
  append_results(dir / "r.csv", {b});
  const auto rows = read_results(dir / "r.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(to_csv_line(rows[0]), to_csv_line(a));
  EXPECT_EQ(rows[0].mean_objective, a.mean_objective);
  EXPECT_EQ(to_csv_line(rows[1]), to_csv_line(b));
  EXPECT_TRUE(std::isnan(rows[1].mean_objective));
  std::ifstream in(dir / "r.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kResultsHeader);
}

TEST(Results, BadFilesAreRejected) {
  test::TempDir dir("res");
  std::ofstream(dir / "h.csv") << "a,b\n";
  EXPECT_THROW(read_results(dir / "h.csv"), ParseError);
  std::ofstream(dir / "c.csv") << kResultsHeader << "\neval,x,1\n";
  EXPECT_THROW(read_results(dir / "c.csv"), ParseError);
  std::ofstream(dir / "n.csv") << kResultsHeader << "\neval,x,1,2,0,abc,,,,1,h,ok\n";
  EXPECT_THROW(read_results(dir / "n.csv"), ParseError);
}

class Harness : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new ExperimentConfig(small_config());
    splits_ = new DatasetSplits(generate_splits(*cfg_));
    model_ = new JcpgnnParams(train(splits_->train, splits_->val, cfg_->train, cfg_->model).params);
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete splits_;
    delete model_;
  }
  static ExperimentConfig* cfg_;
  static DatasetSplits* splits_;
  static JcpgnnParams* model_;
};
ExperimentConfig* Harness::cfg_ = nullptr;
DatasetSplits* Harness::splits_ = nullptr;
JcpgnnParams* Harness::model_ = nullptr;

TEST_F(Harness, EvalRatioAgainstExhaustiveIsAtMostOne) {
  const auto rows = cmd_eval(splits_->test, {"exhaustive", "jcpgnn", "rr-gnn", "closest"}, model_, *cfg_);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].ratio, 1.0);
  for (const auto& r : rows) {
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_LE(r.ratio, 1.0);
    EXPECT_GT(r.mean_time_s, 0.0);
    EXPECT_EQ(r.d_pairs, 3u);
    EXPECT_EQ(r.config_hash, config_hash(*cfg_));
    EXPECT_EQ(r.seed, splits_->test.master_seed);
    EXPECT_EQ(r.status, "ok");
  }
}

TEST_F(Harness, EvalIsReproducible) {
  const auto a = cmd_eval(splits_->test, {"random", "jcpgnn-soft"}, model_, *cfg_);
  const auto b = cmd_eval(splits_->test, {"random", "jcpgnn-soft"}, model_, *cfg_);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].mean_objective, b[k].mean_objective);
    EXPECT_EQ(a[k].std_objective, b[k].std_objective);
  }
  EXPECT_TRUE(std::isnan(a[0].ratio));
}

TEST_F(Harness, EvalPreconditions) {
  EXPECT_THROW(cmd_eval(splits_->test, {}, model_, *cfg_), ConfigError);
  EXPECT_THROW(cmd_eval(splits_->test, {"jcpgnn"}, nullptr, *cfg_), ConfigError);
  EXPECT_NO_THROW(cmd_eval(splits_->test, {"random"}, nullptr, *cfg_));
  const Dataset three = generate_dataset(test::geometry(3, 3, 55.0), FadingConfig{}, 2, 1);
  EXPECT_THROW(cmd_eval(three, {"jcpgnn"}, model_, *cfg_), ConfigError);
}

TEST_F(Harness, RobustnessIsNormalizedByTheCleanRun) {
  const Dataset ds = generate_dataset(test::geometry(4, 2, 63.0), FadingConfig{}, 8, 5);
  const auto rows = cmd_robustness(ds, *model_, {0.0, 0.25, 0.5}, *cfg_);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].ratio, 1.0);
  for (const auto& r : rows) {
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_LE(r.ratio, 1.05);
    EXPECT_EQ(r.experiment, "robustness");
  }
  EXPECT_EQ(rows[1].param, 0.25);
}

TEST_F(Harness, GeneralizeScalesTheNetwork) {
  const auto rows = cmd_generalize(*model_, {1.0, 2.0}, *cfg_);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].d_pairs, 3u);
  EXPECT_EQ(rows[4].d_pairs, 6u);
  for (const auto& r : rows) {
    if (r.solver == "closest") {
      EXPECT_EQ(r.ratio, 1.0);
    }
  }
}

TEST_F(Harness, BenchReportsMedianTimes) {
  const auto rows = cmd_bench_time(splits_->test, {"jcpgnn", "closest", "exhaustive"}, model_, 3, *cfg_);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_GT(r.mean_time_s, 0.0);
    EXPECT_EQ(r.status, "ok");
  }
  EXPECT_EQ(rows[0].ratio, 1.0);
  EXPECT_THROW(cmd_bench_time(splits_->test, {"closest"}, nullptr, 2, *cfg_), ConfigError);
}

TEST_F(Harness, BenchMarksGuardedExhaustiveUnavailable) {
  ExperimentConfig c = *cfg_;
  c.exhaustive_guard = 4;
  const auto rows = cmd_bench_time(splits_->test, {"exhaustive", "closest"}, nullptr, 3, c);
  EXPECT_EQ(rows[0].status, "unavailable");
  EXPECT_TRUE(std::isnan(rows[0].mean_time_s));
  EXPECT_EQ(rows[1].status, "ok");
}

TEST_F(Harness, ReportWritesOneSummaryEntryPerExperimentAndSolver) {
  test::TempDir dir("report");
  std::vector<ResultRow> rows = cmd_eval(splits_->test, {"closest", "random"}, nullptr, *cfg_);
  const auto more = cmd_eval(splits_->test, {"closest"}, nullptr, *cfg_, "baseline");
  rows.insert(rows.end(), more.begin(), more.end());
  const auto rob = cmd_robustness(splits_->test, *model_, {0.0, 0.5}, *cfg_);
  rows.insert(rows.end(), rob.begin(), rob.end());
  const auto files = cmd_report(rows, dir.path());
  EXPECT_EQ(files.size(), 5u);
  std::ifstream in(dir / "summary.json");
  const auto summary = nlohmann::json::parse(in);
  ASSERT_EQ(summary.size(), 4u);
  EXPECT_EQ(summary[3]["experiment"], "robustness");
  EXPECT_EQ(summary[3]["rows"], 2);
  EXPECT_EQ(summary[0]["mean_objective"].get<double>(), rows[0].mean_objective);
  std::ifstream fig5(dir / "fig5.csv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(fig5, line)) ++n;
  EXPECT_EQ(n, 3u);
}

TEST(Commands, TrainTwiceGivesIdenticalCheckpoints) {
  test::TempDir a("train"), b("train");
  const auto cfg = small_config();
  const auto s = generate_splits(cfg);
  cmd_train(s.train, s.val, cfg, a.path());
  cmd_train(s.train, s.val, cfg, b.path());
  for (const char* name : {"checkpoint.json", "history.csv"}) {
    std::ifstream fa(a / name), fb(b / name);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_FALSE(sa.str().empty());
    EXPECT_EQ(sa.str(), sb.str()) << name;
  }
}

TEST(Commands, GenerateDeskPreset) {
  test::TempDir dir("gen");
  const auto paths = cmd_generate(ExperimentConfig::desk(), dir.path(), true);
  const Dataset train_ds = load_dataset(paths[0]);
  const Dataset test_ds = load_dataset(paths[2]);
  EXPECT_EQ(train_ds.size(), 2000u);
  EXPECT_EQ(test_ds.size(), 500u);
  EXPECT_EQ(test_ds.geometry.d_pairs, 10u);
  EXPECT_EQ(test_ds.geometry.m_channels, 2u);
  EXPECT_NE(train_ds.master_seed, test_ds.master_seed);
}

}  // namespace
}  // namespace jcpa
