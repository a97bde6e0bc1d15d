#pragma once

// Experiment orchestration: configuration presets, solver dispatch, and the
// eval / robustness / generalization / timing / report commands. Every
// command returns ResultRows; results.csv is their append-only log.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jcpa/baselines.hpp"
#include "jcpa/checkpoint.hpp"
#include "jcpa/dataset_io.hpp"
#include "jcpa/jcpgnn.hpp"
#include "jcpa/metrics.hpp"
#include "jcpa/network.hpp"

namespace jcpa {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> names = {"exhaustive", "jcpgnn", "jcpgnn-soft", "rr-gnn",
                                                 "rr-wmmse",   "closest", "random"};
  return names;
}

inline bool needs_model(const std::string& solver) {
  return solver == "jcpgnn" || solver == "jcpgnn-soft" || solver == "rr-gnn";
}

struct ExperimentConfig {
  std::string preset = "desk";
  std::uint64_t seed = 2024;
  GeometryConfig geometry;
  FadingConfig fading;
  std::size_t train_size = 2000;
  std::size_t val_size = 200;
  std::size_t test_size = 500;
  ModelOptions model;
  TrainConfig train;
  WmmseConfig wmmse;
  std::uint64_t exhaustive_guard = kDefaultExhaustiveGuard;
  std::vector<std::string> solvers = known_solvers();

  std::size_t robustness_pairs = 20;  // at the training density
  std::size_t robustness_size = 200;
  std::vector<double> fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

  std::vector<double> scale_factors = {1.0, 2.0, 3.0, 5.0};
  std::size_t generalize_size = 100;

  std::vector<std::size_t> timing_pairs = {15, 50};
  std::size_t timing_instances = 3;
  std::size_t timing_reps = 3;
  std::vector<std::string> timing_solvers = {"exhaustive", "jcpgnn", "closest"};

  static ExperimentConfig desk() {
    ExperimentConfig c;
    c.train.epochs = 60;
    return c;
  }

  static ExperimentConfig paper_scale() {
    ExperimentConfig c = desk();
    c.preset = "paper-scale";
    c.geometry.d_pairs = 15;
    c.geometry.area_side = 100.0 * std::sqrt(1.5);
    c.train_size = 10000;
    c.val_size = 1000;
    c.test_size = 1000;
    c.scale_factors = {1.0, 2.0, 10.0 / 3.0, 16.0 / 3.0};
    return c;
  }

  // Independent seed streams, all derived from `seed`.
  std::uint64_t train_seed() const { return derive_seed(seed, 1); }
  std::uint64_t val_seed() const { return derive_seed(seed, 2); }
  std::uint64_t test_seed() const { return derive_seed(seed, 3); }
  std::uint64_t robustness_seed() const { return derive_seed(seed, 4); }
  std::uint64_t generalize_seed() const { return derive_seed(seed, 5); }
  std::uint64_t timing_seed() const { return derive_seed(seed, 6); }
  std::uint64_t solver_seed() const { return derive_seed(seed, 7); }
  std::uint64_t corruption_seed() const { return derive_seed(seed, 8); }

  void validate() const {
    geometry.validate();
    fading.validate();
    wmmse.validate();
    if (train_size < 1 || test_size < 1) throw ConfigError("config: train_size and test_size must be >= 1");
    if (train.epochs < 1 || train.batch_size < 1) throw ConfigError("config: epochs and batch_size must be >= 1");
    if (model.s_layers < 1) throw ConfigError("config: S must be >= 1");
    for (const auto* list : {&solvers, &timing_solvers}) {
      for (const auto& s : *list) {
        if (std::find(known_solvers().begin(), known_solvers().end(), s) == known_solvers().end()) {
          throw ConfigError("config: unknown solver '" + s + "'");
        }
      }
    }
    for (double f : fractions) {
      if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("config: corruption fractions must lie in [0, 1]");
    }
    for (double k : scale_factors) {
      if (!(k > 0.0)) throw ConfigError("config: scale factors must be > 0");
    }
    if (timing_reps < 3) throw ConfigError("config: timing_reps must be >= 3");
    if (timing_instances < 1) throw ConfigError("config: timing_instances must be >= 1");
  }
};

namespace detail {

inline nlohmann::json model_to_json(const ModelOptions& m) {
  return {{"S", m.s_layers},
          {"message_source", enum_name(m.message_source, kSourceNames)},
          {"channel_encoding", enum_name(m.channel_encoding, kEncodingNames)},
          {"aggregation", enum_name(m.aggregation, kAggregationNames)},
          {"transform", m.transform == FeatureTransform::Kind::kDecibel ? "db" : "identity"},
          {"floor_rule", m.floor.kind == FloorRule::Kind::kBelowMinimum ? "below_minimum" : "interference_sigma"},
          {"floor_value", m.floor.value}};
}

inline void model_from_json(const nlohmann::json& j, ModelOptions& m) {
  m.s_layers = j.value("S", m.s_layers);
  if (j.contains("message_source")) {
    m.message_source = enum_from(j.at("message_source").get<std::string>(), kSourceNames, "message_source");
  }
  if (j.contains("channel_encoding")) {
    m.channel_encoding = enum_from(j.at("channel_encoding").get<std::string>(), kEncodingNames, "channel_encoding");
  }
  if (j.contains("aggregation")) {
    m.aggregation = enum_from(j.at("aggregation").get<std::string>(), kAggregationNames, "aggregation");
  }
  if (j.contains("transform")) {
    const auto t = j.at("transform").get<std::string>();
    if (t != "db" && t != "identity") throw ConfigError("config: unknown transform '" + t + "'");
    m.transform = t == "db" ? FeatureTransform::Kind::kDecibel : FeatureTransform::Kind::kIdentity;
  }
  if (j.contains("floor_rule")) {
    const auto r = j.at("floor_rule").get<std::string>();
    if (r != "below_minimum" && r != "interference_sigma") throw ConfigError("config: unknown floor_rule '" + r + "'");
    m.floor.kind = r == "below_minimum" ? FloorRule::Kind::kBelowMinimum : FloorRule::Kind::kInterferenceSigma;
  }
  m.floor.value = j.value("floor_value", m.floor.value);
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json train = train_config_to_json(c.train);
  train.erase("seed");  // derived from the master seed
  return {{"preset", c.preset},
          {"seed", c.seed},
          {"geometry", c.geometry},
          {"fading", c.fading},
          {"train_size", c.train_size},
          {"val_size", c.val_size},
          {"test_size", c.test_size},
          {"model", detail::model_to_json(c.model)},
          {"train", train},
          {"wmmse", {{"max_iters", c.wmmse.max_iters}, {"tol", c.wmmse.tol}}},
          {"exhaustive_guard", c.exhaustive_guard},
          {"solvers", c.solvers},
          {"robustness", {{"pairs", c.robustness_pairs}, {"size", c.robustness_size}, {"fractions", c.fractions}}},
          {"generalize", {{"factors", c.scale_factors}, {"size", c.generalize_size}}},
          {"timing",
           {{"pairs", c.timing_pairs},
            {"instances", c.timing_instances},
            {"reps", c.timing_reps},
            {"solvers", c.timing_solvers}}}};
}

/// Starts from the preset named in `j` (desk if absent) and overrides every
/// field present. Unknown top-level keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys = {
      "preset",     "seed",  "geometry", "fading",  "train_size", "val_size",   "test_size", "model",
      "train",      "wmmse", "exhaustive_guard",    "solvers",    "robustness", "generalize", "timing"};
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("config: unknown key '" + k + "'");
  }
  try {
    const auto preset = j.value("preset", std::string("desk"));
    ExperimentConfig c;
    if (preset == "desk") {
      c = ExperimentConfig::desk();
    } else if (preset == "paper-scale") {
      c = ExperimentConfig::paper_scale();
    } else {
      throw ConfigError("config: unknown preset '" + preset + "'");
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("geometry")) {
      nlohmann::json g = c.geometry;
      g.update(j.at("geometry"));
      c.geometry = g.get<GeometryConfig>();
    }
    if (j.contains("fading")) {
      nlohmann::json f = c.fading;
      f.update(j.at("fading"));
      c.fading = f.get<FadingConfig>();
    }
    c.train_size = j.value("train_size", c.train_size);
    c.val_size = j.value("val_size", c.val_size);
    c.test_size = j.value("test_size", c.test_size);
    if (j.contains("model")) detail::model_from_json(j.at("model"), c.model);
    if (j.contains("train")) {
      nlohmann::json t = train_config_to_json(c.train);
      t.update(j.at("train"));
      c.train = train_config_from_json(t);
    }
    if (j.contains("wmmse")) {
      c.wmmse.max_iters = j.at("wmmse").value("max_iters", c.wmmse.max_iters);
      c.wmmse.tol = j.at("wmmse").value("tol", c.wmmse.tol);
    }
    c.exhaustive_guard = j.value("exhaustive_guard", c.exhaustive_guard);
    c.solvers = j.value("solvers", c.solvers);
    if (j.contains("robustness")) {
      const auto& r = j.at("robustness");
      c.robustness_pairs = r.value("pairs", c.robustness_pairs);
      c.robustness_size = r.value("size", c.robustness_size);
      c.fractions = r.value("fractions", c.fractions);
    }
    if (j.contains("generalize")) {
      const auto& g = j.at("generalize");
      c.scale_factors = g.value("factors", c.scale_factors);
      c.generalize_size = g.value("size", c.generalize_size);
    }
    if (j.contains("timing")) {
      const auto& t = j.at("timing");
      c.timing_pairs = t.value("pairs", c.timing_pairs);
      c.timing_instances = t.value("instances", c.timing_instances);
      c.timing_reps = t.value("reps", c.timing_reps);
      c.timing_solvers = t.value("solvers", c.timing_solvers);
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw ConfigError(what.rfind("config:", 0) == 0 ? what : "config: " + what);
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a (64-bit) of the canonical config JSON, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Same density as `base`, with D scaled by k (rounded) and the side by sqrt(D'/D).
inline GeometryConfig scaled_geometry(const GeometryConfig& base, double k) {
  GeometryConfig g = base;
  g.d_pairs = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(base.d_pairs) * k)));
  g.area_side = base.area_side * std::sqrt(static_cast<double>(g.d_pairs) / static_cast<double>(base.d_pairs));
  return g;
}

// ---- datasets ---------------------------------------------------------------

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

inline DatasetSplits generate_splits(const ExperimentConfig& c) {
  return {generate_dataset(c.geometry, c.fading, c.train_size, c.train_seed()),
          generate_dataset(c.geometry, c.fading, c.val_size, c.val_seed()),
          generate_dataset(c.geometry, c.fading, c.test_size, c.test_seed())};
}

/// Copy of `inst` with exactly round(fraction * D(D-1)M) off-diagonal gains,
/// sampled uniformly without replacement, set to zero.
inline NetworkInstance corrupt_csi(const NetworkInstance& inst, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("corrupt_csi: fraction must lie in [0, 1]");
  const std::size_t d = inst.d_pairs;
  const std::size_t m = inst.m_channels;
  std::vector<std::size_t> cells;
  cells.reserve(d * (d - 1) * m);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t t = 0; t < d; ++t) {
      if (r == t) continue;
      for (std::size_t c = 0; c < m; ++c) cells.push_back((r * d + t) * m + c);
    }
  }
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cells.size())));
  NetworkInstance out = inst;
  Rng rng(seed);
  rng.shuffle(cells);
  for (std::size_t k = 0; k < count; ++k) out.gains.data()[cells[k]] = 0.0;
  return out;
}

// ---- results ----------------------------------------------------------------

struct ResultRow {
  std::string experiment;
  std::string solver;
  std::size_t d_pairs = 0;
  std::size_t m_channels = 0;
  double param = 0.0;  // corruption fraction, scale factor, ...
  double mean_objective = std::numeric_limits<double>::quiet_NaN();
  double std_objective = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double mean_time_s = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string status = "ok";
};

inline constexpr const char* kResultsHeader =
    "experiment,solver,D,M,param,mean_objective,std_objective,ratio,mean_time_s,seed,config_hash,status";

/// Index of the timing column, excluded when comparing runs.
inline constexpr std::size_t kTimeColumn = 8;

namespace detail {

inline std::string number(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double x = std::stod(s, &used);
  if (used != s.size()) throw ParseError("results: bad number '" + s + "'");
  return x;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline std::string to_csv_line(const ResultRow& r) {
  std::ostringstream o;
  o << r.experiment << ',' << r.solver << ',' << r.d_pairs << ',' << r.m_channels << ',' << detail::number(r.param)
    << ',' << detail::number(r.mean_objective) << ',' << detail::number(r.std_objective) << ','
    << detail::number(r.ratio) << ',' << detail::number(r.mean_time_s) << ',' << r.seed << ',' << r.config_hash
    << ',' << r.status;
  return o.str();
}

inline void append_results(const std::string& path, const std::vector<ResultRow>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  if (fresh) out << kResultsHeader << '\n';
  for (const auto& r : rows) out << to_csv_line(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<ResultRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ParseError("results: missing or unexpected header in " + path);
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 12) throw ParseError("results: line " + std::to_string(lineno) + ": expected 12 columns");
    try {
      ResultRow r;
      r.experiment = f[0];
      r.solver = f[1];
      r.d_pairs = std::stoul(f[2]);
      r.m_channels = std::stoul(f[3]);
      r.param = detail::parse_number(f[4]);
      r.mean_objective = detail::parse_number(f[5]);
      r.std_objective = detail::parse_number(f[6]);
      r.ratio = detail::parse_number(f[7]);
      r.mean_time_s = detail::parse_number(f[8]);
      r.seed = std::stoull(f[9]);
      r.config_hash = f[10];
      r.status = f[11];
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw ParseError("results: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

// ---- solvers ----------------------------------------------------------------

struct SolverContext {
  const ExperimentConfig* config = nullptr;
  const JcpgnnParams* model = nullptr;  // required by the GNN solvers
};

/// Allocation of `solver` on the k-th instance. `input` is what the solver
/// observes (possibly corrupted CSI); rates are always scored on `truth`.
inline Allocation solve(const std::string& solver, const NetworkInstance& truth, const NetworkInstance& input,
                        std::size_t k, const SolverContext& ctx) {
  const ExperimentConfig& cfg = *ctx.config;
  if (needs_model(solver)) {
    if (ctx.model == nullptr) throw ConfigError("solver '" + solver + "' needs a checkpoint");
    const HeteroGraph g = build_graph(input, ctx.model->meta.transform);
    if (solver == "jcpgnn") return forward(g, *ctx.model, OutputMode::kHard);
    if (solver == "jcpgnn-soft") return forward(g, *ctx.model, OutputMode::kSoft);
    return forward_fixed_channel(g, *ctx.model, round_robin(input.d_pairs, input.m_channels));
  }
  if (solver == "exhaustive") return exhaustive(input, cfg.wmmse, cfg.exhaustive_guard);
  if (solver == "rr-wmmse") {
    return allocation_with_wmmse(input, assignment_of(round_robin(input.d_pairs, input.m_channels)), cfg.wmmse);
  }
  if (solver == "closest") {
    return allocation_with_wmmse(input, assignment_of(closest_split(input, input.m_channels)), cfg.wmmse);
  }
  if (solver == "random") {
    return random_alloc(input.d_pairs, input.m_channels, input.p_max, derive_seed(cfg.solver_seed(), k));
  }
  (void)truth;
  throw ConfigError("unknown solver '" + solver + "'");
}

struct Scores {
  std::vector<double> objective;
  double total_time_s = 0.0;
  bool available = true;

  double mean() const {
    double s = 0.0;
    for (double x : objective) s += x;
    return objective.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(objective.size());
  }
  double stddev() const {
    if (objective.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean();
    double s = 0.0;
    for (double x : objective) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(objective.size()));
  }
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs `solver` on every instance in order; `inputs` defaults to the truth.
inline Scores score_solver(const std::string& solver, const std::vector<NetworkInstance>& truth,
                           const SolverContext& ctx, const std::vector<NetworkInstance>* inputs = nullptr) {
  Scores s;
  s.objective.reserve(truth.size());
  if (solver == "exhaustive" && !truth.empty() &&
      assignment_count(truth.front().d_pairs, truth.front().m_channels) > ctx.config->exhaustive_guard) {
    s.available = false;
    return s;
  }
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const NetworkInstance& in = inputs != nullptr ? (*inputs)[k] : truth[k];
    const auto t0 = std::chrono::steady_clock::now();
    const Allocation a = solve(solver, truth[k], in, k, ctx);
    s.total_time_s += seconds_since(t0);
    s.objective.push_back(objective(truth[k], a));
  }
  return s;
}

inline ResultRow make_row(const std::string& experiment, const std::string& solver, const Dataset& ds,
                          double param, const Scores& s, const ExperimentConfig& cfg) {
  ResultRow r;
  r.experiment = experiment;
  r.solver = solver;
  r.d_pairs = ds.geometry.d_pairs;
  r.m_channels = ds.geometry.m_channels;
  r.param = param;
  r.seed = ds.master_seed;
  r.config_hash = config_hash(cfg);
  if (!s.available) {
    r.status = "unavailable";
    return r;
  }
  r.mean_objective = s.mean();
  r.std_objective = s.stddev();
  if (!s.objective.empty()) r.mean_time_s = s.total_time_s / static_cast<double>(s.objective.size());
  return r;
}

inline void check_model_matches(const JcpgnnParams* model, const Dataset& ds, const std::vector<std::string>& solvers) {
  const bool wanted = std::any_of(solvers.begin(), solvers.end(), needs_model);
  if (!wanted) return;
  if (model == nullptr) throw ConfigError("a checkpoint is required for solvers jcpgnn, jcpgnn-soft and rr-gnn");
  if (model->meta.m_channels != ds.geometry.m_channels) {
    throw ConfigError("checkpoint has M=" + std::to_string(model->meta.m_channels) + " but dataset has M=" +
                      std::to_string(ds.geometry.m_channels));
  }
}

// ---- commands ---------------------------------------------------------------

/// Mean/std objective per solver on one test set. `ratio` is relative to the
/// exhaustive optimum when it was evaluated.
inline std::vector<ResultRow> cmd_eval(const Dataset& test, const std::vector<std::string>& solvers,
                                       const JcpgnnParams* model, const ExperimentConfig& cfg,
                                       const std::string& experiment = "eval") {
  if (solvers.empty()) throw ConfigError("eval: solver list is empty");
  if (test.instances.empty()) throw ConfigError("eval: test set is empty");
  check_model_matches(model, test, solvers);
  const SolverContext ctx{&cfg, model};
  std::vector<ResultRow> rows;
  std::optional<double> reference;
  for (const auto& solver : solvers) {
    const Scores s = score_solver(solver, test.instances, ctx);
    rows.push_back(make_row(experiment, solver, test, 0.0, s, cfg));
    if (solver == "exhaustive" && s.available) reference = s.mean();
  }
  if (reference) {
    for (auto& r : rows) r.ratio = r.mean_objective / *reference;
  }
  return rows;
}

/// JCPGNN on corrupted inputs, normalized by its own uncorrupted objective on
/// the same instances. Corruption masks are nested across fractions.
inline std::vector<ResultRow> cmd_robustness(const Dataset& test, const JcpgnnParams& model,
                                             const std::vector<double>& fractions, const ExperimentConfig& cfg) {
  check_model_matches(&model, test, {"jcpgnn"});
  const SolverContext ctx{&cfg, &model};
  const Scores clean = score_solver("jcpgnn", test.instances, ctx);
  std::vector<ResultRow> rows;
  for (double f : fractions) {
    std::vector<NetworkInstance> inputs;
    inputs.reserve(test.size());
    for (std::size_t k = 0; k < test.size(); ++k) {
      inputs.push_back(corrupt_csi(test.instances[k], f, derive_seed(cfg.corruption_seed(), k)));
    }
    const Scores s = f == 0.0 ? clean : score_solver("jcpgnn", test.instances, ctx, &inputs);
    ResultRow r = make_row("robustness", "jcpgnn", test, f, s, cfg);
    r.ratio = f == 0.0 ? 1.0 : r.mean_objective / clean.mean();
    rows.push_back(r);
  }
  return rows;
}

inline const std::vector<std::string>& generalize_solvers() {
  static const std::vector<std::string> s = {"jcpgnn", "rr-gnn", "rr-wmmse", "closest"};
  return s;
}

/// Fresh test sets at D*k pairs and fixed density for every factor k; `ratio`
/// is relative to Closest on the same instances.
inline std::vector<ResultRow> cmd_generalize(const JcpgnnParams& model, const std::vector<double>& factors,
                                             const ExperimentConfig& cfg) {
  const SolverContext ctx{&cfg, &model};
  std::vector<ResultRow> rows;
  for (std::size_t idx = 0; idx < factors.size(); ++idx) {
    const GeometryConfig g = scaled_geometry(cfg.geometry, factors[idx]);
    const Dataset ds = generate_dataset(g, cfg.fading, cfg.generalize_size, derive_seed(cfg.generalize_seed(), idx));
    check_model_matches(&model, ds, generalize_solvers());
    std::vector<ResultRow> block;
    double closest = std::numeric_limits<double>::quiet_NaN();
    for (const auto& solver : generalize_solvers()) {
      const Scores s = score_solver(solver, ds.instances, ctx);
      block.push_back(make_row("generalize", solver, ds, factors[idx], s, cfg));
      if (solver == "closest") closest = s.mean();
    }
    for (auto& r : block) r.ratio = r.mean_objective / closest;
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

/// Median over `reps` passes of the mean per-instance wall time, after one
/// untimed warm-up call per solver. `ratio` is time relative to jcpgnn.
inline std::vector<ResultRow> cmd_bench_time(const Dataset& test, const std::vector<std::string>& solvers,
                                             const JcpgnnParams* model, std::size_t reps,
                                             const ExperimentConfig& cfg) {
  if (reps < 3) throw ConfigError("bench: reps must be >= 3");
  if (test.instances.empty()) throw ConfigError("bench: test set is empty");
  check_model_matches(model, test, solvers);
  const SolverContext ctx{&cfg, model};
  std::vector<ResultRow> rows;
  std::optional<double> gnn_time;
  for (const auto& solver : solvers) {
    Scores s;
    if (solver == "exhaustive" && assignment_count(test.geometry.d_pairs, test.geometry.m_channels) > cfg.exhaustive_guard) {
      s.available = false;
      rows.push_back(make_row("bench", solver, test, static_cast<double>(reps), s, cfg));
      continue;
    }
    (void)solve(solver, test.instances[0], test.instances[0], 0, ctx);
    std::vector<double> per_rep;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      s = score_solver(solver, test.instances, ctx);
      per_rep.push_back(s.total_time_s / static_cast<double>(test.size()));
    }
    std::sort(per_rep.begin(), per_rep.end());
    ResultRow r = make_row("bench", solver, test, static_cast<double>(reps), s, cfg);
    r.mean_time_s = per_rep[per_rep.size() / 2];
    if (solver == "jcpgnn") gnn_time = r.mean_time_s;
    rows.push_back(r);
  }
  if (gnn_time) {
    for (auto& r : rows) r.ratio = r.mean_time_s / *gnn_time;
  }
  return rows;
}

struct TrainOutput {
  TrainResult result;
  std::string checkpoint_path;
  std::string history_path;
};

inline void write_history(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,train_loss,val_objective\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << detail::number(h.train_loss) << ',' << detail::number(h.val_objective) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TrainOutput cmd_train(const Dataset& train_ds, const Dataset& val_ds, const ExperimentConfig& cfg,
                             const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 9);
  ModelOptions mo = cfg.model;
  mo.init_seed = derive_seed(cfg.seed, 10);
  TrainOutput out{train(train_ds, val_ds, tc, mo), (out_dir / "checkpoint.json").string(),
                  (out_dir / "history.csv").string()};
  save_checkpoint(out.result.params, out.checkpoint_path);
  write_history(out.result.history, out.history_path);
  return out;
}

/// Writes train/val/test splits as JSON Lines (gzip when `gzip`).
inline std::vector<std::string> cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                             bool gzip = false) {
  std::filesystem::create_directories(out_dir);
  const DatasetSplits s = generate_splits(cfg);
  const std::string ext = gzip ? ".jsonl.gz" : ".jsonl";
  std::vector<std::string> paths = {(out_dir / ("train" + ext)).string(), (out_dir / ("val" + ext)).string(),
                                    (out_dir / ("test" + ext)).string()};
  save_dataset(s.train, paths[0]);
  save_dataset(s.val, paths[1]);
  save_dataset(s.test, paths[2]);
  return paths;
}

// ---- report -----------------------------------------------------------------

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline nlohmann::json json_number(double x) { return std::isnan(x) ? nlohmann::json() : nlohmann::json(x); }

}  // namespace detail

/// summary.json (one entry per experiment and solver, with every row as a
/// point) and per-figure CSVs: fig3 (eval), fig5 (robustness), fig6 (bench),
/// table1 (generalize).
inline std::vector<std::string> cmd_report(const std::vector<ResultRow>& rows, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.experiment, r.solver);
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& key : order) {
    const auto& g = groups[key];
    double sum = 0.0;
    std::size_t n = 0;
    nlohmann::json points = nlohmann::json::array();
    for (const ResultRow* r : g) {
      if (!std::isnan(r->mean_objective)) {
        sum += r->mean_objective;
        ++n;
      }
      points.push_back({{"D", r->d_pairs},
                        {"M", r->m_channels},
                        {"param", detail::json_number(r->param)},
                        {"mean_objective", detail::json_number(r->mean_objective)},
                        {"std_objective", detail::json_number(r->std_objective)},
                        {"ratio", detail::json_number(r->ratio)},
                        {"mean_time_s", detail::json_number(r->mean_time_s)},
                        {"status", r->status}});
    }
    summary.push_back({{"experiment", key.first},
                       {"solver", key.second},
                       {"rows", g.size()},
                       {"mean_objective", detail::json_number(n > 0 ? sum / static_cast<double>(n)
                                                                    : std::numeric_limits<double>::quiet_NaN())},
                       {"points", points}});
  }

  std::ostringstream fig3, fig5, fig6, table1;
  fig3 << "solver,D,M,mean_objective,std_objective,ratio_to_exhaustive\n";
  fig5 << "fraction,D,M,mean_objective,normalized\n";
  fig6 << "solver,D,M,median_time_s,ratio_to_jcpgnn,status\n";
  table1 << "factor,D,M,solver,mean_objective,ratio_to_closest\n";
  using detail::number;
  for (const auto& r : rows) {
    if (r.experiment == "eval" || r.experiment == "baseline") {
      fig3 << r.solver << ',' << r.d_pairs << ',' << r.m_channels << ',' << number(r.mean_objective) << ','
           << number(r.std_objective) << ',' << number(r.ratio) << '\n';
    } else if (r.experiment == "robustness") {
      fig5 << number(r.param) << ',' << r.d_pairs << ',' << r.m_channels << ',' << number(r.mean_objective) << ','
           << number(r.ratio) << '\n';
    } else if (r.experiment == "bench") {
      fig6 << r.solver << ',' << r.d_pairs << ',' << r.m_channels << ',' << number(r.mean_time_s) << ','
           << number(r.ratio) << ',' << r.status << '\n';
    } else if (r.experiment == "generalize") {
      table1 << number(r.param) << ',' << r.d_pairs << ',' << r.m_channels << ',' << r.solver << ','
             << number(r.mean_objective) << ',' << number(r.ratio) << '\n';
    }
  }
  const std::vector<std::pair<std::string, std::string>> files = {{"summary.json", summary.dump(1) + "\n"},
                                                                  {"fig3.csv", fig3.str()},
                                                                  {"fig5.csv", fig5.str()},
                                                                  {"fig6.csv", fig6.str()},
                                                                  {"table1.csv", table1.str()}};
  std::vector<std::string> written;
  for (const auto& [name, text] : files) {
    detail::write_text(out_dir / name, text);
    written.push_back((out_dir / name).string());
  }
  return written;
}

}  // namespace jcpa
