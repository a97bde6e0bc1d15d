#pragma once

// Command-line front end. run_cli never throws: failures are reported as one
// JSON line {"error": kind, "message": ...} on `err` with a nonzero status.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jcpa/experiment.hpp"

namespace jcpa {

namespace cli_detail {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string checkpoint;
  std::string dataset;
  std::string solvers;
  std::string results;
  bool desk = false;
  bool paper_scale = false;
  bool gzip = false;
};

inline ExperimentConfig resolve_config(const Flags& f) {
  const std::string preset = f.paper_scale ? "paper-scale" : "desk";
  ExperimentConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw std::runtime_error("cannot open for reading: " + f.config);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (j.is_object() && (f.desk || f.paper_scale || !j.contains("preset"))) j["preset"] = preset;
    c = config_from_json(j);
  } else {
    c = f.paper_scale ? ExperimentConfig::paper_scale() : ExperimentConfig::desk();
  }
  if (f.seed) c.seed = *f.seed;
  c.validate();
  return c;
}

inline std::vector<std::string> parse_solvers(const std::string& list, const std::vector<std::string>& fallback) {
  if (list.empty()) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (std::find(known_solvers().begin(), known_solvers().end(), item) == known_solvers().end()) {
      throw ConfigError("unknown solver '" + item + "'");
    }
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("solver list is empty");
  return out;
}

inline std::string split_path(const fs::path& dir, const std::string& name) {
  for (const char* ext : {".jsonl", ".jsonl.gz"}) {
    const fs::path p = dir / (name + ext);
    if (fs::exists(p)) return p.string();
  }
  throw std::runtime_error("dataset directory " + dir.string() + " has no " + name + ".jsonl");
}

/// --dataset names a file (used as the evaluation set) or a directory written
/// by `generate`; without it the split is regenerated from the config.
inline Dataset evaluation_set(const Flags& f, const ExperimentConfig& c) {
  if (f.dataset.empty()) return generate_dataset(c.geometry, c.fading, c.test_size, c.test_seed());
  if (fs::is_directory(f.dataset)) return load_dataset(split_path(f.dataset, "test"));
  return load_dataset(f.dataset);
}

inline std::optional<JcpgnnParams> model_if_needed(const Flags& f, const std::vector<std::string>& solvers) {
  if (std::none_of(solvers.begin(), solvers.end(), needs_model)) return std::nullopt;
  const std::string path = f.checkpoint.empty() ? (fs::path(f.out) / "checkpoint.json").string() : f.checkpoint;
  return load_checkpoint(path);
}

inline std::string results_path(const Flags& f) { return (fs::path(f.out) / "results.csv").string(); }

inline void emit(std::ostream& out, const std::vector<ResultRow>& rows, const std::string& path) {
  for (const auto& r : rows) out << to_csv_line(r) << '\n';
  out << "appended " << rows.size() << " rows to " << path << '\n';
}

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const GuardExceeded*>(&e)) return "guard";
  if (dynamic_cast<const TrainingDiverged*>(&e)) return "diverged";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "runtime";
}

inline void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Joint channel and power allocation: dataset generation, training, evaluation and benchmarks"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Experiment config (JSON)");
  app.add_option("--seed", f.seed, "Master seed (overrides the config)");
  app.add_option("--out", f.out, "Output directory")->capture_default_str();
  app.add_option("--checkpoint", f.checkpoint, "Model checkpoint (default <out>/checkpoint.json)");
  app.add_option("--dataset", f.dataset, "Dataset file or directory written by generate");
  app.add_option("--solvers", f.solvers, "Comma-separated solver list");
  auto* desk = app.add_flag("--desk", f.desk, "Desk-scale preset (default)");
  app.add_flag("--paper-scale", f.paper_scale, "Paper-scale preset")->excludes(desk);

  auto* generate = app.add_subcommand("generate", "Write train/val/test datasets");
  generate->add_flag("--gzip", f.gzip, "Gzip-compress the datasets");
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint.json and history.csv");
  auto* eval = app.add_subcommand("eval", "Evaluate solvers on the test set");
  auto* baseline = app.add_subcommand("baseline", "Evaluate the classical baselines only");
  auto* robustness = app.add_subcommand("robustness", "JCPGNN under corrupted CSI");
  auto* generalize = app.add_subcommand("generalize", "JCPGNN on larger networks at fixed density");
  auto* bench = app.add_subcommand("bench", "Per-instance wall time");
  auto* report = app.add_subcommand("report", "Summaries and per-figure CSVs from results.csv");
  report->add_option("--results", f.results, "Results CSV (default <out>/results.csv)");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return 2;
  }

  try {
    const ExperimentConfig cfg = resolve_config(f);
    fs::create_directories(f.out);

    if (*generate) {
      for (const auto& p : cmd_generate(cfg, f.out, f.gzip)) out << "wrote " << p << '\n';
    } else if (*train_cmd) {
      Dataset train_ds, val_ds;
      if (f.dataset.empty()) {
        DatasetSplits s = generate_splits(cfg);
        train_ds = std::move(s.train);
        val_ds = std::move(s.val);
      } else {
        if (!fs::is_directory(f.dataset)) throw ConfigError("train: --dataset must be a directory written by generate");
        train_ds = load_dataset(split_path(f.dataset, "train"));
        val_ds = load_dataset(split_path(f.dataset, "val"));
      }
      const TrainOutput t = cmd_train(train_ds, val_ds, cfg, f.out);
      for (const auto& h : t.result.history) {
        out << "epoch " << h.epoch << " loss " << detail::number(h.train_loss) << " val " << detail::number(h.val_objective)
            << '\n';
      }
      out << "best epoch " << t.result.best_epoch << "\nwrote " << t.checkpoint_path << "\nwrote " << t.history_path << '\n';
    } else if (*eval || *baseline) {
      std::vector<std::string> fallback = cfg.solvers;
      if (*baseline) std::erase_if(fallback, needs_model);
      const auto solvers = parse_solvers(f.solvers, fallback);
      if (*baseline && std::any_of(solvers.begin(), solvers.end(), needs_model)) {
        throw ConfigError("baseline: learned solvers belong to eval");
      }
      const Dataset test = evaluation_set(f, cfg);
      const auto model = model_if_needed(f, solvers);
      const auto rows = cmd_eval(test, solvers, model ? &*model : nullptr, cfg, *eval ? "eval" : "baseline");
      append_results(results_path(f), rows);
      emit(out, rows, results_path(f));
    } else if (*robustness) {
      const JcpgnnParams model = *model_if_needed(f, {"jcpgnn"});
      const Dataset test =
          f.dataset.empty()
              ? generate_dataset(scaled_geometry(cfg.geometry, static_cast<double>(cfg.robustness_pairs) /
                                                                   static_cast<double>(cfg.geometry.d_pairs)),
                                 cfg.fading, cfg.robustness_size, cfg.robustness_seed())
              : evaluation_set(f, cfg);
      const auto rows = cmd_robustness(test, model, cfg.fractions, cfg);
      append_results(results_path(f), rows);
      emit(out, rows, results_path(f));
    } else if (*generalize) {
      const JcpgnnParams model = *model_if_needed(f, {"jcpgnn"});
      const auto rows = cmd_generalize(model, cfg.scale_factors, cfg);
      append_results(results_path(f), rows);
      emit(out, rows, results_path(f));
    } else if (*bench) {
      const auto solvers = parse_solvers(f.solvers, cfg.timing_solvers);
      const auto model = model_if_needed(f, solvers);
      std::vector<ResultRow> rows;
      if (!f.dataset.empty()) {
        rows = cmd_bench_time(evaluation_set(f, cfg), solvers, model ? &*model : nullptr, cfg.timing_reps, cfg);
      } else {
        for (std::size_t d : cfg.timing_pairs) {
          const GeometryConfig g =
              scaled_geometry(cfg.geometry, static_cast<double>(d) / static_cast<double>(cfg.geometry.d_pairs));
          const Dataset ds = generate_dataset(g, cfg.fading, cfg.timing_instances, derive_seed(cfg.timing_seed(), d));
          const auto part = cmd_bench_time(ds, solvers, model ? &*model : nullptr, cfg.timing_reps, cfg);
          rows.insert(rows.end(), part.begin(), part.end());
        }
      }
      append_results(results_path(f), rows);
      emit(out, rows, results_path(f));
    } else if (*report) {
      const std::string in = f.results.empty() ? results_path(f) : f.results;
      for (const auto& p : cmd_report(read_results(in), f.out)) out << "wrote " << p << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    report_error(err, error_kind(e), e.what());
    return 1;
  }
}

}  // namespace jcpa
