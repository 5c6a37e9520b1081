#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/checkpoint.hpp"
#include "rectflow/error.hpp"
#include "rectflow/metrics.hpp"
#include "rectflow/sampler.hpp"
#include "rectflow/table.hpp"
#include "rectflow/training.hpp"

namespace rectflow {

// Everything one training/ablation run needs, parsed from a single JSON
// file. The root seed is mandatory and fans out to every subsystem through
// domain-separated derivation, so one config line pins the whole pipeline.
struct RunConfig {
  uint64_t seed = 0;
  std::string data_csv;
  std::string data_schema;
  SplitSpec split;
  ModelConfig model;
  FlowConfig flow;
  TrainConfig train;
  SolverConfig solver;
  std::string out_checkpoint;
  std::string out_telemetry;    // empty = no telemetry file
  long sample_rows = 0;         // ablate: rows to generate; 0 = train-split size
  int mle_repeats = 20;
};

namespace detail {

inline void check_known_keys(const nlohmann::json& j,
                             const std::vector<std::string>& known,
                             const std::string& where) {
  for (const auto& [key, _] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(),
            ErrorKind::config, "config: unknown key \"" + key + "\" in " + where);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::config, "config: root must be an object");
  detail::check_known_keys(
      j, {"seed", "data", "split", "model", "flow", "train", "solver", "out", "eval"},
      "root");
  require(j.contains("seed") && j["seed"].is_number(), ErrorKind::config,
          "config: missing required field \"seed\"");

  RunConfig cfg;
  cfg.seed = j["seed"].get<uint64_t>();

  require(j.contains("data") && j["data"].is_object(), ErrorKind::config,
          "config: missing object field \"data\"");
  detail::check_known_keys(j["data"], {"csv", "schema"}, "data");
  cfg.data_csv = j["data"].value("csv", std::string());
  cfg.data_schema = j["data"].value("schema", std::string());
  require(!cfg.data_csv.empty() && !cfg.data_schema.empty(), ErrorKind::config,
          "config: data.csv and data.schema are required");

  if (j.contains("split")) {
    detail::check_known_keys(j["split"], {"train", "val", "test"}, "split");
    cfg.split.train = j["split"].value("train", cfg.split.train);
    cfg.split.val = j["split"].value("val", cfg.split.val);
    cfg.split.test = j["split"].value("test", cfg.split.test);
  }
  if (j.contains("model")) {
    detail::check_known_keys(j["model"], {"width_factor", "dropout", "temb_dim"},
                             "model");
    cfg.model.width_factor = j["model"].value("width_factor", cfg.model.width_factor);
    cfg.model.dropout_p = j["model"].value("dropout", cfg.model.dropout_p);
    cfg.model.temb_dim = j["model"].value("temb_dim", cfg.model.temb_dim);
  }
  if (j.contains("flow")) {
    nlohmann::json f = j["flow"];
    detail::check_known_keys(f, {"m", "s", "timestep_mode", "noise_mode"}, "flow");
    f["m"] = f.value("m", cfg.flow.m);
    f["s"] = f.value("s", cfg.flow.s);
    f["timestep_mode"] = f.value("timestep_mode",
                                 std::string(timestep_mode_name(cfg.flow.timestep_mode)));
    f["noise_mode"] = f.value("noise_mode",
                              std::string(noise_mode_name(cfg.flow.noise_mode)));
    cfg.flow = flow_config_from_json(f);
  }
  if (j.contains("train")) {
    detail::check_known_keys(
        j["train"],
        {"lr", "beta1", "beta2", "eps", "iterations", "batch_size", "log_interval"},
        "train");
    cfg.train.lr = j["train"].value("lr", cfg.train.lr);
    cfg.train.beta1 = j["train"].value("beta1", cfg.train.beta1);
    cfg.train.beta2 = j["train"].value("beta2", cfg.train.beta2);
    cfg.train.eps = j["train"].value("eps", cfg.train.eps);
    cfg.train.iterations = j["train"].value("iterations", cfg.train.iterations);
    cfg.train.batch_size = j["train"].value("batch_size", cfg.train.batch_size);
    cfg.train.log_interval = j["train"].value("log_interval", cfg.train.log_interval);
  }
  if (j.contains("solver")) {
    detail::check_known_keys(j["solver"], {"method", "steps", "rtol", "atol", "max_steps"},
                             "solver");
    cfg.solver.method = solver_method_from_name(
        j["solver"].value("method", std::string(solver_method_name(cfg.solver.method))));
    cfg.solver.steps = j["solver"].value("steps", cfg.solver.steps);
    cfg.solver.rtol = j["solver"].value("rtol", cfg.solver.rtol);
    cfg.solver.atol = j["solver"].value("atol", cfg.solver.atol);
    cfg.solver.max_steps = j["solver"].value("max_steps", cfg.solver.max_steps);
  }
  require(j.contains("out") && j["out"].is_object(), ErrorKind::config,
          "config: missing object field \"out\"");
  detail::check_known_keys(j["out"], {"checkpoint", "telemetry"}, "out");
  cfg.out_checkpoint = j["out"].value("checkpoint", std::string());
  cfg.out_telemetry = j["out"].value("telemetry", std::string());
  require(!cfg.out_checkpoint.empty(), ErrorKind::config,
          "config: out.checkpoint is required");
  if (j.contains("eval")) {
    detail::check_known_keys(j["eval"], {"mle_repeats", "sample_rows"}, "eval");
    cfg.mle_repeats = j["eval"].value("mle_repeats", cfg.mle_repeats);
    cfg.sample_rows = j["eval"].value("sample_rows", cfg.sample_rows);
  }

  cfg.split.validate();
  cfg.model.validate();
  cfg.flow.validate();
  cfg.train.validate();
  cfg.solver.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "config: invalid JSON in " + path + ": " + e.what());
  }
  RunConfig cfg = parse_run_config(j);
  require(std::filesystem::exists(cfg.data_csv), ErrorKind::config,
          "config: data csv not found: " + cfg.data_csv);
  require(std::filesystem::exists(cfg.data_schema), ErrorKind::config,
          "config: schema file not found: " + cfg.data_schema);
  return cfg;
}

// Deterministic fan-out of the root seed to each subsystem.
inline SplitSpec seeded_split(const RunConfig& cfg) {
  SplitSpec s = cfg.split;
  s.seed = derive_seed(cfg.seed, "split");
  return s;
}

inline Checkpoint run_train(const RunConfig& cfg, std::ostream* telemetry = nullptr) {
  const TableSchema schema = TableSchema::load(cfg.data_schema);
  const TableData data = load_csv(cfg.data_csv, schema);
  const auto parts = split(data, seeded_split(cfg));

  ModelConfig model = cfg.model;
  model.init_seed = derive_seed(cfg.seed, "model-init");
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.seed, "train");

  std::ofstream telemetry_file;
  if (!telemetry && !cfg.out_telemetry.empty()) {
    telemetry_file.open(cfg.out_telemetry);
    require(telemetry_file.good(), ErrorKind::io,
            "train: cannot write telemetry to " + cfg.out_telemetry);
    telemetry = &telemetry_file;
  }

  Checkpoint cp = train(parts[0], model, cfg.flow, train_cfg, telemetry);
  save_checkpoint(cp, cfg.out_checkpoint);
  return cp;
}

inline void run_sample(const std::string& checkpoint_path, long n,
                       const SolverConfig& solver, uint64_t seed,
                       const std::string& out_csv, int threads = 1) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  save_csv(generate(cp, n, solver, seed, threads), out_csv);
}

// Histogram/frequency export for external plotting: 20 equal-width bins
// over the combined range for numerical columns, the category union for
// categorical ones.
inline nlohmann::json plot_data(const TableData& real, const TableData& synth) {
  nlohmann::json cols = nlohmann::json::array();
  for (size_t c = 0; c < real.n_cols(); ++c) {
    nlohmann::json jc = {{"name", real.schema.columns[c].name}};
    if (real.schema.columns[c].kind == ColKind::numerical) {
      jc["kind"] = "numerical";
      double lo = real.num[c][0], hi = real.num[c][0];
      for (double v : real.num[c]) lo = std::min(lo, v), hi = std::max(hi, v);
      for (double v : synth.num[c]) lo = std::min(lo, v), hi = std::max(hi, v);
      if (hi == lo) hi = lo + 1.0;
      const int bins = 20;
      std::vector<double> edges(bins + 1);
      for (int b = 0; b <= bins; ++b)
        edges[static_cast<size_t>(b)] = lo + (hi - lo) * b / bins;
      const auto count = [&](const std::vector<double>& v) {
        std::vector<long> n(bins, 0);
        for (double x : v) {
          int b = static_cast<int>((x - lo) / (hi - lo) * bins);
          b = std::clamp(b, 0, bins - 1);
          ++n[static_cast<size_t>(b)];
        }
        return n;
      };
      jc["edges"] = edges;
      jc["real_counts"] = count(real.num[c]);
      jc["synth_counts"] = count(synth.num[c]);
    } else {
      jc["kind"] = "categorical";
      std::vector<std::string> cats;
      for (const auto& s : real.cat[c]) cats.push_back(s);
      for (const auto& s : synth.cat[c]) cats.push_back(s);
      std::sort(cats.begin(), cats.end());
      cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
      const auto count = [&](const std::vector<std::string>& v) {
        std::vector<long> n(cats.size(), 0);
        for (const auto& s : v) {
          const auto it = std::lower_bound(cats.begin(), cats.end(), s);
          ++n[static_cast<size_t>(it - cats.begin())];
        }
        return n;
      };
      jc["categories"] = cats;
      jc["real_counts"] = count(real.cat[c]);
      jc["synth_counts"] = count(synth.cat[c]);
    }
    cols.push_back(std::move(jc));
  }
  return {{"version", 1}, {"columns", cols}};
}

// Carves a validation/test partition out of the real table for MLE, scores
// everything, and writes the report plus plot data.
inline MetricsReport run_eval(const std::string& real_csv, const std::string& synth_csv,
                              const std::string& schema_path, uint64_t seed,
                              const std::string& out_json, int mle_repeats = 20,
                              double val_frac = 0.25,
                              const std::string& export_dir = "") {
  const TableSchema schema = TableSchema::load(schema_path);
  const TableData real = load_csv(real_csv, schema);
  const TableData synth = load_csv(synth_csv, schema);

  std::vector<size_t> perm(real.n_rows);
  std::iota(perm.begin(), perm.end(), size_t{0});
  Rng rng(derive_seed(seed, "eval-val-split"));
  for (size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<size_t>(rng.below(i + 1))]);
  const size_t n_val = std::max<size_t>(
      1, static_cast<size_t>(val_frac * static_cast<double>(real.n_rows)));
  require(n_val < real.n_rows, ErrorKind::metric, "eval: real table too small");
  const TableData real_val =
      real.take_rows({perm.begin(), perm.begin() + static_cast<long>(n_val)});
  const TableData real_test =
      real.take_rows({perm.begin() + static_cast<long>(n_val), perm.end()});

  // Export mode: the downstream-task splits as plain CSVs, so any external
  // learner can be trained on them for a like-for-like comparison.
  if (!export_dir.empty()) {
    std::filesystem::create_directories(export_dir);
    const std::filesystem::path dir(export_dir);
    save_csv(synth, (dir / "synth_train.csv").string());
    save_csv(real_val, (dir / "real_val.csv").string());
    save_csv(real_test, (dir / "real_test.csv").string());
  }

  const MetricsReport report =
      compute_report(real, synth, derive_seed(seed, "eval"), &real_val, &real_test,
                     mle_repeats);

  std::ofstream out(out_json);
  require(out.good(), ErrorKind::io, "eval: cannot write " + out_json);
  out << report.to_json().dump(2) << '\n';
  require(out.good(), ErrorKind::io, "eval: write failed for " + out_json);

  const std::string plot_path = out_json + ".plotdata.json";
  std::ofstream plot(plot_path);
  require(plot.good(), ErrorKind::io, "eval: cannot write " + plot_path);
  plot << plot_data(real, synth).dump(2) << '\n';
  return report;
}

namespace detail {

inline uint64_t table_hash(const TableData& t) {
  uint64_t h = 0xcbf29ce484222325ull;
  const auto mix = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    h ^= 0x1f;
    h *= 0x100000001b3ull;
  };
  for (size_t c = 0; c < t.n_cols(); ++c) {
    mix(t.schema.columns[c].name);
    if (t.schema.columns[c].kind == ColKind::numerical)
      for (double v : t.num[c]) mix(format_double(v));
    else
      for (const auto& s : t.cat[c]) mix(s);
  }
  return h;
}

}  // namespace detail

// Trains the two ablation variants plus the full configuration on one
// shared split and reports their metrics side by side. The split hash
// recorded per variant proves all three saw identical data.
inline nlohmann::json run_ablate(const RunConfig& cfg, int threads = 1) {
  const TableSchema schema = TableSchema::load(cfg.data_schema);
  const TableData data = load_csv(cfg.data_csv, schema);
  const auto parts = split(data, seeded_split(cfg));
  const uint64_t split_hash = detail::table_hash(parts[0]) ^
                              detail::table_hash(parts[1]) ^
                              detail::table_hash(parts[2]);

  struct Variant {
    const char* name;
    NoiseMode noise;
    TimestepMode timestep;
  };
  const Variant variants[] = {
      {"config_a", NoiseMode::gaussian, TimestepMode::logit_normal},
      {"config_b", NoiseMode::hybrid, TimestepMode::uniform},
      {"full", NoiseMode::hybrid, TimestepMode::logit_normal},
  };

  ModelConfig model = cfg.model;
  model.init_seed = derive_seed(cfg.seed, "model-init");
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.seed, "train");
  const long n_rows = cfg.sample_rows > 0 ? cfg.sample_rows
                                          : static_cast<long>(parts[0].n_rows);

  nlohmann::json out = {{"version", 1}, {"split_hash", split_hash}};
  nlohmann::json jvariants;
  for (const Variant& v : variants) {
    FlowConfig flow = cfg.flow;
    flow.noise_mode = v.noise;
    flow.timestep_mode = v.timestep;
    const Checkpoint cp = train(parts[0], model, flow, train_cfg);
    const TableData synth =
        generate(cp, n_rows, cfg.solver, derive_seed(cfg.seed, "sample"), threads);
    const MetricsReport report =
        compute_report(parts[2], synth, derive_seed(cfg.seed, "eval"), &parts[1],
                       &parts[2], cfg.mle_repeats);
    nlohmann::json jv = report.to_json();
    jv["split_hash"] = split_hash;
    jvariants[v.name] = std::move(jv);
  }
  out["variants"] = std::move(jvariants);
  return out;
}

}  // namespace rectflow
