// Copyright 2026 The liouvlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "liouvlearn/errors.hpp"
#include "liouvlearn/learner.hpp"
#include "liouvlearn/liouvillian.hpp"
#include "liouvlearn/measurement.hpp"
#include "liouvlearn/rank_analysis.hpp"
#include "liouvlearn/rng.hpp"

namespace liouvlearn {

using Json = nlohmann::ordered_json;

enum class SimulationMode { Sampled, Exact };

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
  Rng rng = make_stream(master, tag, index);
  return rng();
}

inline constexpr std::uint64_t kSettingsSeedTag = 1;
inline constexpr std::uint64_t kShotSeedTag = 2;
inline constexpr std::uint64_t kBootstrapSeedTag = 3;
inline constexpr std::uint64_t kFoldSeedTag = 4;
inline constexpr std::uint64_t kRankSeedTag = 5;
inline constexpr std::uint64_t kRepeatSeedTag = 6;

/// Model source: a named builder with parameters, or an inline model document.
struct ModelSpec {
  std::string type = "xy_powerlaw";
  double coupling = 4.0, field = 1.0, alpha = 1.5, gamma = 0.0;
  std::optional<Json> inline_model;
  bool given = false;  // false when the task has no model (experimental data)

  LiouvillianModel build(std::size_t n_qubits) const {
    if (!given) throw ValidationError("the task has no model; add a \"model\" entry");
    if (inline_model) {
      auto m = model_from_json(*inline_model);
      if (m.n_qubits() != n_qubits) throw DimensionMismatch("inline model size differs from n_qubits");
      return m;
    }
    return build_xy_model(n_qubits, coupling, field, alpha, gamma);
  }
};

struct StudyConfig {
  std::vector<double> t_f_values;
  std::vector<std::size_t> n_values;
  std::vector<int> degrees{1, 2, 3, 4};
};

struct RankScanConfig {
  std::vector<std::size_t> r_grid;
  std::vector<std::size_t> n_grid;
  std::size_t n_samples = 1000;
  double delta = 0.5;
};

struct TaskConfig {
  ModelSpec model;
  std::size_t n_qubits = 2;
  std::size_t n_settings = 0;
  std::size_t n_shots = 0;
  std::size_t n_times = 40;
  std::optional<double> dt, t_f;
  std::size_t substeps = 4;
  std::uint64_t master_seed = 0;
  CrossValidationConfig cv;
  bool fold_seed_given = false;
  SimulationMode mode = SimulationMode::Sampled;
  std::size_t n_bootstrap = 50;
  std::size_t repeats = 1;
  StudyConfig study;
  RankScanConfig rank_scan;

  TimeGrid grid() const { return dt ? TimeGrid{*dt, n_times} : TimeGrid::from_final_time(*t_f, n_times); }
  TimeGrid grid_for(double final_time) const { return TimeGrid::from_final_time(final_time, n_times); }
  LiouvillianModel build_model() const { return model.build(n_qubits); }

  std::uint64_t settings_seed() const { return derive_seed(master_seed, kSettingsSeedTag); }
  std::uint64_t shot_seed() const { return derive_seed(master_seed, kShotSeedTag); }

  LearnOptions learn_options(std::size_t threads) const {
    LearnOptions opt;
    opt.cv = cv;
    if (!fold_seed_given) opt.cv.fold_seed = derive_seed(master_seed, kFoldSeedTag);
    opt.n_bootstrap = n_bootstrap;
    opt.bootstrap_seed = derive_seed(master_seed, kBootstrapSeedTag);
    opt.threads = threads;
    return opt;
  }

  void validate() const {
    if (n_qubits < 2) throw ValidationError("n_qubits must be >= 2");
    if (n_settings < 1) throw ValidationError("R must be >= 1");
    if (n_shots < 1) throw ValidationError("N_M must be >= 1");
    if (n_times < 2) throw ValidationError("N_T must be >= 2");
    if (substeps < 1) throw ValidationError("substeps must be >= 1");
    if (dt.has_value() == t_f.has_value()) throw ValidationError("give exactly one of dt and t_f");
    if ((dt && !(*dt > 0.0)) || (t_f && !(*t_f > 0.0))) throw ValidationError("times must be positive");
    cv.validate(n_times);
    if (n_qubits > kMaxSimulatedQubits) throw TooLarge("n_qubits exceeds the simulator limit");
  }
};

namespace detail {

inline std::uint64_t get_seed(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ValidationError(std::string(key) + " must be an unsigned integer");
  return v.get<std::uint64_t>();
}

template <typename T>
T get_positive(const Json& j, const char* key) {
  const auto v = j.at(key).get<double>();
  if (!(v >= 0.0) || v != std::floor(v)) throw ValidationError(std::string(key) + " must be a nonnegative integer");
  return T(v);
}

inline ModelSpec parse_model(const Json& j) {
  require_keys(j, {"type", "J", "B", "alpha", "gamma", "spec"}, "model");
  ModelSpec m;
  m.given = true;
  m.type = j.value("type", std::string("xy_powerlaw"));
  if (m.type == "xy_powerlaw") {
    if (j.contains("spec")) throw ValidationError("xy_powerlaw models take J, B, alpha, gamma, not spec");
    m.coupling = j.value("J", m.coupling);
    m.field = j.value("B", m.field);
    m.alpha = j.value("alpha", m.alpha);
    m.gamma = j.value("gamma", m.gamma);
  } else if (m.type == "inline") {
    if (!j.contains("spec")) throw ValidationError("inline models need a spec");
    for (const char* k : {"J", "B", "alpha", "gamma"})
      if (j.contains(k)) throw ValidationError(std::string("inline models do not take ") + k);
    m.inline_model = j.at("spec");
  } else {
    throw ValidationError("unknown model type '" + m.type + "'");
  }
  return m;
}

}  // namespace detail

inline TaskConfig task_from_json(const Json& j) {
  try {
    detail::require_keys(j, {"model", "n_qubits", "R", "N_M", "N_T", "dt", "t_f", "substeps", "master_seed", "cv",
                             "mode", "bootstrap", "repeats", "study", "rank_scan"},
                         "task");
    TaskConfig t;
    if (j.contains("model")) t.model = detail::parse_model(j.at("model"));
    t.n_qubits = detail::get_positive<std::size_t>(j, "n_qubits");
    t.n_settings = detail::get_positive<std::size_t>(j, "R");
    t.n_shots = detail::get_positive<std::size_t>(j, "N_M");
    if (j.contains("N_T")) t.n_times = detail::get_positive<std::size_t>(j, "N_T");
    if (j.contains("dt")) t.dt = j.at("dt").get<double>();
    if (j.contains("t_f")) t.t_f = j.at("t_f").get<double>();
    if (j.contains("substeps")) t.substeps = detail::get_positive<std::size_t>(j, "substeps");
    if (j.contains("master_seed")) t.master_seed = detail::get_seed(j, "master_seed");
    if (j.contains("cv")) {
      const auto& c = j.at("cv");
      detail::require_keys(c, {"k_folds", "candidate_degrees", "fold_seed", "mode"}, "cv");
      if (c.contains("k_folds")) t.cv.k_folds = detail::get_positive<std::size_t>(c, "k_folds");
      if (c.contains("candidate_degrees")) t.cv.candidate_degrees = c.at("candidate_degrees").get<std::vector<int>>();
      if (c.contains("fold_seed")) {
        t.cv.fold_seed = detail::get_seed(c, "fold_seed");
        t.fold_seed_given = true;
      }
      const auto mode = c.value("mode", std::string("per_entry"));
      if (mode == "per_entry")
        t.cv.mode = DegreeMode::PerEntry;
      else if (mode == "shared")
        t.cv.mode = DegreeMode::Shared;
      else
        throw ValidationError("cv.mode must be per_entry or shared");
    }
    const auto mode = j.value("mode", std::string("sampled"));
    if (mode == "sampled")
      t.mode = SimulationMode::Sampled;
    else if (mode == "exact" || mode == "exact_expectation")
      t.mode = SimulationMode::Exact;
    else
      throw ValidationError("mode must be sampled or exact_expectation");
    if (j.contains("bootstrap")) t.n_bootstrap = detail::get_positive<std::size_t>(j, "bootstrap");
    if (j.contains("repeats")) t.repeats = detail::get_positive<std::size_t>(j, "repeats");
    if (j.contains("study")) {
      const auto& s = j.at("study");
      detail::require_keys(s, {"t_f_values", "n_values", "degrees"}, "study");
      if (s.contains("t_f_values")) t.study.t_f_values = s.at("t_f_values").get<std::vector<double>>();
      if (s.contains("n_values")) t.study.n_values = s.at("n_values").get<std::vector<std::size_t>>();
      if (s.contains("degrees")) t.study.degrees = s.at("degrees").get<std::vector<int>>();
    }
    if (j.contains("rank_scan")) {
      const auto& s = j.at("rank_scan");
      detail::require_keys(s, {"r_grid", "n_grid", "n_samples", "delta"}, "rank_scan");
      if (s.contains("r_grid")) t.rank_scan.r_grid = s.at("r_grid").get<std::vector<std::size_t>>();
      if (s.contains("n_grid")) t.rank_scan.n_grid = s.at("n_grid").get<std::vector<std::size_t>>();
      if (s.contains("n_samples")) t.rank_scan.n_samples = detail::get_positive<std::size_t>(s, "n_samples");
      if (s.contains("delta")) t.rank_scan.delta = s.at("delta").get<double>();
    }
    if (t.rank_scan.r_grid.empty())
      for (std::size_t r = 20; r <= 220; r += 10) t.rank_scan.r_grid.push_back(r);
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed task: ") + e.what());
  }
}

/// Reads a task file; LIOUVLEARN_SEED, when set, replaces master_seed.
inline TaskConfig load_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open task file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("task file is not valid JSON: " + std::string(e.what()));
  }
  auto task = task_from_json(j);
  if (const char* env = std::getenv("LIOUVLEARN_SEED")) {
    try {
      std::size_t used = 0;
      task.master_seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ValidationError("LIOUVLEARN_SEED must be an unsigned integer");
    }
  }
  return task;
}

// ---------------------------------------------------------------------------
// Files

struct OutputDir {
  std::filesystem::path root;

  std::filesystem::path settings() const { return root / "settings.json"; }
  std::filesystem::path dataset() const { return root / "dataset.ndjson"; }
  std::filesystem::path expectations() const { return root / "expectations.ndjson"; }
  std::filesystem::path results() const { return root / "results.json"; }
  std::filesystem::path file(const std::string& name) const { return root / name; }

  void ensure() const {
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());
  }
};

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  return is;
}

inline void write_json(const std::filesystem::path& p, const Json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed to write " + p.string());
}

inline Json read_json(const std::filesystem::path& p) {
  auto is = open_in(p);
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

inline void log_info(const std::string& msg) { std::cerr << "liouvlearn: " << msg << '\n'; }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Sum over all shots of the evolution time they required.
inline double quantum_evolution_time(std::size_t n_settings, std::size_t n_shots, const TimeGrid& grid) {
  double total = 0.0;
  for (double t : grid.times()) total += t;
  return double(n_settings) * double(n_shots) * total;
}

/// Real coefficients of an N-qubit model in the pairwise ansatz.
inline std::size_t num_coefficients(std::size_t n) { return 12 * n + 27 * num_pairs(n); }

// ---------------------------------------------------------------------------
// Commands

inline SettingsTable cmd_settings(const TaskConfig& task, const OutputDir& out) {
  out.ensure();
  const auto settings = draw_settings(task.n_qubits, task.n_settings, task.settings_seed());
  write_json(out.settings(), to_json(settings));
  log_info("wrote " + std::to_string(settings.n_settings) + " settings to " + out.settings().string());
  return settings;
}

inline SettingsTable load_settings(const TaskConfig& task, const OutputDir& out) {
  auto settings = settings_from_json(read_json(out.settings()));
  if (settings.n_qubits != task.n_qubits || settings.n_settings != task.n_settings)
    throw DimensionMismatch("settings file does not match the task (N or R differs)");
  return settings;
}

inline Json simulate_diagnostics(const TaskConfig& task, double seconds) {
  Json d;
  d["mode"] = task.mode == SimulationMode::Sampled ? "sampled" : "exact_expectation";
  d["n_measurements"] = task.mode == SimulationMode::Sampled ? task.n_settings * task.n_shots * task.n_times : 0;
  d["quantum_evolution_time"] = quantum_evolution_time(task.n_settings, task.n_shots, task.grid());
  d["seconds"] = seconds;
  return d;
}

inline void cmd_simulate(const TaskConfig& task, const OutputDir& out, std::size_t threads) {
  out.ensure();
  const auto settings = load_settings(task, out);
  const auto model = task.build_model();
  const auto grid = task.grid();
  Stopwatch clock;
  if (task.mode == SimulationMode::Sampled) {
    const auto data = simulate_dataset(model, settings, grid, task.n_shots, task.substeps, task.shot_seed(), threads);
    auto os = open_out(out.dataset());
    write_dataset(os, data);
    log_info("wrote " + std::to_string(data.shots.size()) + " shots to " + out.dataset().string());
  } else {
    const auto table = exact_expectation_table(model, settings, grid, task.substeps, threads);
    auto os = open_out(out.expectations());
    write_expectations(os, table, settings, grid);
    log_info("wrote exact expectations to " + out.expectations().string());
  }
  write_json(out.file("simulation_diagnostics.json"), simulate_diagnostics(task, clock.seconds()));
}

/// Per-setting means from whichever data file the task's mode produces.
struct MeasurementSource {
  SettingsTable settings;
  TimeGrid grid;
  std::optional<BitstringDataset> dataset;
  std::optional<ExpectationTable> table;

  PairSettingMeans means(std::size_t i, std::size_t j) const {
    return dataset ? pair_setting_means(*dataset, i, j) : pair_setting_means(*table, i, j);
  }
};

inline MeasurementSource load_measurements(const TaskConfig& task, const OutputDir& out) {
  MeasurementSource src;
  if (task.mode == SimulationMode::Sampled) {
    auto is = open_in(out.dataset());
    auto data = read_dataset(is);
    src.settings = data.settings;
    src.grid = data.grid;
    src.dataset = std::move(data);
  } else {
    auto is = open_in(out.expectations());
    auto f = read_expectations(is);
    src.settings = std::move(f.settings);
    src.grid = f.grid;
    src.table = std::move(f.table);
  }
  if (src.settings.n_qubits != task.n_qubits) throw DimensionMismatch("data file does not match the task's n_qubits");
  return src;
}

inline Json pair_json(const PairOutcome& o) {
  Json p;
  p["i"] = o.estimate.i;
  p["j"] = o.estimate.j;
  p["full_rank"] = o.estimate.full_rank;
  p["rank"] = o.estimate.rank;
  p["n_configurations"] = o.estimate.n_configurations;
  p["x_hat"] = std::vector<double>(o.estimate.x_hat.begin(), o.estimate.x_hat.end());
  p["degrees"] = std::vector<int>(o.estimate.degrees.begin(), o.estimate.degrees.end());
  p["bootstrap_se"] = std::vector<double>(o.bootstrap_se.begin(), o.bootstrap_se.end());
  return p;
}

/// Power-law refits of h_{i,a,j,a} against |i - j| for a = x, y.
inline Json powerlaw_json(const LearnedLiouvillian& learned) {
  Json out = Json::object();
  for (int a : {0, 1}) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& e : learned.pairs) pts.emplace_back(double(e.j - e.i), decode(e.x_hat).h_ij(a, a));
    const std::string key = a == 0 ? "h_xx" : "h_yy";
    try {
      const auto fit = powerlaw_refit(pts);
      out[key] = {{"amplitude", fit.amplitude}, {"amplitude_se", fit.amplitude_se}, {"alpha", fit.alpha},
                  {"alpha_se", fit.alpha_se}, {"n_used", fit.n_used}, {"n_dropped", fit.n_dropped}};
    } catch (const DegenerateData& e) {
      out[key] = nullptr;
    }
  }
  return out;
}

struct LearnReport {
  LearningRun run;
  Json results;
  Json diagnostics;
};

inline LearnReport cmd_learn(const TaskConfig& task, const OutputDir& out, std::size_t threads) {
  out.ensure();
  Stopwatch clock;
  const auto src = load_measurements(task, out);
  const double load_seconds = clock.seconds();
  auto opt = task.learn_options(threads);
  opt.keep_traces = true;
  const std::size_t n = task.n_qubits;
  LearnReport report;
  auto& run = report.run;
  run = learn_all_pairs(n, src.settings, src.grid, opt, [&](std::size_t i, std::size_t j) { return src.means(i, j); });
  const double learn_seconds = clock.seconds() - load_seconds;
  const std::optional<LiouvillianModel> truth =
      task.model.given ? std::optional<LiouvillianModel>(task.build_model()) : std::nullopt;
  const auto& learned = run.learned;

  Json& r = report.results;
  r["n_qubits"] = n;
  r["n_coefficients"] = num_coefficients(n);
  r["pairs"] = Json::array();
  for (const auto& o : run.outcomes) r["pairs"].push_back(pair_json(o));
  r["aggregated_model"] = to_json(learned.aggregated);
  r["single_body_stats"] = Json::array();
  for (const auto& s : learned.single_body_stats)
    r["single_body_stats"].push_back({{"qubit", s.qubit}, {"term", s.label}, {"mean", s.mean},
                                      {"standard_error", s.standard_error}, {"count", s.count},
                                      {"from_rank_deficient", s.from_rank_deficient}});
  r["min_dissipator_eigenvalue"] = learned.min_dissipator_eigenvalue;
  r["powerlaw"] = powerlaw_json(learned);

  const auto times = src.grid.times();
  const std::uint64_t seed = task.master_seed;
  {
    auto os = open_out(out.file("y_traces.csv"));
    os << "seed,i,j,l,label,t,y,fit,degree\n";
    const auto labels = enumerate_parameters();
    for (const auto& o : run.outcomes) {
      for (int l = 0; l < kNumParameters; ++l) {
        const int degree = o.estimate.degrees[std::size_t(l)];
        const Eigen::VectorXd y = o.y.row(l).transpose();
        const auto fit = fit_polynomial(times, std::span<const double>(y.data(), std::size_t(y.size())), degree);
        for (std::size_t s = 0; s < times.size(); ++s)
          os << seed << ',' << o.estimate.i << ',' << o.estimate.j << ',' << l << ',' << labels[std::size_t(l)].label()
             << ',' << Json(times[s]).dump() << ',' << Json(y[Eigen::Index(s)]).dump() << ','
             << Json(fit(times[s])).dump() << ',' << degree << '\n';
      }
    }
  }
  {
    // The truth column stays empty without a reference model.
    std::optional<std::array<double, kNumLambda>> truth_lambda;
    if (truth) truth_lambda = lambda_groups(*truth);
    auto os = open_out(out.file("lambda_groups.csv"));
    os << "seed,lambda,label,value,bootstrap_se,truth\n";
    for (int l = 1; l <= kNumLambda; ++l) {
      os << seed << ',' << l << ',' << lambda_label(l) << ',' << Json(run.lambda[std::size_t(l - 1)]).dump() << ','
         << Json(run.lambda_se[std::size_t(l - 1)]).dump() << ',';
      if (truth_lambda) os << Json((*truth_lambda)[std::size_t(l - 1)]).dump();
      os << '\n';
    }
  }
  if (truth) {
    auto os = open_out(out.file("pair_errors.csv"));
    os << "seed,i,j,full_rank,l1_error\n";
    Json errors = Json::array();
    for (const auto& o : run.outcomes) {
      const double e = reconstruction_error(o.estimate.x_hat, restrict_to_pair(*truth, o.estimate.i, o.estimate.j));
      os << seed << ',' << o.estimate.i << ',' << o.estimate.j << ',' << (o.estimate.full_rank ? 1 : 0) << ','
         << Json(e).dump() << '\n';
      errors.push_back({{"i", o.estimate.i}, {"j", o.estimate.j}, {"l1_error", e}});
    }
    r["reconstruction_errors"] = errors;
  }
  write_json(out.results(), r);

  Json& d = report.diagnostics;
  std::size_t peak = 0, deficient = 0;
  int ill = 0;
  for (const auto& o : run.outcomes) {
    peak = std::max(peak, o.peak_bytes);
    deficient += !o.estimate.full_rank;
    ill += o.estimate.ill_conditioned_fits;
  }
  d["load_seconds"] = load_seconds;
  d["learn_seconds"] = learn_seconds;
  d["per_pair_peak_bytes"] = peak;
  d["rank_deficient_pairs"] = deficient;
  d["ill_conditioned_fits"] = ill;
  d["n_measurements"] = src.dataset ? src.settings.n_settings * src.dataset->n_shots * src.grid.n_points : 0;
  d["quantum_evolution_time"] =
      quantum_evolution_time(src.settings.n_settings, src.dataset ? src.dataset->n_shots : task.n_shots, src.grid);
  write_json(out.file("diagnostics.json"), d);
  if (deficient) log_info("warning: " + std::to_string(deficient) + " pair(s) are rank deficient; increase R");
  if (ill) log_info("warning: " + std::to_string(ill) + " polynomial fit(s) have an ill-conditioned Vandermonde matrix");
  log_info("learned " + std::to_string(num_coefficients(n)) + " coefficients over " + std::to_string(num_pairs(n)) +
           " pairs");
  return report;
}

struct RankScanReport {
  RankScanResult single;
  std::optional<MultiPairScanResult> multi;
};

inline RankScanReport cmd_rank_scan(const TaskConfig& task, const OutputDir& out, std::size_t threads) {
  out.ensure();
  const auto& cfg = task.rank_scan;
  const std::uint64_t seed = derive_seed(task.master_seed, kRankSeedTag);
  RankScanReport report;
  report.single = single_pair_rank_probability(cfg.r_grid, cfg.n_samples, seed, threads);
  Json fit;
  try {
    report.single.fit = fit_gumbel(report.single);
    fit = to_json(*report.single.fit);
    fit["recommended_R"] = recommend_r(task.n_qubits, cfg.delta, *report.single.fit);
    fit["recommended_for"] = {{"N", task.n_qubits}, {"delta", cfg.delta}};
  } catch (const NumericalError& e) {
    log_info(std::string("warning: no Gumbel fit: ") + e.what());
    fit = nullptr;
  }
  {
    auto os = open_out(out.file("rank_scan.csv"));
    write_scan_csv(os, report.single);
  }
  Json summary;
  summary["gumbel"] = fit;
  summary["min_full_rank_settings"] =
      report.single.min_full_rank_settings ? Json(*report.single.min_full_rank_settings) : Json(nullptr);
  if (!cfg.n_grid.empty()) {
    report.multi = multi_pair_rank_probability(cfg.r_grid, cfg.n_grid, cfg.n_samples, seed, threads);
    auto os = open_out(out.file("rank_scan_multi.csv"));
    write_scan_csv(os, *report.multi);
    summary["contour"] = report.multi->iso_fit ? to_json(*report.multi->iso_fit) : Json(nullptr);
  }
  write_json(out.file("rank_fit.json"), summary);
  return report;
}

// ---------------------------------------------------------------------------
// Repeated simulation studies

struct StudyPoint {
  std::size_t n_qubits = 0;
  double t_f = 0.0;
  int degree = 0;
  std::vector<double> errors;  // one per repeat: mean pair l1 error

  double mean() const { return std::accumulate(errors.begin(), errors.end(), 0.0) / double(errors.size()); }
  double stddev() const {
    if (errors.size() < 2) return 0.0;
    const double m = mean();
    double sq = 0.0;
    for (double e : errors) sq += (e - m) * (e - m);
    return std::sqrt(sq / double(errors.size() - 1));
  }
};

/// Full pipeline repeated over independent seeds, with shared fixed degrees.
/// Every (N, t_f) pair of the sweep is run; each repeat's data is reused
/// across degrees.
inline std::vector<StudyPoint> run_study(const TaskConfig& task, const std::vector<std::size_t>& n_values,
                                         const std::vector<double>& t_f_values, const std::vector<int>& degrees,
                                         std::size_t threads = 1) {
  if (task.repeats < 2) throw ValidationError("a study needs repeats >= 2");
  if (n_values.empty() || t_f_values.empty() || degrees.empty()) throw ValidationError("empty study sweep");
  std::vector<StudyPoint> points;
  for (auto n : n_values) {
    if (n < 2) throw ValidationError("study N values must be >= 2");
    if (task.model.inline_model && n != task.n_qubits) throw ValidationError("inline models fix N");
    const auto truth = task.model.build(n);
    for (double tf : t_f_values) {
      const auto grid = task.grid_for(tf);
      const std::size_t first = points.size();
      for (int d : degrees) points.push_back({n, tf, d, {}});
      for (std::size_t k = 0; k < task.repeats; ++k) {
        const std::uint64_t seed = derive_seed(task.master_seed, kRepeatSeedTag, k);
        const auto settings = draw_settings(n, task.n_settings, derive_seed(seed, kSettingsSeedTag));
        std::optional<BitstringDataset> data;
        std::optional<ExpectationTable> table;
        if (task.mode == SimulationMode::Sampled)
          data = simulate_dataset(truth, settings, grid, task.n_shots, task.substeps, derive_seed(seed, kShotSeedTag),
                                  threads);
        else
          table = exact_expectation_table(truth, settings, grid, task.substeps, threads);
        for (std::size_t q = 0; q < degrees.size(); ++q) {
          LearnOptions opt;
          opt.cv.candidate_degrees = {degrees[q]};
          opt.n_bootstrap = 0;
          opt.threads = threads;
          const auto run = learn_all_pairs(n, settings, grid, opt, [&](std::size_t i, std::size_t j) {
            return data ? pair_setting_means(*data, i, j) : pair_setting_means(*table, i, j);
          });
          double total = 0.0;
          for (const auto& o : run.outcomes)
            total += reconstruction_error(o.estimate.x_hat, restrict_to_pair(truth, o.estimate.i, o.estimate.j));
          points[first + q].errors.push_back(total / double(run.outcomes.size()));
        }
      }
    }
  }
  return points;
}

inline std::vector<StudyPoint> cmd_study(const TaskConfig& task, const OutputDir& out, std::size_t threads) {
  out.ensure();
  auto n_values = task.study.n_values.empty() ? std::vector<std::size_t>{task.n_qubits} : task.study.n_values;
  auto t_f_values = task.study.t_f_values.empty() ? std::vector<double>{task.grid().t_final()} : task.study.t_f_values;
  const auto points = run_study(task, n_values, t_f_values, task.study.degrees, threads);
  auto os = open_out(out.file("study.csv"));
  os << "master_seed,N,t_f,degree,mean_error,std_error,repeats\n";
  for (const auto& p : points)
    os << task.master_seed << ',' << p.n_qubits << ',' << Json(p.t_f).dump() << ',' << p.degree << ','
       << Json(p.mean()).dump() << ',' << Json(p.stddev()).dump() << ',' << p.errors.size() << '\n';
  log_info("wrote " + std::to_string(points.size()) + " study rows to " + out.file("study.csv").string());
  return points;
}

}  // namespace liouvlearn
