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

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <new>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "liouvlearn/workflow.hpp"

// Heap instrumentation: live and peak bytes across the whole process.
namespace heap {
std::atomic<std::size_t> live{0}, peak{0};
}  // namespace heap

void* operator new(std::size_t size) {
  auto* block = static_cast<std::size_t*>(std::malloc(size + 16));
  if (!block) throw std::bad_alloc();
  *block = size;
  const std::size_t now = heap::live.fetch_add(size) + size;
  std::size_t prev = heap::peak.load();
  while (now > prev && !heap::peak.compare_exchange_weak(prev, now)) {
  }
  return reinterpret_cast<char*>(block) + 16;
}

void operator delete(void* p) noexcept {
  if (!p) return;
  auto* block = reinterpret_cast<std::size_t*>(static_cast<char*>(p) - 16);
  heap::live.fetch_sub(*block);
  std::free(block);
}

void operator delete(void* p, std::size_t) noexcept { operator delete(p); }

namespace liouvlearn {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("liouvlearn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json small_task() {
  return Json::parse(R"({
    "model": {"type": "xy_powerlaw", "J": 4.0, "B": 1.0, "alpha": 1.5, "gamma": 0.5},
    "n_qubits": 3, "R": 120, "N_M": 20, "N_T": 12, "t_f": 0.1, "substeps": 2,
    "master_seed": 5, "cv": {"candidate_degrees": [1, 2, 3]}, "bootstrap": 4
  })");
}

fs::path write_task(const fs::path& dir, const Json& j) {
  const auto p = dir / "task.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

TEST(TaskConfig, ParsesDefaultsAndGrid) {
  const auto t = task_from_json(small_task());
  EXPECT_EQ(t.n_qubits, 3u);
  EXPECT_EQ(t.n_settings, 120u);
  EXPECT_NEAR(t.grid().dt, 0.1 / 12, 1e-15);
  EXPECT_EQ(t.mode, SimulationMode::Sampled);
  EXPECT_EQ(t.cv.candidate_degrees, (std::vector<int>{1, 2, 3}));
  auto j = small_task();
  j.erase("t_f");
  j["dt"] = 0.01;
  EXPECT_NEAR(task_from_json(j).grid().t_final(), 0.12, 1e-15);
}

TEST(TaskConfig, RejectsInvalidTasks) {
  auto zero_r = small_task();
  zero_r["R"] = 0;
  EXPECT_THROW(task_from_json(zero_r), ValidationError);
  auto unknown = small_task();
  unknown["shots"] = 3;
  EXPECT_THROW(task_from_json(unknown), ValidationError);
  auto both = small_task();
  both["dt"] = 0.01;
  EXPECT_THROW(task_from_json(both), ValidationError);
  auto neither = small_task();
  neither.erase("t_f");
  EXPECT_THROW(task_from_json(neither), ValidationError);
  auto missing = small_task();
  missing.erase("N_M");
  EXPECT_THROW(task_from_json(missing), ValidationError);
  auto fractional = small_task();
  fractional["R"] = 2.5;
  EXPECT_THROW(task_from_json(fractional), ValidationError);
  auto bad_model = small_task();
  bad_model["model"]["type"] = "ising";
  EXPECT_THROW(task_from_json(bad_model), ValidationError);
  auto bad_mode = small_task();
  bad_mode["mode"] = "analytic";
  EXPECT_THROW(task_from_json(bad_mode), ValidationError);
  auto negative_seed = small_task();
  negative_seed["master_seed"] = -1;
  EXPECT_THROW(task_from_json(negative_seed), ValidationError);
}

TEST(TaskConfig, InlineModel) {
  auto j = small_task();
  j["model"] = {{"type", "inline"}, {"spec", to_json(build_xy_model(3, 2.0, 0.5, 1.0, 0.1))}};
  const auto t = task_from_json(j);
  EXPECT_NEAR(t.build_model().hamiltonian.coupling(0, 2)(0, 0), 0.5, 1e-15);
  j["n_qubits"] = 4;
  EXPECT_THROW(task_from_json(j).build_model(), DimensionMismatch);
}

#ifdef LIOUVLEARN_TASKS_DIR
TEST(TaskConfig, SampleTasksParse) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(LIOUVLEARN_TASKS_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_task(entry.path())) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 4u);
}
#endif

TEST(TaskConfig, SeedOverrideFromEnvironment) {
  const auto dir = scratch_dir("seed_env");
  const auto path = write_task(dir, small_task());
  ::setenv("LIOUVLEARN_SEED", "77", 1);
  EXPECT_EQ(load_task(path).master_seed, 77u);
  ::setenv("LIOUVLEARN_SEED", "7x", 1);
  EXPECT_THROW(load_task(path), ValidationError);
  ::unsetenv("LIOUVLEARN_SEED");
  EXPECT_EQ(load_task(path).master_seed, 5u);
  EXPECT_THROW(load_task(dir / "missing.json"), IoError);
}

TEST(Workflow, PaperBudgetArithmetic) {
  auto j = small_task();
  j["n_qubits"] = 10;
  j["R"] = 800;
  j["N_M"] = 200;
  j["N_T"] = 40;
  const auto t = task_from_json(j);
  const auto d = simulate_diagnostics(t, 0.0);
  EXPECT_EQ(d["n_measurements"].get<std::size_t>(), 6400000u);
  EXPECT_NEAR(d["quantum_evolution_time"].get<double>(), 328000.0, 1e-6);
  EXPECT_EQ(num_coefficients(10), 1335u);
  EXPECT_EQ(num_coefficients(2), 51u);

  const auto dir = scratch_dir("settings_n10");
  const auto settings = cmd_settings(t, OutputDir{dir});
  EXPECT_EQ(settings.prep.size(), 800u * 10u);
  EXPECT_EQ(settings.meas.size(), 800u * 10u);
  const auto first = slurp(dir / "settings.json");
  cmd_settings(t, OutputDir{dir});
  EXPECT_EQ(slurp(dir / "settings.json"), first);
}

TEST(Workflow, EndToEndIsByteReproducible) {
  const auto t = task_from_json(small_task());
  std::vector<std::string> files{"settings.json", "dataset.ndjson", "results.json", "y_traces.csv",
                                 "lambda_groups.csv", "pair_errors.csv"};
  std::vector<std::vector<std::string>> runs;
  for (std::size_t threads : {1, 3}) {
    const auto dir = scratch_dir("e2e_" + std::to_string(threads));
    const OutputDir out{dir};
    cmd_settings(t, out);
    cmd_simulate(t, out, threads);
    cmd_learn(t, out, threads);
    std::vector<std::string> contents;
    for (const auto& f : files) contents.push_back(slurp(dir / f));
    runs.push_back(contents);
  }
  for (std::size_t k = 0; k < files.size(); ++k) {
    EXPECT_FALSE(runs[0][k].empty()) << files[k];
    EXPECT_EQ(runs[0][k], runs[1][k]) << files[k];
  }
}

TEST(Workflow, LearnReportContents) {
  const auto t = task_from_json(small_task());
  const auto dir = scratch_dir("report");
  const OutputDir out{dir};
  cmd_settings(t, out);
  cmd_simulate(t, out, 1);
  const auto report = cmd_learn(t, out, 1);
  const auto r = read_json(out.results());
  EXPECT_EQ(r["n_coefficients"].get<std::size_t>(), 12u * 3 + 27u * 3);
  ASSERT_EQ(r["pairs"].size(), 3u);
  EXPECT_EQ(r["pairs"][0]["x_hat"].size(), 51u);
  EXPECT_EQ(r["pairs"][0]["degrees"].size(), 51u);
  EXPECT_EQ(r["reconstruction_errors"].size(), 3u);
  EXPECT_EQ(r["single_body_stats"].size(), 3u * 12u);
  EXPECT_TRUE(r["powerlaw"].contains("h_xx"));
  const auto back = model_from_json(r["aggregated_model"]);
  EXPECT_EQ(back.n_qubits(), 3u);

  std::istringstream lambda(slurp(dir / "lambda_groups.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(lambda, line);
  EXPECT_EQ(line, "seed,lambda,label,value,bootstrap_se,truth");
  while (std::getline(lambda, line)) ++rows;
  EXPECT_EQ(rows, 39u);

  std::istringstream traces(slurp(dir / "y_traces.csv"));
  rows = 0;
  std::getline(traces, line);
  while (std::getline(traces, line)) ++rows;
  EXPECT_EQ(rows, 3u * 51u * 12u);
  EXPECT_EQ(report.diagnostics["n_measurements"].get<std::size_t>(), 120u * 20u * 12u);
}

TEST(Workflow, ExactModeWritesSidecarOnly) {
  auto j = small_task();
  j["mode"] = "exact_expectation";
  const auto t = task_from_json(j);
  const auto dir = scratch_dir("exact");
  const OutputDir out{dir};
  cmd_settings(t, out);
  cmd_simulate(t, out, 1);
  EXPECT_TRUE(fs::exists(out.expectations()));
  EXPECT_FALSE(fs::exists(out.dataset()));
  const auto report = cmd_learn(t, out, 1);
  EXPECT_EQ(report.diagnostics["n_measurements"].get<std::size_t>(), 0u);
  EXPECT_EQ(report.run.outcomes.size(), 3u);
}

TEST(Workflow, ZeroModelGivesConstantSeries) {
  auto j = small_task();
  j["model"] = {{"type", "inline"}, {"spec", to_json(LiouvillianModel(3))}};
  j["mode"] = "exact_expectation";
  const auto t = task_from_json(j);
  const auto dir = scratch_dir("zero");
  const OutputDir out{dir};
  cmd_settings(t, out);
  cmd_simulate(t, out, 1);
  const auto src = load_measurements(t, out);
  const auto& e = *src.table;
  for (std::size_t r = 0; r < e.n_settings; ++r)
    for (std::size_t k = 0; k < e.n_observables(); ++k)
      for (std::size_t s = 1; s < e.n_times; ++s)
        ASSERT_EQ(e.values[e.slot(s, r) + k], e.values[e.slot(0, r) + k]);
}

TEST(Workflow, LearnWithoutReferenceModel) {
  const auto t = task_from_json(small_task());
  const auto dir = scratch_dir("no_model");
  const OutputDir out{dir};
  cmd_settings(t, out);
  cmd_simulate(t, out, 1);
  auto j = small_task();
  j.erase("model");
  const auto blind = task_from_json(j);
  EXPECT_THROW(cmd_simulate(blind, out, 1), ValidationError);
  const auto report = cmd_learn(blind, out, 1);
  EXPECT_FALSE(report.results.contains("reconstruction_errors"));
  EXPECT_FALSE(fs::exists(dir / "pair_errors.csv"));
  std::istringstream lambda(slurp(dir / "lambda_groups.csv"));
  std::string line;
  std::getline(lambda, line);
  std::getline(lambda, line);
  EXPECT_EQ(line.back(), ',');
}

TEST(Workflow, SimulateNeedsSettings) {
  const auto t = task_from_json(small_task());
  const auto dir = scratch_dir("no_settings");
  EXPECT_THROW(cmd_simulate(t, OutputDir{dir}, 1), IoError);
  auto other = small_task();
  other["R"] = 50;
  cmd_settings(task_from_json(other), OutputDir{dir});
  EXPECT_THROW(cmd_simulate(t, OutputDir{dir}, 1), DimensionMismatch);
}

ExpectationTable synthetic_table(std::size_t n, std::size_t n_times, std::size_t n_settings) {
  ExpectationTable e{n, n_times, n_settings, {}};
  e.values.resize(n_times * n_settings * e.n_observables());
  Rng rng = make_stream(3, n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : e.values) v = u(rng);
  return e;
}

TEST(Workflow, PerPairMemoryIndependentOfN) {
  const TimeGrid grid{0.0025, 20};
  std::array<std::size_t, 2> peak{};
  std::size_t k = 0;
  for (std::size_t n : {4u, 8u}) {
    const auto settings = draw_settings(n, 300, 9);
    const auto table = synthetic_table(n, grid.n_points, 300);
    LearnOptions opt;
    opt.cv.candidate_degrees = {2};
    opt.n_bootstrap = 0;
    const auto run = learn_all_pairs(n, settings, grid, opt,
                                     [&](std::size_t i, std::size_t j) { return pair_setting_means(table, i, j); });
    for (const auto& o : run.outcomes) peak[k] = std::max(peak[k], o.peak_bytes);
    ++k;
  }
  ASSERT_GT(peak[0], 0u);
  EXPECT_LE(double(std::max(peak[0], peak[1])), 2.0 * double(std::min(peak[0], peak[1])));
}

TEST(Workflow, MeasuredHeapPerPairIndependentOfN) {
  const TimeGrid grid{0.0025, 20};
  CrossValidationConfig cv;
  cv.candidate_degrees = {2};
  const DerivativeEstimator estimator(grid, cv);
  LearnOptions opt;
  opt.n_bootstrap = 0;
  std::array<std::size_t, 2> peak{};
  std::size_t k = 0;
  for (std::size_t n : {4u, 8u}) {
    const auto settings = draw_settings(n, 300, 9);
    const auto table = synthetic_table(n, grid.n_points, 300);
    for (const auto& [i, j] : all_pairs(n)) {
      const std::size_t base = heap::live.load();
      heap::peak.store(base);
      const auto outcome = learn_pair(pair_setting_means(table, i, j), settings, estimator, opt);
      ASSERT_TRUE(outcome.estimate.full_rank);
      peak[k] = std::max(peak[k], heap::peak.load() - base);
    }
    ++k;
  }
  ASSERT_GT(peak[0], 0u);
  EXPECT_LE(double(std::max(peak[0], peak[1])), 2.0 * double(std::min(peak[0], peak[1])));
}

TEST(Workflow, RankScanWithSingleSample) {
  auto j = small_task();
  j["rank_scan"] = {{"r_grid", {10, 60, 200}}, {"n_samples", 1}};
  const auto t = task_from_json(j);
  const auto dir = scratch_dir("rank1");
  const auto report = cmd_rank_scan(t, OutputDir{dir}, 1);
  EXPECT_EQ(report.single.probabilities.size(), 3u);
  const auto csv = slurp(dir / "rank_scan.csv");
  EXPECT_EQ(csv.rfind("R,N,p_hat,n_samples\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(dir / "rank_fit.json"));
}

TEST(Study, RequiresRepeats) {
  auto j = small_task();
  j["repeats"] = 1;
  const auto t = task_from_json(j);
  EXPECT_THROW(run_study(t, {2}, {0.05}, {1}), ValidationError);
  j["repeats"] = 2;
  EXPECT_THROW(run_study(task_from_json(j), {2}, {}, {1}), ValidationError);
}

TEST(Study, TableShapeAndDeterminism) {
  auto j = small_task();
  j["n_qubits"] = 2;
  j["repeats"] = 2;
  j["R"] = 60;
  j["study"] = {{"t_f_values", {0.05, 0.1}}, {"degrees", {1, 2}}};
  const auto t = task_from_json(j);
  const auto dir = scratch_dir("study");
  const auto points = cmd_study(t, OutputDir{dir}, 1);
  ASSERT_EQ(points.size(), 4u);
  for (const auto& p : points) {
    EXPECT_EQ(p.errors.size(), 2u);
    EXPECT_GT(p.mean(), 0.0);
  }
  EXPECT_NE(points[0].errors[0], points[0].errors[1]);
  const auto first = slurp(dir / "study.csv");
  cmd_study(t, OutputDir{dir}, 2);
  EXPECT_EQ(slurp(dir / "study.csv"), first);
}

#ifdef LIOUVLEARN_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(LIOUVLEARN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const auto task = write_task(dir, small_task());
  const auto out = (dir / "out").string();
  EXPECT_EQ(run_cli("settings " + task.string() + " --out " + out), 0);
  EXPECT_EQ(run_cli("simulate " + task.string() + " --out " + out + " --mode exact --threads 2"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "expectations.ndjson"));
  EXPECT_EQ(run_cli("learn " + task.string() + " --out " + out + " --mode exact"), 0);
  EXPECT_EQ(run_cli("learn " + task.string() + " --out " + out), 4);  // no sampled dataset yet

  auto bad = small_task();
  bad["R"] = 0;
  const auto bad_task = dir / "bad.json";
  std::ofstream(bad_task) << bad.dump();
  EXPECT_EQ(run_cli("settings " + bad_task.string() + " --out " + out), 2);
  EXPECT_EQ(run_cli("settings " + (dir / "absent.json").string()), 4);
  EXPECT_EQ(run_cli("frobnicate " + task.string()), 2);
  EXPECT_EQ(run_cli("settings " + task.string() + " --mode fast"), 2);
}

TEST(Cli, SeedEnvironmentChangesSettings) {
  const auto dir = scratch_dir("cli_seed");
  const auto task = write_task(dir, small_task());
  const auto a = (dir / "a").string(), b = (dir / "b").string(), c = (dir / "c").string();
  ASSERT_EQ(run_cli("settings " + task.string() + " --out " + a), 0);
  ASSERT_EQ(run_cli("settings " + task.string() + " --out " + b), 0);
  ASSERT_EQ(std::system(("LIOUVLEARN_SEED=99 " + std::string(LIOUVLEARN_CLI_PATH) + " settings " + task.string() +
                         " --out " + c + " >/dev/null 2>&1")
                            .c_str()),
            0);
  EXPECT_EQ(slurp(fs::path(a) / "settings.json"), slurp(fs::path(b) / "settings.json"));
  EXPECT_NE(slurp(fs::path(a) / "settings.json"), slurp(fs::path(c) / "settings.json"));
}
#endif

}  // namespace
}  // namespace liouvlearn
