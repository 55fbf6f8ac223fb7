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

// Command-line driver: liouvlearn <command> <task.json> [--out DIR] [--threads K] [--mode sampled|exact]

#include <exception>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "liouvlearn/workflow.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kNumerical = 3, kIo = 4 };

int run(const std::string& command, const liouvlearn::TaskConfig& task, const liouvlearn::OutputDir& out,
        std::size_t threads) {
  using namespace liouvlearn;
  if (command == "settings") {
    cmd_settings(task, out);
  } else if (command == "simulate") {
    cmd_simulate(task, out, threads);
  } else if (command == "learn") {
    const auto report = cmd_learn(task, out, threads);
    std::cout << "lambda,label,value,bootstrap_se\n";
    for (int l = 1; l <= kNumLambda; ++l)
      std::cout << l << ',' << lambda_label(l) << ',' << report.run.lambda[std::size_t(l - 1)] << ','
                << report.run.lambda_se[std::size_t(l - 1)] << '\n';
  } else if (command == "rank-scan") {
    const auto report = cmd_rank_scan(task, out, threads);
    if (report.single.fit)
      std::cout << "R0 = " << report.single.fit->r0 << ", mu = " << report.single.fit->mu << '\n';
  } else if (command == "study") {
    const auto points = cmd_study(task, out, threads);
    std::cout << "N,t_f,degree,mean_error,std_error\n";
    for (const auto& p : points)
      std::cout << p.n_qubits << ',' << p.t_f << ',' << p.degree << ',' << p.mean() << ',' << p.stddev() << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn pairwise Lindblad generators from randomized measurements"};
  app.require_subcommand(1);
  std::string task_path, out_dir = "liouvlearn_out", mode;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  const char* commands[][2] = {{"settings", "draw random preparation/measurement settings"},
                               {"simulate", "simulate the experiment for the drawn settings"},
                               {"learn", "estimate Liouvillian coefficients from a dataset"},
                               {"rank-scan", "Monte Carlo scan of the full-rank probability"},
                               {"study", "repeated reconstruction-error study"}};
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("task", task_path, "task file (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--mode", mode, "override the task's simulation mode")
        ->check(CLI::IsMember({"sampled", "exact"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto task = liouvlearn::load_task(task_path);
    if (mode == "sampled") task.mode = liouvlearn::SimulationMode::Sampled;
    if (mode == "exact") task.mode = liouvlearn::SimulationMode::Exact;
    return run(command, task, liouvlearn::OutputDir{out_dir}, threads);
  } catch (const liouvlearn::IoError& e) {
    std::cerr << "liouvlearn: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const liouvlearn::ValidationError& e) {
    std::cerr << "liouvlearn: invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const liouvlearn::NumericalError& e) {
    std::cerr << "liouvlearn: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "liouvlearn: invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "liouvlearn: " << e.what() << '\n';
    return kNumerical;
  }
}
