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

#include <vector>

#include "liouvlearn/learner.hpp"
#include "liouvlearn/measurement.hpp"

namespace fixtures {

using namespace liouvlearn;

/// Every combination of preparation and measurement indices on the listed
/// qubits; other qubits get +z / z.
inline SettingsTable factorial_settings(std::size_t n, const std::vector<std::size_t>& prep_sites,
                                 const std::vector<std::size_t>& meas_sites) {
  SettingsTable t{n, 0, 0, {}, {}};
  std::size_t combos = 1;
  for (std::size_t q = 0; q < prep_sites.size(); ++q) combos *= 6;
  for (std::size_t q = 0; q < meas_sites.size(); ++q) combos *= 3;
  for (std::size_t c = 0; c < combos; ++c) {
    std::vector<std::uint8_t> prep(n, 4), meas(n, 2);
    std::size_t rest = c;
    for (auto k : prep_sites) prep[k] = std::uint8_t(rest % 6), rest /= 6;
    for (auto k : meas_sites) meas[k] = std::uint8_t(rest % 3), rest /= 3;
    t.prep.insert(t.prep.end(), prep.begin(), prep.end());
    t.meas.insert(t.meas.end(), meas.begin(), meas.end());
  }
  t.n_settings = combos;
  return t;
}

/// tr(e^{Lt}(rho_c) O_c) on N qubits, qubits outside the configuration in 1/2.
inline std::vector<double> reference_series(const LiouvillianModel& model, const Configuration& c, std::size_t i,
                                     std::size_t j, const TimeGrid& grid, std::size_t substeps) {
  const std::size_t n = model.n_qubits();
  ProductState state(n);
  state[i] = c.prep_i;
  state[j] = c.prep_j;
  MaskOperator::Factors obs;
  if (c.obs_i) obs.emplace_back(i, *c.obs_i);
  if (c.obs_j) obs.emplace_back(j, *c.obs_j);
  std::vector<double> out;
  for (const auto& rho : evolve(model, DensityMatrix::from_product(state), grid, substeps))
    out.push_back(exact_expectation(rho, obs));
  return out;
}

/// Noiseless single-pair pipeline on N = 2 with every configuration observed.
inline PairEstimate learn_exact_pair(const LiouvillianModel& model, const TimeGrid& grid,
                                     const CrossValidationConfig& cv, std::size_t substeps = 64) {
  const auto settings = factorial_settings(2, {0, 1}, {0, 1});
  const auto table = exact_expectation_table(model, settings, grid, substeps);
  const auto series = accumulate_series(pair_setting_means(table, 0, 1), settings);
  return solve_pair(assemble_pair_system(m_max(), series), grid, cv);
}

inline CrossValidationConfig fixed_degree(int degree) {
  CrossValidationConfig cv;
  cv.candidate_degrees = {degree};
  return cv;
}

}  // namespace fixtures
