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

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "liouvlearn/coefficient_matrix.hpp"
#include "liouvlearn/configuration.hpp"
#include "liouvlearn/errors.hpp"
#include "liouvlearn/liouvillian.hpp"
#include "liouvlearn/parallel.hpp"
#include "liouvlearn/rng.hpp"
#include "liouvlearn/simulator.hpp"

namespace liouvlearn {

/// Preparation alphabet, in index order; U_k |0> is the k-th Pauli eigenstate
/// (+x, -x, +y, -y, +z, -z).
inline constexpr std::array<const char*, 6> kPrepUnitaries{"H", "XH", "HS", "XHS", "1", "X"};
/// Measurement alphabet, in index order; V_k rotates axis (x, y, z) onto z.
inline constexpr std::array<const char*, 3> kMeasUnitaries{"H", "HSdg", "1"};

inline constexpr std::uint64_t kSettingsStream = 0x5e771;
inline constexpr std::uint64_t kShotStream = 0x5407;

struct SettingsTable {
  std::size_t n_qubits = 0;
  std::size_t n_settings = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> prep;  // [r][k], values 0..5
  std::vector<std::uint8_t> meas;  // [r][k], values 0..2

  int prep_at(std::size_t r, std::size_t k) const { return prep[r * n_qubits + k]; }
  int meas_at(std::size_t r, std::size_t k) const { return meas[r * n_qubits + k]; }
  PauliState prep_state(std::size_t r, std::size_t k) const { return PauliState::from_index(prep_at(r, k)); }
  PauliAxis meas_axis(std::size_t r, std::size_t k) const { return axis_from_index(meas_at(r, k)); }

  ProductState initial_state(std::size_t r) const {
    ProductState s(n_qubits);
    for (std::size_t k = 0; k < n_qubits; ++k) s[k] = prep_state(r, k);
    return s;
  }

  std::vector<PauliAxis> basis(std::size_t r) const {
    std::vector<PauliAxis> b(n_qubits);
    for (std::size_t k = 0; k < n_qubits; ++k) b[k] = meas_axis(r, k);
    return b;
  }

  void validate() const {
    if (n_qubits < 1) throw ValidationError("settings need at least one qubit");
    if (n_settings < 1) throw ValidationError("settings need R >= 1");
    if (prep.size() != n_settings * n_qubits || meas.size() != n_settings * n_qubits)
      throw DimensionMismatch("settings table has inconsistent dimensions");
    for (auto v : prep)
      if (v > 5) throw ValidationError("preparation index out of range");
    for (auto v : meas)
      if (v > 2) throw ValidationError("measurement index out of range");
  }
};

/// Draws prep then meas indices row by row from `rng`.
inline SettingsTable draw_settings(std::size_t n_qubits, std::size_t n_settings, Rng& rng,
                                   std::uint64_t seed = 0) {
  if (n_qubits < 1) throw ValidationError("settings need at least one qubit");
  if (n_settings < 1) throw ValidationError("settings need R >= 1");
  SettingsTable t{n_qubits, n_settings, seed, {}, {}};
  t.prep.resize(n_settings * n_qubits);
  t.meas.resize(n_settings * n_qubits);
  std::uniform_int_distribution<int> six(0, 5), three(0, 2);
  for (std::size_t r = 0; r < n_settings; ++r) {
    for (std::size_t k = 0; k < n_qubits; ++k) t.prep[r * n_qubits + k] = std::uint8_t(six(rng));
    for (std::size_t k = 0; k < n_qubits; ++k) t.meas[r * n_qubits + k] = std::uint8_t(three(rng));
  }
  return t;
}

inline SettingsTable draw_settings(std::size_t n_qubits, std::size_t n_settings, std::uint64_t seed) {
  Rng rng = make_stream(seed, kSettingsStream);
  return draw_settings(n_qubits, n_settings, rng, seed);
}

namespace detail {

template <typename Json>
Json table_rows(const std::vector<std::uint8_t>& v, std::size_t rows, std::size_t cols) {
  Json out = Json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    Json row = Json::array();
    for (std::size_t k = 0; k < cols; ++k) row.push_back(int(v[r * cols + k]));
    out.push_back(std::move(row));
  }
  return out;
}

template <typename Json>
std::vector<std::uint8_t> read_rows(const Json& j, std::size_t rows, std::size_t cols, int max_value,
                                    const char* what) {
  if (!j.is_array() || j.size() != rows) throw DimensionMismatch(std::string(what) + " has the wrong number of rows");
  std::vector<std::uint8_t> out;
  out.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols)
      throw DimensionMismatch(std::string(what) + " row has the wrong length");
    for (const auto& v : row) {
      const int x = v.template get<int>();
      if (x < 0 || x > max_value) throw ValidationError(std::string(what) + " index out of range");
      out.push_back(std::uint8_t(x));
    }
  }
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const SettingsTable& t) {
  nlohmann::ordered_json j;
  j["n_qubits"] = t.n_qubits;
  j["n_settings"] = t.n_settings;
  j["seed"] = t.seed;
  j["prep"] = detail::table_rows<nlohmann::ordered_json>(t.prep, t.n_settings, t.n_qubits);
  j["meas"] = detail::table_rows<nlohmann::ordered_json>(t.meas, t.n_settings, t.n_qubits);
  return j;
}

template <typename Json>
SettingsTable settings_from_json(const Json& j) {
  try {
    detail::require_keys(j, {"n_qubits", "n_settings", "seed", "prep", "meas"}, "settings");
    SettingsTable t;
    t.n_qubits = j.at("n_qubits").template get<std::size_t>();
    t.n_settings = j.at("n_settings").template get<std::size_t>();
    t.seed = j.at("seed").template get<std::uint64_t>();
    t.prep = detail::read_rows(j.at("prep"), t.n_settings, t.n_qubits, 5, "prep");
    t.meas = detail::read_rows(j.at("meas"), t.n_settings, t.n_qubits, 2, "meas");
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed settings: ") + e.what());
  }
}

/// Rows of the three configurations that setting r realizes on pair (i, j):
/// single on i, single on j, and the pair configuration.
inline std::array<int, 3> compatible_configurations(const SettingsTable& t, std::size_t r, std::size_t i,
                                                    std::size_t j) {
  const int pi = t.prep_at(r, i), pj = t.prep_at(r, j);
  const int mi = t.meas_at(r, i), mj = t.meas_at(r, j);
  return {pi * 3 + mi, kNumSingleConfigurations + pj * 3 + mj,
          2 * kNumSingleConfigurations + (pi * 6 + pj) * 9 + mi * 3 + mj};
}

/// delta^{(c, r)} for pair (i, j).
inline int compatibility(const Configuration& c, const SettingsTable& t, std::size_t r, std::size_t i,
                         std::size_t j) {
  auto match = [&](const std::optional<PauliState>& prep, const std::optional<PauliAxis>& obs, std::size_t k) {
    return !prep || (prep->index() == t.prep_at(r, k) && axis_index(*obs) == t.meas_at(r, k));
  };
  return match(c.prep_i, c.obs_i, i) && match(c.prep_j, c.obs_j, j) ? 1 : 0;
}

/// Shots indexed [s][r][m]; s is the 0-based time index (time grid.time(s + 1)).
struct BitstringDataset {
  SettingsTable settings;
  TimeGrid grid;
  std::size_t n_shots = 0;
  std::vector<Bitstring> shots;

  std::size_t offset(std::size_t s, std::size_t r) const { return (s * settings.n_settings + r) * n_shots; }
  std::span<const Bitstring> shots_at(std::size_t s, std::size_t r) const {
    return {shots.data() + offset(s, r), n_shots};
  }

  void validate() const {
    settings.validate();
    grid.validate();
    if (n_shots < 1) throw EmptyDataset("dataset has no shots");
    if (shots.size() != grid.n_points * settings.n_settings * n_shots)
      throw DimensionMismatch("dataset shot count does not match its header");
    const Bitstring limit = settings.n_qubits >= 64 ? ~Bitstring(0) : (Bitstring(1) << settings.n_qubits) - 1;
    for (auto b : shots)
      if (b > limit) throw ValidationError("shot has more bits than qubits");
  }
};

namespace detail {

inline nlohmann::ordered_json data_header(const SettingsTable& t, const TimeGrid& g, std::size_t n_shots) {
  nlohmann::ordered_json h;
  h["n_qubits"] = t.n_qubits;
  h["n_settings"] = t.n_settings;
  h["n_shots"] = n_shots;
  h["n_times"] = g.n_points;
  h["dt"] = g.dt;
  h["seed"] = t.seed;
  h["prep"] = table_rows<nlohmann::ordered_json>(t.prep, t.n_settings, t.n_qubits);
  h["meas"] = table_rows<nlohmann::ordered_json>(t.meas, t.n_settings, t.n_qubits);
  return h;
}

inline nlohmann::ordered_json parse_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(std::string(what) + " is truncated");
  try {
    return nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

struct Header {
  SettingsTable settings;
  TimeGrid grid;
  std::size_t n_shots = 0;
};

inline Header read_header(std::istream& is, bool with_shots) {
  const auto h = parse_line(is, "dataset header");
  try {
    require_keys(h, {"n_qubits", "n_settings", "n_shots", "n_times", "dt", "seed", "prep", "meas"}, "dataset header");
    Header out;
    auto& t = out.settings;
    t.n_qubits = h.at("n_qubits").get<std::size_t>();
    t.n_settings = h.at("n_settings").get<std::size_t>();
    t.seed = h.at("seed").get<std::uint64_t>();
    t.prep = read_rows(h.at("prep"), t.n_settings, t.n_qubits, 5, "prep");
    t.meas = read_rows(h.at("meas"), t.n_settings, t.n_qubits, 2, "meas");
    t.validate();
    out.grid = {h.at("dt").get<double>(), h.at("n_times").get<std::size_t>()};
    out.grid.validate();
    out.n_shots = h.at("n_shots").get<std::size_t>();
    if (with_shots && out.n_shots < 1) throw EmptyDataset("dataset has no shots");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed dataset header: ") + e.what());
  }
}

template <typename Json>
void check_record_position(const Json& rec, std::size_t s, std::size_t r) {
  if (rec.at("t").template get<std::size_t>() != s + 1 || rec.at("r").template get<std::size_t>() != r)
    throw ValidationError("dataset records are out of order at t=" + std::to_string(s + 1) +
                          ", r=" + std::to_string(r));
}

}  // namespace detail

/// Header line, then one line per (t, r) with t running 1..N_T outermost.
inline void write_dataset(std::ostream& os, const BitstringDataset& d) {
  os << detail::data_header(d.settings, d.grid, d.n_shots).dump() << '\n';
  const std::size_t n = d.settings.n_qubits;
  for (std::size_t s = 0; s < d.grid.n_points; ++s) {
    for (std::size_t r = 0; r < d.settings.n_settings; ++r) {
      os << "{\"t\":" << s + 1 << ",\"r\":" << r << ",\"shots\":[";
      const auto shots = d.shots_at(s, r);
      for (std::size_t m = 0; m < shots.size(); ++m) {
        if (m) os << ',';
        os << '"' << bitstring_to_string(shots[m], n) << '"';
      }
      os << "]}\n";
    }
  }
  if (!os) throw IoError("failed to write dataset");
}

inline BitstringDataset read_dataset(std::istream& is) {
  auto header = detail::read_header(is, true);
  BitstringDataset d{std::move(header.settings), header.grid, header.n_shots, {}};
  const std::size_t n = d.settings.n_qubits;
  d.shots.reserve(d.grid.n_points * d.settings.n_settings * d.n_shots);
  for (std::size_t s = 0; s < d.grid.n_points; ++s) {
    for (std::size_t r = 0; r < d.settings.n_settings; ++r) {
      const auto rec = detail::parse_line(is, "dataset record");
      try {
        detail::require_keys(rec, {"t", "r", "shots"}, "dataset record");
        detail::check_record_position(rec, s, r);
        const auto& shots = rec.at("shots");
        if (shots.size() != d.n_shots) throw DimensionMismatch("record has the wrong number of shots");
        for (const auto& v : shots) {
          const auto& str = v.get_ref<const std::string&>();
          if (str.size() != n) throw DimensionMismatch("shot '" + str + "' does not have one bit per qubit");
          d.shots.push_back(bitstring_from_string(str));
        }
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed dataset record: ") + e.what());
      }
    }
  }
  return d;
}

/// Per-setting expectation values <Z_k>^{(r)} and <Z_i Z_j>^{(r)} of the
/// rotated measurement, for every time point. This is what the estimators
/// consume; it is filled either from shots or from exact probabilities.
struct ExpectationTable {
  std::size_t n_qubits = 0;
  std::size_t n_times = 0;
  std::size_t n_settings = 0;
  std::vector<double> values;  // [s][r][observable], singles first then pairs

  std::size_t n_observables() const { return n_qubits + num_pairs(n_qubits); }
  std::size_t slot(std::size_t s, std::size_t r) const { return (s * n_settings + r) * n_observables(); }
  double single(std::size_t s, std::size_t r, std::size_t k) const { return values[slot(s, r) + k]; }
  double pair(std::size_t s, std::size_t r, std::size_t i, std::size_t j) const {
    return values[slot(s, r) + n_qubits + pair_index(i, j, n_qubits)];
  }
};

/// Expectations of one pair, [s][r]. Memory is O(N_T R), independent of N.
struct PairSettingMeans {
  std::size_t i = 0, j = 1;
  std::size_t n_times = 0;
  std::size_t n_settings = 0;
  std::vector<double> zi, zj, zij;
};

inline PairSettingMeans pair_setting_means(const BitstringDataset& d, std::size_t i, std::size_t j) {
  const std::size_t n = d.settings.n_qubits;
  if (i >= j || j >= n) throw ValidationError("pair must satisfy i < j < N");
  if (d.n_shots < 1 || d.grid.n_points < 1 || d.settings.n_settings < 1)
    throw EmptyDataset("dataset has no shots");
  PairSettingMeans out{i, j, d.grid.n_points, d.settings.n_settings, {}, {}, {}};
  const std::size_t total = out.n_times * out.n_settings;
  out.zi.resize(total);
  out.zj.resize(total);
  out.zij.resize(total);
  const Bitstring bi = qubit_mask(n, i), bj = qubit_mask(n, j);
  const double inv = 1.0 / double(d.n_shots);
  for (std::size_t s = 0; s < out.n_times; ++s) {
    for (std::size_t r = 0; r < out.n_settings; ++r) {
      long si = 0, sj = 0, sij = 0;
      for (auto b : d.shots_at(s, r)) {
        const int xi = (b & bi) ? -1 : 1, xj = (b & bj) ? -1 : 1;
        si += xi;
        sj += xj;
        sij += xi * xj;
      }
      const std::size_t k = s * out.n_settings + r;
      out.zi[k] = double(si) * inv;
      out.zj[k] = double(sj) * inv;
      out.zij[k] = double(sij) * inv;
    }
  }
  return out;
}

inline PairSettingMeans pair_setting_means(const ExpectationTable& t, std::size_t i, std::size_t j) {
  if (i >= j || j >= t.n_qubits) throw ValidationError("pair must satisfy i < j < N");
  if (t.n_times < 1 || t.n_settings < 1) throw EmptyDataset("expectation table is empty");
  PairSettingMeans out{i, j, t.n_times, t.n_settings, {}, {}, {}};
  const std::size_t total = t.n_times * t.n_settings;
  out.zi.resize(total);
  out.zj.resize(total);
  out.zij.resize(total);
  for (std::size_t s = 0; s < t.n_times; ++s) {
    for (std::size_t r = 0; r < t.n_settings; ++r) {
      const std::size_t k = s * t.n_settings + r;
      out.zi[k] = t.single(s, r, i);
      out.zj[k] = t.single(s, r, j);
      out.zij[k] = t.pair(s, r, i, j);
    }
  }
  return out;
}

/// Estimated O_c(t_s) for the configurations observed on one pair.
struct ObservedSeries {
  std::size_t i = 0, j = 1;
  std::vector<Configuration> configurations;
  Eigen::MatrixXd series;  // [c][s]
  std::vector<int> weights;

  std::size_t size() const { return configurations.size(); }
  std::vector<int> rows() const {
    std::vector<int> out;
    out.reserve(configurations.size());
    for (const auto& c : configurations) out.push_back(c.index());
    return out;
  }
};

/// Uniform average over compatible settings, configurations in canonical
/// order, zero-weight ones dropped. `draws` lists the settings to use (with
/// repetition, for bootstrap); empty means every setting once.
inline ObservedSeries accumulate_series(const PairSettingMeans& m, const SettingsTable& t,
                                        std::span<const std::size_t> draws = {}) {
  if (m.n_settings != t.n_settings) throw DimensionMismatch("settings table does not match the data");
  if (m.n_times < 1 || m.n_settings < 1) throw EmptyDataset("no data for this pair");
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kNumConfigurations, Eigen::Index(m.n_times));
  std::vector<int> weights(kNumConfigurations, 0);
  auto add = [&](std::size_t r) {
    const auto rows = compatible_configurations(t, r, m.i, m.j);
    for (int c : rows) ++weights[c];
    for (std::size_t s = 0; s < m.n_times; ++s) {
      const std::size_t k = s * m.n_settings + r;
      sums(rows[0], Eigen::Index(s)) += m.zi[k];
      sums(rows[1], Eigen::Index(s)) += m.zj[k];
      sums(rows[2], Eigen::Index(s)) += m.zij[k];
    }
  };
  if (draws.empty()) {
    for (std::size_t r = 0; r < m.n_settings; ++r) add(r);
  } else {
    for (auto r : draws) {
      if (r >= m.n_settings) throw ValidationError("setting draw out of range");
      add(r);
    }
  }
  ObservedSeries out;
  out.i = m.i;
  out.j = m.j;
  const auto& all = m_max().row_labels;
  std::vector<int> kept;
  for (int c = 0; c < kNumConfigurations; ++c)
    if (weights[c] > 0) kept.push_back(c);
  out.series.resize(Eigen::Index(kept.size()), Eigen::Index(m.n_times));
  for (std::size_t q = 0; q < kept.size(); ++q) {
    out.configurations.push_back(all[kept[q]]);
    out.weights.push_back(weights[kept[q]]);
    out.series.row(Eigen::Index(q)) = sums.row(kept[q]) / double(weights[kept[q]]);
  }
  return out;
}

inline ObservedSeries estimate_series(const BitstringDataset& d, std::size_t i, std::size_t j) {
  return accumulate_series(pair_setting_means(d, i, j), d.settings);
}

/// Calls visit(s, r, rho(t_{s+1})) for every setting. Settings sharing a
/// preparation row share one evolution; groups run on separate workers.
template <typename Visit>
void for_each_evolved_setting(const LiouvillianModel& model, const SettingsTable& t, const TimeGrid& grid,
                              std::size_t substeps, std::size_t threads, Visit&& visit) {
  t.validate();
  grid.validate();
  if (model.n_qubits() != t.n_qubits) throw DimensionMismatch("model and settings disagree on N");
  if (t.n_qubits > kMaxSimulatedQubits) throw TooLarge("too many qubits for the dense simulator");
  std::map<std::vector<std::uint8_t>, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < t.n_settings; ++r)
    groups[std::vector<std::uint8_t>(t.prep.begin() + std::ptrdiff_t(r * t.n_qubits),
                                     t.prep.begin() + std::ptrdiff_t((r + 1) * t.n_qubits))]
        .push_back(r);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [row, members] : groups) order.push_back(&members);
  const LindbladIntegrator integrator(model);
  parallel_for(order.size(), threads, [&](std::size_t g) {
    const auto& members = *order[g];
    const auto states = integrator.evolve(DensityMatrix::from_product(t.initial_state(members.front())), grid,
                                          substeps);
    for (std::size_t s = 0; s < states.size(); ++s)
      for (auto r : members) visit(s, r, states[s]);
  });
}

/// Samples N_M shots per (t, r). Each (t, r) has its own random stream, so the
/// dataset does not depend on the thread count.
inline BitstringDataset simulate_dataset(const LiouvillianModel& model, const SettingsTable& t,
                                         const TimeGrid& grid, std::size_t n_shots, std::size_t substeps,
                                         std::uint64_t seed, std::size_t threads = 1) {
  if (n_shots < 1) throw ValidationError("need N_M >= 1");
  BitstringDataset d{t, grid, n_shots, {}};
  d.shots.resize(grid.n_points * t.n_settings * n_shots);
  for_each_evolved_setting(model, t, grid, substeps, threads,
                           [&](std::size_t s, std::size_t r, const DensityMatrix& rho) {
                             Rng rng = make_stream(seed, kShotStream, s, r);
                             const auto basis = t.basis(r);
                             const auto shots = sample_bitstrings(rho, basis, n_shots, rng);
                             std::copy(shots.begin(), shots.end(), d.shots.begin() + std::ptrdiff_t(d.offset(s, r)));
                           });
  return d;
}

/// Infinite-shot replacement for simulate_dataset: exact rotated expectations.
inline ExpectationTable exact_expectation_table(const LiouvillianModel& model, const SettingsTable& t,
                                                const TimeGrid& grid, std::size_t substeps,
                                                std::size_t threads = 1) {
  const std::size_t n = t.n_qubits;
  ExpectationTable out{n, grid.n_points, t.n_settings, {}};
  out.values.resize(grid.n_points * t.n_settings * out.n_observables());
  const auto pairs = all_pairs(n);
  for_each_evolved_setting(model, t, grid, substeps, threads,
                           [&](std::size_t s, std::size_t r, const DensityMatrix& rho) {
                             double* v = out.values.data() + out.slot(s, r);
                             for (std::size_t k = 0; k < n; ++k) v[k] = exact_expectation(rho, {{k, t.meas_axis(r, k)}});
                             for (std::size_t p = 0; p < pairs.size(); ++p) {
                               const auto [i, j] = pairs[p];
                               v[n + p] = exact_expectation(rho, {{i, t.meas_axis(r, i)}, {j, t.meas_axis(r, j)}});
                             }
                           });
  return out;
}

inline ObservedSeries estimate_series_exact(const LiouvillianModel& model, const SettingsTable& t,
                                            const TimeGrid& grid, std::size_t i, std::size_t j,
                                            std::size_t substeps = 32) {
  return accumulate_series(pair_setting_means(exact_expectation_table(model, t, grid, substeps), i, j), t);
}

/// Exact-mode sidecar: the dataset header (n_shots = 0) followed by one line
/// per (t, r) holding {"t", "r", "z": [N], "zz": [N(N-1)/2]}.
inline void write_expectations(std::ostream& os, const ExpectationTable& e, const SettingsTable& t,
                               const TimeGrid& grid) {
  os << detail::data_header(t, grid, 0).dump() << '\n';
  for (std::size_t s = 0; s < e.n_times; ++s) {
    for (std::size_t r = 0; r < e.n_settings; ++r) {
      nlohmann::ordered_json rec;
      rec["t"] = s + 1;
      rec["r"] = r;
      const double* v = e.values.data() + e.slot(s, r);
      rec["z"] = std::vector<double>(v, v + e.n_qubits);
      rec["zz"] = std::vector<double>(v + e.n_qubits, v + e.n_observables());
      os << rec.dump() << '\n';
    }
  }
  if (!os) throw IoError("failed to write expectation table");
}

struct ExpectationFile {
  SettingsTable settings;
  TimeGrid grid;
  ExpectationTable table;
};

inline ExpectationFile read_expectations(std::istream& is) {
  auto header = detail::read_header(is, false);
  ExpectationFile f{std::move(header.settings), header.grid, {}};
  auto& e = f.table;
  e = {f.settings.n_qubits, f.grid.n_points, f.settings.n_settings, {}};
  e.values.reserve(e.n_times * e.n_settings * e.n_observables());
  for (std::size_t s = 0; s < e.n_times; ++s) {
    for (std::size_t r = 0; r < e.n_settings; ++r) {
      const auto rec = detail::parse_line(is, "expectation record");
      try {
        detail::require_keys(rec, {"t", "r", "z", "zz"}, "expectation record");
        detail::check_record_position(rec, s, r);
        const auto z = rec.at("z").get<std::vector<double>>();
        const auto zz = rec.at("zz").get<std::vector<double>>();
        if (z.size() != e.n_qubits || zz.size() != num_pairs(e.n_qubits))
          throw DimensionMismatch("expectation record has the wrong length");
        e.values.insert(e.values.end(), z.begin(), z.end());
        e.values.insert(e.values.end(), zz.begin(), zz.end());
      } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("malformed expectation record: ") + ex.what());
      }
    }
  }
  return f;
}

}  // namespace liouvlearn
