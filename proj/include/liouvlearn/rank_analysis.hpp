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

#include <Eigen/Dense>

#include <algorithm>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "liouvlearn/coefficient_matrix.hpp"
#include "liouvlearn/errors.hpp"
#include "liouvlearn/liouvillian.hpp"
#include "liouvlearn/measurement.hpp"
#include "liouvlearn/parallel.hpp"
#include "liouvlearn/rng.hpp"

namespace liouvlearn {

inline constexpr std::uint64_t kRankStream = 0x7a4c;

/// Span of a growing set of M_max rows. Rows are integer vectors, so a row is
/// either exactly dependent (residual at roundoff) or clearly independent.
class RowSpan {
 public:
  explicit RowSpan(const CoefficientMatrixMax& m = m_max()) : m_(&m) {}

  void clear() {
    rank_ = 0;
    seen_.reset();
  }
  int rank() const { return rank_; }
  bool full() const { return rank_ == kNumParameters; }

  /// Adds configuration row c; returns true if the rank grew.
  bool add(int c) {
    if (full() || seen_.test(std::size_t(c))) return false;
    seen_.set(std::size_t(c));
    Eigen::Matrix<double, kNumParameters, 1> w = m_->entries.row(c).transpose();
    const double norm = w.norm();
    if (norm == 0.0) return false;
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < rank_; ++k) w -= basis_.col(k).dot(w) * basis_.col(k);
    const double rest = w.norm();
    if (rest <= 1e-8 * norm) return false;
    basis_.col(rank_++) = w / rest;
    return true;
  }

 private:
  const CoefficientMatrixMax* m_;
  Eigen::Matrix<double, kNumParameters, kNumParameters> basis_;
  int rank_ = 0;
  std::bitset<kNumConfigurations> seen_;
};

/// Number of leading settings after which pair (i, j) becomes full rank, or
/// nullopt if all R settings do not suffice.
inline std::optional<std::size_t> settings_to_full_rank(const SettingsTable& t, std::size_t i, std::size_t j,
                                                        RowSpan& span) {
  span.clear();
  for (std::size_t r = 0; r < t.n_settings; ++r) {
    for (int c : compatible_configurations(t, r, i, j)) span.add(c);
    if (span.full()) return r + 1;
  }
  return std::nullopt;
}

inline bool pair_full_rank(const SettingsTable& t, std::size_t i, std::size_t j) {
  RowSpan span;
  return settings_to_full_rank(t, i, j, span).has_value();
}

struct GumbelFit {
  double r0 = 0.0;
  double mu = 0.0;
  double residual = 0.0;  // RMS over grid points
  int iterations = 0;
};

inline double gumbel(double r, double r0, double mu) { return std::exp(-std::exp(-(r - r0) / mu)); }

struct RankScanResult {
  std::vector<std::size_t> r_values;
  std::vector<double> probabilities;
  std::vector<std::size_t> n_samples;
  /// Fewest leading settings that made any sample full rank.
  std::optional<std::size_t> min_full_rank_settings;
  std::optional<GumbelFit> fit;
};

struct MultiPairScanResult {
  std::vector<std::size_t> r_values;
  std::vector<std::size_t> n_values;
  Eigen::MatrixXd probabilities;  // [R][N]
  std::size_t n_samples = 0;
  struct Contour {
    double r0_tilde = 0.0;
    double mu_tilde = 0.0;
    std::vector<std::pair<std::size_t, double>> crossings;  // (N, R at p = 0.5)
  };
  std::optional<Contour> iso_fit;
};

inline RankScanResult single_pair_rank_probability(const std::vector<std::size_t>& r_grid, std::size_t n_samples,
                                                   std::uint64_t seed, std::size_t threads = 1) {
  if (n_samples < 1) throw ValidationError("need at least one sample per grid point");
  RankScanResult out;
  out.r_values = r_grid;
  out.probabilities.assign(r_grid.size(), 0.0);
  out.n_samples.assign(r_grid.size(), n_samples);
  std::vector<std::size_t> fastest(r_grid.size(), 0);
  for (auto r : r_grid)
    if (r < 1) throw ValidationError("R must be >= 1");
  parallel_for(r_grid.size(), threads, [&](std::size_t g) {
    Rng rng = make_stream(seed, kRankStream, r_grid[g], 2);
    RowSpan span;
    std::size_t hits = 0, best = 0;
    for (std::size_t k = 0; k < n_samples; ++k) {
      const auto t = draw_settings(2, r_grid[g], rng);
      if (const auto needed = settings_to_full_rank(t, 0, 1, span)) {
        ++hits;
        best = best ? std::min(best, *needed) : *needed;
      }
    }
    out.probabilities[g] = double(hits) / double(n_samples);
    fastest[g] = best;
  });
  for (auto f : fastest)
    if (f && (!out.min_full_rank_settings || f < *out.min_full_rank_settings)) out.min_full_rank_settings = f;
  return out;
}

/// Unweighted least squares of the Gumbel curve by Gauss-Newton with step halving.
inline GumbelFit fit_gumbel(const RankScanResult& scan) {
  const std::size_t n = scan.r_values.size();
  if (scan.probabilities.size() != n) throw DimensionMismatch("scan has mismatched columns");
  std::size_t interior = 0;
  for (double p : scan.probabilities) interior += p > 0.0 && p < 1.0;
  if (interior < 3) throw DegenerateData("Gumbel fit needs at least 3 grid points with 0 < p < 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scan.r_values[a] < scan.r_values[b]; });
  auto first_reaching = [&](double level) -> std::optional<double> {
    for (auto k : order)
      if (scan.probabilities[k] >= level) return double(scan.r_values[k]);
    return std::nullopt;
  };
  const double r_min = double(scan.r_values[order.front()]), r_max = double(scan.r_values[order.back()]);
  double r0 = first_reaching(std::exp(-1.0)).value_or(r_max);
  double mu = (first_reaching(0.9).value_or(r_max) - first_reaching(0.37).value_or(r0)) / 2.0;
  if (!(mu > 0.0)) mu = std::max((r_max - r_min) / double(std::max<std::size_t>(n, 2) - 1), 1.0);

  auto sse = [&](double a, double m) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = gumbel(double(scan.r_values[k]), a, m) - scan.probabilities[k];
      s += e * e;
    }
    return s;
  };
  GumbelFit fit;
  double current = sse(r0, mu);
  for (fit.iterations = 1; fit.iterations <= 200; ++fit.iterations) {
    Eigen::MatrixXd jac(Eigen::Index(n), 2);
    Eigen::VectorXd res{Eigen::Index(n)};
    for (std::size_t k = 0; k < n; ++k) {
      const double z = (double(scan.r_values[k]) - r0) / mu;
      const double f = gumbel(double(scan.r_values[k]), r0, mu);
      const double g = f * std::exp(-z);  // -df/dz
      jac(Eigen::Index(k), 0) = -g / mu;  // df/dr0
      jac(Eigen::Index(k), 1) = -g * z / mu;  // df/dmu
      res[Eigen::Index(k)] = scan.probabilities[k] - f;
    }
    const Eigen::Vector2d step = jac.colPivHouseholderQr().solve(res);
    if (!step.allFinite()) throw NoConvergence("Gumbel fit produced a non-finite step");
    double scale = 1.0;
    double a = r0 + step[0], m = mu + step[1];
    double trial = m > 0.0 ? sse(a, m) : INFINITY;
    while (!(trial <= current) && scale > 1e-10) {
      scale *= 0.5;
      a = r0 + scale * step[0];
      m = mu + scale * step[1];
      trial = m > 0.0 ? sse(a, m) : INFINITY;
    }
    // No descent even for a tiny step: stationary to roundoff.
    if (!(trial <= current)) break;
    const double change = scale * step.cwiseAbs().maxCoeff();
    r0 = a;
    mu = m;
    current = trial;
    if (change < 1e-8) break;
  }
  if (fit.iterations > 200) throw NoConvergence("Gumbel fit did not converge in 200 iterations");
  fit.r0 = r0;
  fit.mu = mu;
  fit.residual = std::sqrt(current / double(n));
  return fit;
}

/// Linear interpolation of the first p = `level` crossing along an R grid.
inline std::optional<double> contour_crossing(const std::vector<std::size_t>& r_values,
                                              const std::vector<double>& p, double level = 0.5) {
  for (std::size_t k = 0; k + 1 < r_values.size(); ++k) {
    if (p[k] < level && p[k + 1] >= level) {
      const double f = (level - p[k]) / (p[k + 1] - p[k]);
      return double(r_values[k]) + f * double(r_values[k + 1] - r_values[k]);
    }
  }
  if (!p.empty() && p[0] == level) return double(r_values[0]);
  return std::nullopt;
}

/// Fits R = r0_tilde + mu_tilde ln N through the p = 0.5 crossings of each
/// N column of p[R][N]; nullopt if fewer than two distinct N cross.
inline std::optional<MultiPairScanResult::Contour> fit_contour(const std::vector<std::size_t>& r_grid,
                                                                const std::vector<std::size_t>& n_grid,
                                                                const Eigen::MatrixXd& probabilities) {
  MultiPairScanResult::Contour contour;
  std::vector<std::size_t> order(r_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r_grid[a] < r_grid[b]; });
  std::vector<std::size_t> sorted_r;
  for (auto k : order) sorted_r.push_back(r_grid[k]);
  for (std::size_t h = 0; h < n_grid.size(); ++h) {
    std::vector<double> p;
    for (auto k : order) p.push_back(probabilities(Eigen::Index(k), Eigen::Index(h)));
    if (const auto r = contour_crossing(sorted_r, p)) contour.crossings.emplace_back(n_grid[h], *r);
  }
  std::vector<double> logs;
  for (const auto& [n, r] : contour.crossings) logs.push_back(std::log(double(n)));
  const bool spread = !logs.empty() && *std::max_element(logs.begin(), logs.end()) >
                                           *std::min_element(logs.begin(), logs.end());
  if (contour.crossings.size() >= 2 && spread) {
    Eigen::MatrixXd a(Eigen::Index(logs.size()), 2);
    Eigen::VectorXd b(Eigen::Index(logs.size()));
    for (std::size_t k = 0; k < logs.size(); ++k) {
      a(Eigen::Index(k), 0) = 1.0;
      a(Eigen::Index(k), 1) = logs[k];
      b[Eigen::Index(k)] = contour.crossings[k].second;
    }
    const Eigen::Vector2d beta = a.colPivHouseholderQr().solve(b);
    contour.r0_tilde = beta[0];
    contour.mu_tilde = beta[1];
    return contour;
  }
  return std::nullopt;
}

inline MultiPairScanResult multi_pair_rank_probability(const std::vector<std::size_t>& r_grid,
                                                       const std::vector<std::size_t>& n_grid,
                                                       std::size_t n_samples, std::uint64_t seed,
                                                       std::size_t threads = 1) {
  if (n_samples < 1) throw ValidationError("need at least one sample per grid point");
  for (auto n : n_grid)
    if (n < 2) throw ValidationError("every N must be >= 2");
  for (auto r : r_grid)
    if (r < 1) throw ValidationError("R must be >= 1");
  MultiPairScanResult out;
  out.r_values = r_grid;
  out.n_values = n_grid;
  out.n_samples = n_samples;
  out.probabilities = Eigen::MatrixXd::Zero(Eigen::Index(r_grid.size()), Eigen::Index(n_grid.size()));
  const std::size_t cells = r_grid.size() * n_grid.size();
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t g = cell / n_grid.size(), h = cell % n_grid.size();
    const std::size_t n = n_grid[h];
    Rng rng = make_stream(seed, kRankStream, r_grid[g], n);
    const auto pairs = all_pairs(n);
    RowSpan span;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n_samples; ++k) {
      const auto t = draw_settings(n, r_grid[g], rng);
      bool all = true;
      for (auto [i, j] : pairs)
        if (!settings_to_full_rank(t, i, j, span)) {
          all = false;
          break;
        }
      hits += all;
    }
    out.probabilities(Eigen::Index(g), Eigen::Index(h)) = double(hits) / double(n_samples);
  });

  out.iso_fit = fit_contour(r_grid, n_grid, out.probabilities);
  return out;
}

/// Smallest R for which all N(N-1)/2 pairs are full rank with probability
/// delta under the Gumbel model with independent pairs.
inline std::size_t recommend_r(std::size_t n_qubits, double delta, const GumbelFit& fit) {
  if (n_qubits < 2) throw ValidationError("need N >= 2");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("target probability must lie in (0, 1)");
  if (!(fit.mu > 0.0)) throw ValidationError("Gumbel width must be positive");
  const double pairs = double(n_qubits) * double(n_qubits - 1) / 2.0;
  const double r = fit.r0 + fit.mu * (std::log(pairs) - std::log(std::abs(std::log(delta))));
  return std::size_t(std::max(1.0, std::ceil(r - 1e-9)));
}

inline void write_scan_csv(std::ostream& os, const RankScanResult& s) {
  os << "R,N,p_hat,n_samples\n";
  for (std::size_t k = 0; k < s.r_values.size(); ++k)
    os << s.r_values[k] << ",2," << s.probabilities[k] << ',' << s.n_samples[k] << '\n';
}

inline void write_scan_csv(std::ostream& os, const MultiPairScanResult& s) {
  os << "R,N,p_hat,n_samples\n";
  for (std::size_t h = 0; h < s.n_values.size(); ++h)
    for (std::size_t k = 0; k < s.r_values.size(); ++k)
      os << s.r_values[k] << ',' << s.n_values[h] << ',' << s.probabilities(Eigen::Index(k), Eigen::Index(h)) << ','
         << s.n_samples << '\n';
}

inline nlohmann::ordered_json to_json(const GumbelFit& f) {
  nlohmann::ordered_json j;
  j["r0"] = f.r0;
  j["mu"] = f.mu;
  j["residual"] = f.residual;
  return j;
}

inline nlohmann::ordered_json to_json(const MultiPairScanResult::Contour& c) {
  nlohmann::ordered_json j;
  j["r0_tilde"] = c.r0_tilde;
  j["mu_tilde"] = c.mu_tilde;
  j["crossings"] = nlohmann::ordered_json::array();
  for (const auto& [n, r] : c.crossings) j["crossings"].push_back({{"N", n}, {"R", r}});
  return j;
}

}  // namespace liouvlearn
