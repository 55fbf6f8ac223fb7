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
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "liouvlearn/coefficient_matrix.hpp"
#include "liouvlearn/configuration.hpp"
#include "liouvlearn/errors.hpp"
#include "liouvlearn/liouvillian.hpp"
#include "liouvlearn/measurement.hpp"
#include "liouvlearn/parallel.hpp"
#include "liouvlearn/rng.hpp"
#include "liouvlearn/simulator.hpp"

namespace liouvlearn {

inline constexpr double kRankTolerance = 1e-10;
inline constexpr double kIllConditioned = 1e12;
/// A larger candidate degree must beat the best held-out residual by this
/// fraction of the data's RMS to be preferred.
inline constexpr double kDegreeTieTolerance = 1e-9;
inline constexpr std::uint64_t kFoldStream = 0xf01d;
inline constexpr std::uint64_t kBootstrapStream = 0xb007;

/// Moore-Penrose pseudo-inverse with singular values below tol * sigma_max dropped.
struct Pseudoinverse {
  Eigen::MatrixXd matrix;
  Eigen::Index rank = 0;
  Eigen::VectorXd singular_values;
};

inline Pseudoinverse pseudoinverse(const Eigen::MatrixXd& a, double tol = kRankTolerance) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Pseudoinverse out;
  out.singular_values = sv;
  const double cut = sv.size() ? tol * sv[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv[k] > cut && sv[k] > 0.0) {
      inv[k] = 1.0 / sv[k];
      ++out.rank;
    }
  out.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

inline Eigen::Index matrix_rank(const Eigen::MatrixXd& a, double tol = kRankTolerance) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  return (sv.array() > tol * sv[0]).count();
}

// ---------------------------------------------------------------------------
// Pair systems

struct PairSystem {
  std::size_t i = 0, j = 1;
  Eigen::MatrixXd m;  // C x 51
  ObservedSeries series;
  Eigen::Index rank = 0;
  bool full_rank = false;
  Eigen::MatrixXd pinv;  // 51 x C
  Eigen::MatrixXd y;     // 51 x N_T
};

inline PairSystem assemble_pair_system(const CoefficientMatrixMax& mm, const ObservedSeries& series) {
  if (series.size() == 0) throw EmptyDataset("pair has no observed configurations");
  PairSystem sys;
  sys.i = series.i;
  sys.j = series.j;
  sys.m = slice_rows(mm, series.rows());
  sys.series = series;
  auto p = pseudoinverse(sys.m);
  sys.rank = p.rank;
  sys.full_rank = p.rank == kNumParameters;
  sys.pinv = std::move(p.matrix);
  sys.y = sys.pinv * series.series;
  return sys;
}

// ---------------------------------------------------------------------------
// Polynomial fits

struct PolynomialFit {
  int degree = 1;
  Eigen::VectorXd coefficients;  // beta_0 .. beta_D
  double derivative_at_zero = 0.0;
  double residual = 0.0;  // RMS on the fitted points
  double condition_number = 0.0;
  bool ill_conditioned = false;

  double operator()(double t) const {
    double v = 0.0;
    for (Eigen::Index d = coefficients.size() - 1; d >= 0; --d) v = v * t + coefficients[d];
    return v;
  }
};

/// Least-squares polynomial of fixed degree on fixed sample times. The
/// pseudo-inverse is computed once and reused for every value vector. Columns
/// are scaled by t_max^d before the SVD, which leaves the least-squares
/// solution unchanged and keeps the rank cut meaningful at small t.
class VandermondeFit {
 public:
  VandermondeFit(std::span<const double> times, int degree) : degree_(degree) {
    if (degree < 0) throw ValidationError("polynomial degree must be nonnegative");
    if (times.size() < std::size_t(degree) + 1)
      throw ValidationError("need at least degree + 1 points for a polynomial fit");
    for (std::size_t s = 0; s < times.size(); ++s) {
      if (!(times[s] > 0.0) || !std::isfinite(times[s])) throw ValidationError("fit times must be positive");
      if (s && !(times[s] > times[s - 1])) throw ValidationError("fit times must be strictly increasing");
    }
    scale_ = times.back();
    const Eigen::Index n = Eigen::Index(times.size()), k = degree + 1;
    Eigen::MatrixXd raw(n, k), scaled(n, k);
    for (Eigen::Index s = 0; s < n; ++s) {
      double t = 1.0, u = 1.0;
      for (Eigen::Index d = 0; d < k; ++d) {
        raw(s, d) = t;
        scaled(s, d) = u;
        t *= times[std::size_t(s)];
        u *= times[std::size_t(s)] / scale_;
      }
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(raw).singularValues();
    condition_ = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
    pinv_ = pseudoinverse(scaled).matrix;
    for (Eigen::Index d = 0; d < k; ++d) pinv_.row(d) /= std::pow(scale_, double(d));
  }

  int degree() const { return degree_; }
  double condition_number() const { return condition_; }
  const Eigen::MatrixXd& pinv() const { return pinv_; }

  Eigen::VectorXd coefficients(const Eigen::VectorXd& values) const {
    if (values.size() != pinv_.cols()) throw DimensionMismatch("value count does not match the fit times");
    return pinv_ * values;
  }

  static double evaluate(const Eigen::VectorXd& beta, double t) {
    double v = 0.0;
    for (Eigen::Index d = beta.size() - 1; d >= 0; --d) v = v * t + beta[d];
    return v;
  }

 private:
  int degree_;
  double scale_ = 1.0;
  double condition_ = 0.0;
  Eigen::MatrixXd pinv_;
};

inline PolynomialFit fit_polynomial(std::span<const double> times, std::span<const double> values, int degree) {
  if (times.size() != values.size()) throw DimensionMismatch("times and values differ in length");
  const VandermondeFit fit(times, degree);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), Eigen::Index(values.size()));
  PolynomialFit out;
  out.degree = degree;
  out.coefficients = fit.coefficients(y);
  out.derivative_at_zero = degree >= 1 ? out.coefficients[1] : 0.0;
  double sq = 0.0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    const double e = out(times[s]) - values[s];
    sq += e * e;
  }
  out.residual = std::sqrt(sq / double(times.size()));
  out.condition_number = fit.condition_number();
  out.ill_conditioned = out.condition_number > kIllConditioned;
  return out;
}

// ---------------------------------------------------------------------------
// Degree selection

enum class DegreeMode { PerEntry, Shared };

struct CrossValidationConfig {
  std::size_t k_folds = 3;
  std::vector<int> candidate_degrees{1, 2, 3, 4, 5};
  std::uint64_t fold_seed = 0;
  DegreeMode mode = DegreeMode::PerEntry;

  void validate(std::size_t n_points) const {
    if (k_folds < 2) throw ValidationError("cross-validation needs K >= 2");
    if (candidate_degrees.empty()) throw ValidationError("no candidate degrees");
    for (int d : candidate_degrees)
      if (d < 1) throw ValidationError("candidate degrees must be >= 1");
    if (candidate_degrees.size() == 1) {
      if (std::size_t(candidate_degrees[0]) + 1 > n_points)
        throw ValidationError("degree too large for the number of time points");
      return;
    }
    const int max_degree = *std::max_element(candidate_degrees.begin(), candidate_degrees.end());
    if (k_folds > n_points) throw ValidationError("more folds than time points");
    if (!(double(max_degree + 1) < double(n_points) * double(k_folds - 1) / double(k_folds)))
      throw ValidationError("largest candidate degree leaves too few training points per fold");
  }
};

/// Random partition of [0, n) into k folds whose sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_stream(seed, kFoldStream);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t p = 0; p < n; ++p) folds[p % k].push_back(perm[p]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

/// Held-out residuals of every candidate degree for series on a fixed time grid.
class CrossValidator {
 public:
  CrossValidator(std::span<const double> times, const CrossValidationConfig& cv)
      : times_(times.begin(), times.end()), degrees_(cv.candidate_degrees) {
    cv.validate(times.size());
    if (degrees_.size() == 1) return;
    const auto folds = make_folds(times.size(), cv.k_folds, cv.fold_seed);
    for (const auto& held : folds) {
      Fold f;
      f.held = held;
      std::vector<bool> is_held(times.size(), false);
      for (auto s : held) is_held[s] = true;
      std::vector<double> train_t;
      for (std::size_t s = 0; s < times.size(); ++s)
        if (!is_held[s]) {
          f.train.push_back(s);
          train_t.push_back(times[s]);
        }
      for (int d : degrees_) {
        const VandermondeFit fit(train_t, d);
        // Maps training values straight to predictions on the held-out times.
        Eigen::MatrixXd eval(Eigen::Index(held.size()), d + 1);
        for (std::size_t h = 0; h < held.size(); ++h) {
          double t = 1.0;
          for (int p = 0; p <= d; ++p, t *= times[held[h]]) eval(Eigen::Index(h), p) = t;
        }
        f.predict.push_back(eval * fit.pinv());
      }
      folds_.push_back(std::move(f));
    }
  }

  const std::vector<int>& degrees() const { return degrees_; }

  /// Mean over folds of the held-out RMS residual, one entry per candidate.
  std::vector<double> residuals(const Eigen::VectorXd& values) const {
    std::vector<double> out(degrees_.size(), 0.0);
    if (degrees_.size() == 1) return out;
    for (const auto& f : folds_) {
      Eigen::VectorXd train(Eigen::Index(f.train.size())), held(Eigen::Index(f.held.size()));
      for (std::size_t s = 0; s < f.train.size(); ++s) train[Eigen::Index(s)] = values[Eigen::Index(f.train[s])];
      for (std::size_t s = 0; s < f.held.size(); ++s) held[Eigen::Index(s)] = values[Eigen::Index(f.held[s])];
      for (std::size_t d = 0; d < degrees_.size(); ++d)
        out[d] += std::sqrt((f.predict[d] * train - held).squaredNorm() / double(held.size()));
    }
    for (auto& r : out) r /= double(folds_.size());
    return out;
  }

  /// Smallest residual wins; a larger degree must win by more than the tie
  /// tolerance, so exact ties go to the smaller degree.
  int choose(const std::vector<double>& residuals, double scale) const {
    std::vector<std::size_t> order(degrees_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return degrees_[a] < degrees_[b]; });
    const double tol = kDegreeTieTolerance * scale;
    std::size_t best = order[0];
    for (std::size_t q = 1; q < order.size(); ++q)
      if (residuals[order[q]] < residuals[best] - tol) best = order[q];
    return degrees_[best];
  }

 private:
  struct Fold {
    std::vector<std::size_t> train, held;
    std::vector<Eigen::MatrixXd> predict;
  };
  std::vector<double> times_;
  std::vector<int> degrees_;
  std::vector<Fold> folds_;
};

inline double rms(const Eigen::VectorXd& v) { return v.size() ? std::sqrt(v.squaredNorm() / double(v.size())) : 0.0; }

inline int select_degree(std::span<const double> times, std::span<const double> values,
                         const CrossValidationConfig& cv) {
  if (times.size() != values.size()) throw DimensionMismatch("times and values differ in length");
  const CrossValidator validator(times, cv);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), Eigen::Index(values.size()));
  return validator.choose(validator.residuals(y), rms(y));
}

// ---------------------------------------------------------------------------
// Pair solutions

struct PairEstimate {
  std::size_t i = 0, j = 1;
  bool full_rank = false;
  Eigen::Index rank = 0;
  std::size_t n_configurations = 0;
  ParameterVector x_hat = ParameterVector::Zero();
  std::array<int, kNumParameters> degrees{};
  int ill_conditioned_fits = 0;
};

/// Derivative at t = 0 of every Y_l(t) by polynomial fits with CV-chosen degree.
class DerivativeEstimator {
 public:
  DerivativeEstimator(const TimeGrid& grid, const CrossValidationConfig& cv)
      : times_(grid.times()), cv_(cv), validator_(times_, cv) {
    for (int d : cv.candidate_degrees) fits_.emplace_back(times_, d);
  }

  const std::vector<double>& times() const { return times_; }

  const VandermondeFit& fit_for(int degree) const {
    for (const auto& f : fits_)
      if (f.degree() == degree) return f;
    throw ValidationError("degree " + std::to_string(degree) + " is not a candidate");
  }

  /// Fills x_hat and degrees from Y (51 x N_T).
  void solve(const Eigen::MatrixXd& y, PairEstimate& out) const {
    if (y.cols() != Eigen::Index(times_.size())) throw DimensionMismatch("Y has the wrong number of time points");
    const auto& degrees = validator_.degrees();
    std::vector<int> chosen(kNumParameters, degrees[0]);
    if (degrees.size() > 1) {
      if (cv_.mode == DegreeMode::PerEntry) {
        for (int l = 0; l < kNumParameters; ++l) {
          const Eigen::VectorXd v = y.row(l).transpose();
          chosen[l] = validator_.choose(validator_.residuals(v), rms(v));
        }
      } else {
        std::vector<double> total(degrees.size(), 0.0);
        for (int l = 0; l < kNumParameters; ++l) {
          const auto r = validator_.residuals(y.row(l).transpose());
          for (std::size_t d = 0; d < r.size(); ++d) total[d] += r[d];
        }
        const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
        std::fill(chosen.begin(), chosen.end(), validator_.choose(total, rms(flat) * kNumParameters));
      }
    }
    out.ill_conditioned_fits = 0;
    for (int l = 0; l < kNumParameters; ++l) {
      const auto& fit = fit_for(chosen[l]);
      out.x_hat[l] = fit.pinv().row(1).dot(y.row(l));
      out.degrees[std::size_t(l)] = chosen[l];
      if (fit.condition_number() > kIllConditioned) ++out.ill_conditioned_fits;
    }
  }

 private:
  std::vector<double> times_;
  CrossValidationConfig cv_;
  CrossValidator validator_;
  std::vector<VandermondeFit> fits_;
};

inline PairEstimate solve_pair(const PairSystem& system, const DerivativeEstimator& estimator) {
  PairEstimate out;
  out.i = system.i;
  out.j = system.j;
  out.full_rank = system.full_rank;
  out.rank = system.rank;
  out.n_configurations = system.series.size();
  estimator.solve(system.y, out);
  return out;
}

inline PairEstimate solve_pair(const PairSystem& system, const TimeGrid& grid, const CrossValidationConfig& cv) {
  return solve_pair(system, DerivativeEstimator(grid, cv));
}

// ---------------------------------------------------------------------------
// Aggregation

/// Single-body entries of the 51-vector for the qubit in pair position 0 / 1.
inline std::array<int, 12> single_body_slots(int position) {
  std::array<int, 12> out{};
  const int h = position == 0 ? 0 : 3, d = position == 0 ? 15 : 24;
  for (int k = 0; k < 3; ++k) out[std::size_t(k)] = h + k;
  for (int k = 0; k < 9; ++k) out[std::size_t(3 + k)] = d + k;
  return out;
}

inline constexpr std::array<const char*, 12> kSingleBodyLabels{
    "h_x", "h_y", "h_z", "d_xx", "d_yy", "d_zz", "re_d_xy", "re_d_xz", "re_d_yz", "im_d_xy", "im_d_xz", "im_d_yz"};

struct SingleBodyStat {
  std::size_t qubit = 0;
  std::string label;
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
  bool from_rank_deficient = false;
};

struct LearnedLiouvillian {
  std::size_t n_qubits = 0;
  std::vector<PairEstimate> pairs;  // in all_pairs order
  LiouvillianModel aggregated;
  std::vector<SingleBodyStat> single_body_stats;  // [qubit][12]
  double min_dissipator_eigenvalue = 0.0;

  const PairEstimate& pair(std::size_t i, std::size_t j) const { return pairs.at(pair_index(i, j, n_qubits)); }
};

inline LearnedLiouvillian aggregate(const std::vector<PairEstimate>& pairs, std::size_t n) {
  if (n < 2) throw ValidationError("aggregation needs at least two qubits");
  if (pairs.size() != num_pairs(n)) throw DimensionMismatch("aggregation needs every qubit pair");
  LearnedLiouvillian out;
  out.n_qubits = n;
  out.pairs = pairs;
  std::sort(out.pairs.begin(), out.pairs.end(),
            [n](const auto& a, const auto& b) { return pair_index(a.i, a.j, n) < pair_index(b.i, b.j, n); });
  for (std::size_t p = 0; p < out.pairs.size(); ++p) {
    const auto [i, j] = all_pairs(n)[p];
    if (out.pairs[p].i != i || out.pairs[p].j != j) throw ValidationError("duplicate or missing qubit pair");
  }
  std::vector<ParameterVector> singles(n, ParameterVector::Zero());
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<const PairEstimate*, int>> all, good;
    for (const auto& e : out.pairs) {
      if (e.i != q && e.j != q) continue;
      all.emplace_back(&e, e.i == q ? 0 : 1);
      if (e.full_rank) good.emplace_back(&e, e.i == q ? 0 : 1);
    }
    const bool fallback = good.empty();
    const auto& use = fallback ? all : good;
    for (std::size_t k = 0; k < 12; ++k) {
      std::vector<double> v;
      for (const auto& [e, pos] : use) v.push_back(e->x_hat[single_body_slots(pos)[k]]);
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
      double sq = 0.0;
      for (double x : v) sq += (x - mean) * (x - mean);
      const double se = v.size() > 1 ? std::sqrt(sq / double(v.size() - 1)) / std::sqrt(double(v.size())) : 0.0;
      out.single_body_stats.push_back({q, kSingleBodyLabels[k], mean, se, fallback ? 0 : v.size(), fallback});
      singles[q][single_body_slots(0)[k]] = mean;
    }
  }
  auto& model = out.aggregated;
  model = LiouvillianModel(n);
  for (std::size_t q = 0; q < n; ++q) {
    PairParameters local = decode(singles[q]);
    model.hamiltonian.single[q] = local.h_i;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) model.dissipator.set(q, axis_from_index(a), q, axis_from_index(b), local.d(a, b));
  }
  for (const auto& e : out.pairs) {
    const PairParameters p = decode(e.x_hat);
    model.hamiltonian.coupling(e.i, e.j) = p.h_ij;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) model.dissipator.set(e.i, axis_from_index(a), e.j, axis_from_index(b), p.d(a, 3 + b));
  }
  out.min_dissipator_eigenvalue = model.dissipator.min_eigenvalue();
  return out;
}

inline double reconstruction_error(const ParameterVector& estimate, const ParameterVector& truth) {
  return (estimate - truth).lpNorm<1>();
}

// ---------------------------------------------------------------------------
// Reporting helpers

inline constexpr int kNumLambda = 39;

/// Averaged coefficient families: 1-3 |h_{i,a}|, 4-12 |d_{i,a,i,b}|, 13-21
/// |h_{i,a,i+1,b}|, 22-30 |Re d_{i,a,i+1,b}|, 31-39 |Im d_{i,a,i+1,b}|; (a, b)
/// a-major. Single-body terms average over qubits, two-body over neighbours.
inline std::array<double, kNumLambda> lambda_groups(const LiouvillianModel& m) {
  std::array<double, kNumLambda> out{};
  const std::size_t n = m.n_qubits();
  for (std::size_t q = 0; q < n; ++q) {
    for (int a = 0; a < 3; ++a) out[std::size_t(a)] += std::abs(m.hamiltonian.single[q][a]) / double(n);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        out[std::size_t(3 + 3 * a + b)] +=
            std::abs(m.dissipator.entries(Eigen::Index(3 * q + a), Eigen::Index(3 * q + b))) / double(n);
  }
  if (n < 2) return out;
  const double pairs = double(n - 1);
  for (std::size_t q = 0; q + 1 < n; ++q) {
    const auto& h = m.hamiltonian.coupling(q, q + 1);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const cplx d = m.dissipator.entries(Eigen::Index(3 * q + a), Eigen::Index(3 * (q + 1) + b));
        out[std::size_t(12 + 3 * a + b)] += std::abs(h(a, b)) / pairs;
        out[std::size_t(21 + 3 * a + b)] += std::abs(d.real()) / pairs;
        out[std::size_t(30 + 3 * a + b)] += std::abs(d.imag()) / pairs;
      }
  }
  return out;
}

inline std::string lambda_label(int lambda) {
  const char ax[] = "xyz";
  if (lambda < 1 || lambda > kNumLambda) throw ValidationError("lambda out of range");
  const int k = lambda - 1;
  if (k < 3) return std::string("h_i") + ax[k];
  auto ab = [&](int base) { return std::string{ax[(k - base) / 3], ax[(k - base) % 3]}; };
  if (k < 12) return "d_i" + ab(3).substr(0, 1) + "_i" + ab(3).substr(1);
  if (k < 21) return "h_i" + ab(12).substr(0, 1) + "_j" + ab(12).substr(1);
  if (k < 30) return "re_d_i" + ab(21).substr(0, 1) + "_j" + ab(21).substr(1);
  return "im_d_i" + ab(30).substr(0, 1) + "_j" + ab(30).substr(1);
}

struct PowerLawFit {
  double amplitude = 0.0;
  double alpha = 0.0;
  double amplitude_se = 0.0;
  double alpha_se = 0.0;
  std::size_t n_used = 0;
  std::size_t n_dropped = 0;
};

/// value = amplitude * distance^(-alpha), by least squares in log-log space.
/// Nonpositive values are dropped.
inline PowerLawFit powerlaw_refit(const std::vector<std::pair<double, double>>& points) {
  PowerLawFit out;
  std::vector<std::pair<double, double>> kept;
  for (const auto& [d, v] : points) {
    if (!(d > 0.0)) throw ValidationError("distances must be positive");
    if (v > 0.0 && std::isfinite(v))
      kept.emplace_back(std::log(d), std::log(v));
    else
      ++out.n_dropped;
  }
  std::vector<double> distinct;
  for (const auto& [x, y] : kept) distinct.push_back(x);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw DegenerateData("power-law refit needs at least 3 distinct distances with positive values");
  const Eigen::Index n = Eigen::Index(kept.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    a(k, 0) = 1.0;
    a(k, 1) = -kept[std::size_t(k)].first;
    b[k] = kept[std::size_t(k)].second;
  }
  const Eigen::Matrix2d normal = a.transpose() * a;
  const Eigen::Vector2d beta = normal.ldlt().solve(a.transpose() * b);
  const double dof = double(n - 2);
  const double sigma2 = dof > 0 ? (a * beta - b).squaredNorm() / dof : 0.0;
  const Eigen::Matrix2d cov = sigma2 * normal.inverse();
  out.amplitude = std::exp(beta[0]);
  out.alpha = beta[1];
  out.amplitude_se = out.amplitude * std::sqrt(std::max(cov(0, 0), 0.0));
  out.alpha_se = std::sqrt(std::max(cov(1, 1), 0.0));
  out.n_used = kept.size();
  return out;
}

// ---------------------------------------------------------------------------
// Full learning pass

struct LearnOptions {
  CrossValidationConfig cv;
  std::size_t n_bootstrap = 50;
  std::uint64_t bootstrap_seed = 0;
  std::size_t threads = 1;
  bool keep_traces = false;
};

struct PairOutcome {
  PairEstimate estimate;
  std::vector<ParameterVector> bootstrap;
  ParameterVector bootstrap_se = ParameterVector::Zero();
  Eigen::MatrixXd y;  // kept only when requested
  std::size_t peak_bytes = 0;
};

/// Settings drawn with replacement for bootstrap resample b; shared by all
/// pairs so resampled pair estimates stay mutually consistent.
inline std::vector<std::size_t> bootstrap_draws(std::size_t n_settings, std::uint64_t seed, std::size_t b) {
  Rng rng = make_stream(seed, kBootstrapStream, b);
  std::uniform_int_distribution<std::size_t> pick(0, n_settings - 1);
  std::vector<std::size_t> draws(n_settings);
  for (auto& r : draws) r = pick(rng);
  return draws;
}

inline PairOutcome learn_pair(const PairSettingMeans& means, const SettingsTable& settings,
                              const DerivativeEstimator& estimator, const LearnOptions& opt) {
  PairOutcome out;
  const auto system = assemble_pair_system(m_max(), accumulate_series(means, settings));
  out.estimate = solve_pair(system, estimator);
  // Working set of this pair: per-setting means, sliced matrix, pseudo-inverse, series and Y.
  out.peak_bytes = sizeof(double) * (means.zi.size() * 3 + std::size_t(system.m.size() + system.pinv.size() +
                                                                        system.series.series.size() + system.y.size()));
  if (opt.keep_traces) out.y = system.y;
  if (opt.n_bootstrap == 0) return out;
  for (std::size_t b = 0; b < opt.n_bootstrap; ++b) {
    const auto draws = bootstrap_draws(settings.n_settings, opt.bootstrap_seed, b);
    const auto resampled = assemble_pair_system(m_max(), accumulate_series(means, settings, draws));
    out.bootstrap.push_back(solve_pair(resampled, estimator).x_hat);
  }
  ParameterVector mean = ParameterVector::Zero();
  for (const auto& x : out.bootstrap) mean += x;
  mean /= double(out.bootstrap.size());
  ParameterVector var = ParameterVector::Zero();
  for (const auto& x : out.bootstrap) var += (x - mean).cwiseAbs2();
  if (out.bootstrap.size() > 1) out.bootstrap_se = (var / double(out.bootstrap.size() - 1)).cwiseSqrt();
  return out;
}

struct LearningRun {
  LearnedLiouvillian learned;
  std::vector<PairOutcome> outcomes;  // all_pairs order
  std::array<double, kNumLambda> lambda{};
  std::array<double, kNumLambda> lambda_se{};
};

/// Learns every pair. `means_for(i, j)` supplies that pair's per-setting means.
template <typename MeansFor>
LearningRun learn_all_pairs(std::size_t n, const SettingsTable& settings, const TimeGrid& grid,
                            const LearnOptions& opt, MeansFor&& means_for) {
  grid.validate();
  const DerivativeEstimator estimator(grid, opt.cv);
  const auto pairs = all_pairs(n);
  LearningRun run;
  run.outcomes.resize(pairs.size());
  parallel_for(pairs.size(), opt.threads, [&](std::size_t p) {
    run.outcomes[p] = learn_pair(means_for(pairs[p].first, pairs[p].second), settings, estimator, opt);
  });
  std::vector<PairEstimate> estimates;
  for (const auto& o : run.outcomes) estimates.push_back(o.estimate);
  run.learned = aggregate(estimates, n);
  run.lambda = lambda_groups(run.learned.aggregated);
  if (opt.n_bootstrap > 1) {
    std::vector<std::array<double, kNumLambda>> samples;
    for (std::size_t b = 0; b < opt.n_bootstrap; ++b) {
      auto resampled = estimates;
      for (std::size_t p = 0; p < pairs.size(); ++p) resampled[p].x_hat = run.outcomes[p].bootstrap[b];
      samples.push_back(lambda_groups(aggregate(resampled, n).aggregated));
    }
    for (int l = 0; l < kNumLambda; ++l) {
      double mean = 0.0, sq = 0.0;
      for (const auto& s : samples) mean += s[std::size_t(l)];
      mean /= double(samples.size());
      for (const auto& s : samples) sq += (s[std::size_t(l)] - mean) * (s[std::size_t(l)] - mean);
      run.lambda_se[std::size_t(l)] = std::sqrt(sq / double(samples.size() - 1));
    }
  }
  return run;
}

}  // namespace liouvlearn
