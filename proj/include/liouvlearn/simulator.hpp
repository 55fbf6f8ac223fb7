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

// Exact Lindblad evolution of dense N-qubit density matrices.
//
// Basis index b encodes qubit k in bit (N - 1 - k): qubit 0 is the most
// significant bit, matching the leftmost tensor factor and the leftmost
// character of a printed bitstring.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "liouvlearn/errors.hpp"
#include "liouvlearn/liouvillian.hpp"
#include "liouvlearn/pauli.hpp"
#include "liouvlearn/rng.hpp"

namespace liouvlearn {

using Bitstring = std::uint64_t;

inline constexpr std::size_t kMaxSimulatedQubits = 14;

inline std::uint64_t qubit_mask(std::size_t n_qubits, std::size_t k) {
  return std::uint64_t{1} << (n_qubits - 1 - k);
}

/// Outcome bit (0 or 1) of qubit k in a basis index / bitstring.
inline int outcome_bit(Bitstring b, std::size_t k, std::size_t n_qubits) {
  return int((b >> (n_qubits - 1 - k)) & 1u);
}

inline std::string bitstring_to_string(Bitstring b, std::size_t n_qubits) {
  std::string s(n_qubits, '0');
  for (std::size_t k = 0; k < n_qubits; ++k) s[k] = outcome_bit(b, k, n_qubits) ? '1' : '0';
  return s;
}

inline Bitstring bitstring_from_string(const std::string& s) {
  if (s.empty() || s.size() > 64) throw ValidationError("bitstring length must be in [1, 64]");
  Bitstring b = 0;
  for (char c : s) {
    if (c != '0' && c != '1') throw ValidationError("bitstring '" + s + "' has a non-binary character");
    b = (b << 1) | Bitstring(c == '1');
  }
  return b;
}

struct DensityMatrix {
  std::size_t n_qubits = 0;
  Eigen::MatrixXcd entries;

  static DensityMatrix from_product(const ProductState& state) {
    if (state.empty() || state.size() > kMaxSimulatedQubits)
      throw TooLarge("density matrices support 1.." + std::to_string(kMaxSimulatedQubits) + " qubits");
    return {state.size(), dense(state)};
  }

  static DensityMatrix maximally_mixed(std::size_t n) {
    return from_product(ProductState(n, std::nullopt));
  }

  Eigen::Index dim() const { return entries.rows(); }

  /// Throws NumericalError when the matrix is not a physical state.
  void check_physical(double tolerance = 1e-10, double eigen_tolerance = 1e-8) const {
    if (!entries.allFinite()) throw NonFiniteState("density matrix has non-finite entries");
    if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > tolerance)
      throw NumericalError("density matrix is not Hermitian");
    if (std::abs(entries.trace() - cplx(1.0)) > tolerance)
      throw NumericalError("density matrix trace differs from 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(entries, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -eigen_tolerance)
      throw NumericalError("density matrix has a negative eigenvalue");
  }
};

/// Times t_s = s * dt for s = 1..n_points; t = 0 is not part of the grid.
struct TimeGrid {
  double dt = 0.0;
  std::size_t n_points = 0;

  static TimeGrid from_final_time(double t_final, std::size_t n_points) {
    if (n_points == 0) throw ValidationError("time grid needs at least 2 points");
    return TimeGrid{t_final / double(n_points), n_points};
  }

  double time(std::size_t s) const { return double(s) * dt; }
  double t_final() const { return double(n_points) * dt; }

  std::vector<double> times() const {
    std::vector<double> out(n_points);
    for (std::size_t s = 0; s < n_points; ++s) out[s] = time(s + 1);
    return out;
  }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be positive");
    if (n_points < 2) throw ValidationError("time grid needs at least 2 points");
  }
};

/// Operator stored by bit-flip pattern: A|b> = sum_f u_f[b] |b xor f>.
/// Pauli words have a single flip pattern, so sums of few-body words stay
/// compact and apply to a density matrix in O(4^N) per pattern.
class MaskOperator {
 public:
  using Factors = std::vector<std::pair<std::size_t, PauliAxis>>;

  explicit MaskOperator(std::size_t n_qubits = 0) : n_(n_qubits) {}

  std::size_t n_qubits() const { return n_; }
  bool empty() const { return terms_.empty(); }
  std::size_t num_patterns() const { return terms_.size(); }

  /// Adds coeff * prod_k sigma_{site_k}^{axis_k}; sites must be distinct.
  void add_pauli(cplx coeff, const Factors& factors) {
    if (coeff == cplx(0.0)) return;
    std::uint64_t flip = 0, sign = 0;
    int n_y = 0;
    for (auto [site, axis] : factors) {
      if (site >= n_) throw ValidationError("Pauli factor site out of range");
      const std::uint64_t bit = qubit_mask(n_, site);
      if ((flip | sign) & bit) throw ValidationError("Pauli factors must act on distinct sites");
      if (axis != PauliAxis::Z) flip |= bit;
      if (axis != PauliAxis::X) sign |= bit;
      n_y += axis == PauliAxis::Y;
    }
    static const cplx kIPowers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const cplx phase = coeff * kIPowers[n_y % 4];
    auto& u = pattern(flip);
    for (Eigen::Index b = 0; b < u.size(); ++b)
      u[b] += (std::popcount(std::uint64_t(b) & sign) & 1) ? -phase : phase;
  }

  /// Returns this * rhs.
  MaskOperator compose(const MaskOperator& rhs) const {
    MaskOperator out(n_);
    for (const auto& [f, ub] : rhs.terms_)
      for (const auto& [g, ua] : terms_) {
        auto& u = out.pattern(f ^ g);
        for (Eigen::Index b = 0; b < ub.size(); ++b) u[b] += ub[b] * ua[Eigen::Index(std::uint64_t(b) ^ f)];
      }
    return out;
  }

  MaskOperator& operator+=(const MaskOperator& rhs) {
    for (const auto& [f, u] : rhs.terms_) pattern(f) += u;
    return *this;
  }

  MaskOperator scaled(cplx s) const {
    MaskOperator out = *this;
    for (auto& [f, u] : out.terms_) u *= s;
    return out;
  }

  /// out += A * rho
  void apply_left(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& out) const {
    const Eigen::Index dim = rho.rows();
    for (const auto& [f, u] : terms_) {
      const cplx* uu = u.data();
      for (Eigen::Index c = 0; c < dim; ++c) {
        const cplx* in = rho.data() + c * dim;
        cplx* o = out.data() + c * dim;
        for (Eigen::Index r = 0; r < dim; ++r) {
          const Eigen::Index rr = Eigen::Index(std::uint64_t(r) ^ f);
          o[r] = detail_fma(uu[rr], in[rr], o[r]);
        }
      }
    }
  }

  /// out += rho * A
  void apply_right(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& out) const {
    const Eigen::Index dim = rho.rows();
    for (const auto& [f, u] : terms_) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        const cplx w = u[c];
        const cplx* in = rho.data() + Eigen::Index(std::uint64_t(c) ^ f) * dim;
        cplx* o = out.data() + c * dim;
        for (Eigen::Index r = 0; r < dim; ++r) o[r] = detail_fma(in[r], w, o[r]);
      }
    }
  }

  /// tr(rho * A)
  cplx trace_with(const Eigen::MatrixXcd& rho) const {
    cplx acc = 0.0;
    for (const auto& [f, u] : terms_)
      for (Eigen::Index b = 0; b < u.size(); ++b)
        acc += rho(b, Eigen::Index(std::uint64_t(b) ^ f)) * u[b];
    return acc;
  }

  Eigen::MatrixXcd to_dense() const {
    const Eigen::Index dim = Eigen::Index(1) << n_;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& [f, u] : terms_)
      for (Eigen::Index b = 0; b < dim; ++b) out(Eigen::Index(std::uint64_t(b) ^ f), b) += u[b];
    return out;
  }

 private:
  // Plain complex multiply-add, avoiding the NaN/Inf recovery branch of
  // the standard complex operator*.
  static cplx detail_fma(const cplx& a, const cplx& b, const cplx& acc) {
    return {acc.real() + a.real() * b.real() - a.imag() * b.imag(),
            acc.imag() + a.real() * b.imag() + a.imag() * b.real()};
  }

  Eigen::VectorXcd& pattern(std::uint64_t f) {
    auto it = terms_.find(f);
    if (it == terms_.end())
      it = terms_.emplace(f, Eigen::VectorXcd::Zero(Eigen::Index(1) << n_)).first;
    return it->second;
  }

  std::size_t n_;
  std::map<std::uint64_t, Eigen::VectorXcd> terms_;
};

/// Right-hand side of the master equation in Pauli-pattern form:
///   L[rho] = left rho + rho right + sum_p sigma_p rho B_p,
/// with left = -iH - K/2, right = iH - K/2, K = sum d_pq sigma_q sigma_p and
/// B_p = sum_q d_pq sigma_q.
class LindbladGenerator {
 public:
  explicit LindbladGenerator(const LiouvillianModel& model)
      : n_(model.n_qubits()), left_(n_), right_(n_) {
    model.validate();
    if (n_ == 0 || n_ > kMaxSimulatedQubits)
      throw TooLarge("simulator supports 1.." + std::to_string(kMaxSimulatedQubits) + " qubits");
    MaskOperator h(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (auto a : kAxes) h.add_pauli(model.hamiltonian.single[i][axis_index(a)], {{i, a}});
    for (auto [i, j] : all_pairs(n_)) {
      const auto& c = model.hamiltonian.coupling(i, j);
      for (auto a : kAxes)
        for (auto b : kAxes) h.add_pauli(c(axis_index(a), axis_index(b)), {{i, a}, {j, b}});
    }

    const auto& d = model.dissipator.entries;
    const std::size_t n_ops = 3 * n_;
    std::vector<MaskOperator> site_ops;
    site_ops.reserve(n_ops);
    for (std::size_t k = 0; k < n_ops; ++k) {
      site_ops.emplace_back(n_);
      site_ops.back().add_pauli(1.0, {{k / 3, axis_from_index(int(k % 3))}});
    }
    MaskOperator k_op(n_);
    for (std::size_t p = 0; p < n_ops; ++p) {
      MaskOperator b_p(n_);
      for (std::size_t q = 0; q < n_ops; ++q) {
        const cplx dpq = d(Eigen::Index(p), Eigen::Index(q));
        if (dpq == cplx(0.0)) continue;
        b_p += site_ops[q].scaled(dpq);
        k_op += site_ops[q].compose(site_ops[p]).scaled(dpq);
      }
      if (!b_p.empty()) sandwiches_.emplace_back(site_ops[p], std::move(b_p));
    }
    const cplx i(0.0, 1.0);
    left_ = h.scaled(-i);
    left_ += k_op.scaled(-0.5);
    right_ = h.scaled(i);
    right_ += k_op.scaled(-0.5);
  }

  std::size_t n_qubits() const { return n_; }

  /// out = L[rho]; `scratch` must have the shape of rho.
  void apply(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& out, Eigen::MatrixXcd& scratch) const {
    out.setZero();
    left_.apply_left(rho, out);
    right_.apply_right(rho, out);
    for (const auto& [p, b_p] : sandwiches_) {
      scratch.setZero();
      p.apply_left(rho, scratch);
      b_p.apply_right(scratch, out);
    }
  }

 private:
  std::size_t n_;
  MaskOperator left_, right_;
  std::vector<std::pair<MaskOperator, MaskOperator>> sandwiches_;
};

/// Fixed-step classical RK4 integrator bound to one model.
class LindbladIntegrator {
 public:
  explicit LindbladIntegrator(const LiouvillianModel& model) : gen_(model) {}

  /// States at each grid time. With `renormalize`, each output is
  /// re-Hermitized and trace-normalized before integration continues.
  std::vector<DensityMatrix> evolve(const DensityMatrix& rho0, const TimeGrid& grid,
                                    std::size_t substeps, bool renormalize = true) const {
    grid.validate();
    if (substeps < 1) throw ValidationError("substeps must be at least 1");
    if (rho0.n_qubits != gen_.n_qubits() || rho0.dim() != (Eigen::Index(1) << rho0.n_qubits))
      throw DimensionMismatch("initial state does not match the model size");
    const Eigen::Index dim = rho0.dim();
    const double h = grid.dt / double(substeps);
    Eigen::MatrixXcd rho = rho0.entries;
    Eigen::MatrixXcd k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), tmp(dim, dim),
        scratch(dim, dim);
    std::vector<DensityMatrix> out;
    out.reserve(grid.n_points);
    for (std::size_t s = 0; s < grid.n_points; ++s) {
      for (std::size_t k = 0; k < substeps; ++k) {
        gen_.apply(rho, k1, scratch);
        tmp = rho + (0.5 * h) * k1;
        gen_.apply(tmp, k2, scratch);
        tmp = rho + (0.5 * h) * k2;
        gen_.apply(tmp, k3, scratch);
        tmp = rho + h * k3;
        gen_.apply(tmp, k4, scratch);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      if (!rho.allFinite()) throw NonFiniteState("state became non-finite at grid point " + std::to_string(s + 1));
      if (renormalize) {
        tmp = 0.5 * (rho + rho.adjoint());
        rho = tmp / tmp.trace().real();
      }
      out.push_back({rho0.n_qubits, rho});
    }
    return out;
  }

 private:
  LindbladGenerator gen_;
};

inline std::vector<DensityMatrix> evolve(const LiouvillianModel& model, const DensityMatrix& rho0,
                                         const TimeGrid& grid, std::size_t substeps) {
  return LindbladIntegrator(model).evolve(rho0, grid, substeps);
}

/// Dense 2^N x 2^N Hamiltonian of a model.
inline Eigen::MatrixXcd dense_hamiltonian(const LiouvillianModel& model) {
  const std::size_t n = model.n_qubits();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(Eigen::Index(1) << n, Eigen::Index(1) << n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto a : kAxes) {
      const double c = model.hamiltonian.single[i][axis_index(a)];
      if (c != 0.0) h += c * dense(PauliWord::single(n, i, a));
    }
  for (auto [i, j] : all_pairs(n))
    for (auto a : kAxes)
      for (auto b : kAxes) {
        const double c = model.hamiltonian.coupling(i, j)(axis_index(a), axis_index(b));
        if (c == 0.0) continue;
        PauliWord w(n);
        w[i] = to_pauli(a);
        w[j] = to_pauli(b);
        h += c * dense(w);
      }
  return h;
}

/// Column-stacking dense superoperator of the full Liouvillian (N <= 4).
inline Eigen::MatrixXcd dense_superoperator(const LiouvillianModel& model) {
  const std::size_t n = model.n_qubits();
  if (n > 4) throw TooLarge("dense superoperator is limited to 4 qubits");
  model.validate();
  const Eigen::Index dim = Eigen::Index(1) << n;
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(dim, dim);
  const Eigen::MatrixXcd h = dense_hamiltonian(model);
  const cplx i(0.0, 1.0);
  Eigen::MatrixXcd s = -i * (Eigen::kroneckerProduct(id, h).eval() -
                             Eigen::kroneckerProduct(h.transpose(), id).eval());
  std::vector<Eigen::MatrixXcd> ops;
  for (std::size_t k = 0; k < 3 * n; ++k)
    ops.push_back(dense(PauliWord::single(n, k / 3, axis_from_index(int(k % 3)))));
  const auto& d = model.dissipator.entries;
  for (std::size_t p = 0; p < ops.size(); ++p)
    for (std::size_t q = 0; q < ops.size(); ++q) {
      const cplx dpq = d(Eigen::Index(p), Eigen::Index(q));
      if (dpq == cplx(0.0)) continue;
      const Eigen::MatrixXcd qp = ops[q] * ops[p];
      s += dpq * (Eigen::kroneckerProduct(ops[q].transpose(), ops[p]).eval() -
                  0.5 * Eigen::kroneckerProduct(id, qp).eval() -
                  0.5 * Eigen::kroneckerProduct(qp.transpose(), id).eval());
    }
  return s;
}

/// rho(t) = exp(L t) rho0 through the dense superoperator exponential.
inline DensityMatrix superoperator_expm_oracle(const LiouvillianModel& model, const DensityMatrix& rho0,
                                               double t) {
  if (model.n_qubits() > 4) throw TooLarge("superoperator oracle is limited to 4 qubits");
  if (rho0.n_qubits != model.n_qubits()) throw DimensionMismatch("initial state does not match the model size");
  if (t == 0.0) return rho0;
  const Eigen::MatrixXcd propagator = (dense_superoperator(model) * t).exp();
  const Eigen::Index dim = rho0.dim();
  const Eigen::VectorXcd v = propagator * Eigen::Map<const Eigen::VectorXcd>(rho0.entries.data(), dim * dim);
  return {rho0.n_qubits, Eigen::Map<const Eigen::MatrixXcd>(v.data(), dim, dim)};
}

/// tr(rho P) for a Pauli word over all N sites.
inline double exact_expectation(const DensityMatrix& rho, const PauliWord& obs) {
  if (obs.n_sites() != rho.n_qubits) throw DimensionMismatch("observable does not match the state size");
  MaskOperator::Factors factors;
  for (std::size_t k = 0; k < obs.n_sites(); ++k)
    if (obs[k] != Pauli::I) factors.emplace_back(k, axis_from_index(int(obs[k]) - 1));
  MaskOperator op(rho.n_qubits);
  op.add_pauli(1.0, factors);
  if (factors.empty()) return rho.entries.trace().real();
  return op.trace_with(rho.entries).real();
}

/// tr(rho P) for a product of single-site Paulis on distinct sites.
inline double exact_expectation(const DensityMatrix& rho, const MaskOperator::Factors& factors) {
  PauliWord w(rho.n_qubits);
  for (auto [site, axis] : factors) {
    if (site >= rho.n_qubits) throw ValidationError("observable site out of range");
    w[site] = to_pauli(axis);
  }
  return exact_expectation(rho, w);
}

/// Measurement rotation V with V^dagger Z V = sigma^axis: H, H S^dagger, 1.
inline Eigen::Matrix2cd measurement_rotation(PauliAxis axis) {
  const double s = 1.0 / std::sqrt(2.0);
  const cplx i(0.0, 1.0);
  Eigen::Matrix2cd v;
  switch (axis) {
    case PauliAxis::X: v << s, s, s, -s; break;
    case PauliAxis::Y: v << s, -i * s, s, i * s; break;
    case PauliAxis::Z: v << 1, 0, 0, 1; break;
  }
  return v;
}

inline constexpr double kNegativeProbabilityTolerance = 1e-8;

/// Born probabilities of the computational-basis outcomes of V rho V^dagger.
inline std::vector<double> measurement_probabilities(const DensityMatrix& rho,
                                                     std::span<const PauliAxis> basis) {
  const std::size_t n = rho.n_qubits;
  if (basis.size() != n) throw DimensionMismatch("measurement basis does not match the state size");
  Eigen::MatrixXcd m = rho.entries;
  const Eigen::Index dim = m.rows();
  for (std::size_t k = 0; k < n; ++k) {
    if (basis[k] == PauliAxis::Z) continue;
    const Eigen::Matrix2cd v = measurement_rotation(basis[k]);
    const Eigen::Matrix2cd vd = v.adjoint();
    const Eigen::Index bit = Eigen::Index(qubit_mask(n, k));
    for (Eigen::Index r0 = 0; r0 < dim; ++r0) {
      if (r0 & bit) continue;
      const Eigen::Index r1 = r0 | bit;
      for (Eigen::Index c = 0; c < dim; ++c) {
        const cplx a = m(r0, c), b = m(r1, c);
        m(r0, c) = v(0, 0) * a + v(0, 1) * b;
        m(r1, c) = v(1, 0) * a + v(1, 1) * b;
      }
    }
    for (Eigen::Index c0 = 0; c0 < dim; ++c0) {
      if (c0 & bit) continue;
      const Eigen::Index c1 = c0 | bit;
      for (Eigen::Index r = 0; r < dim; ++r) {
        const cplx a = m(r, c0), b = m(r, c1);
        m(r, c0) = a * vd(0, 0) + b * vd(1, 0);
        m(r, c1) = a * vd(0, 1) + b * vd(1, 1);
      }
    }
  }
  std::vector<double> p(static_cast<std::size_t>(dim));
  double total = 0.0;
  for (Eigen::Index b = 0; b < dim; ++b) {
    double v = m(b, b).real();
    if (!std::isfinite(v)) throw InvalidProbabilities("non-finite outcome probability");
    if (v < -kNegativeProbabilityTolerance)
    {
      std::ostringstream msg;
      msg << "outcome probability " << std::scientific << v << " is negative; increase substeps";
      throw InvalidProbabilities(msg.str());
    }
    v = std::max(v, 0.0);
    p[b] = v;
    total += v;
  }
  if (!(total > 0.0)) throw InvalidProbabilities("outcome probabilities sum to zero");
  for (auto& v : p) v /= total;
  return p;
}

/// Draws n_shots outcomes from a probability vector over basis indices.
inline std::vector<Bitstring> sample_from_probabilities(const std::vector<double>& p,
                                                        std::size_t n_shots, Rng& rng) {
  if (n_shots < 1) throw ValidationError("need at least one shot");
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::uniform_real_distribution<double> u(0.0, cdf.back());
  std::vector<Bitstring> out(n_shots);
  for (auto& s : out) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    s = Bitstring(std::min<std::size_t>(std::size_t(it - cdf.begin()), p.size() - 1));
  }
  return out;
}

inline std::vector<Bitstring> sample_bitstrings(const DensityMatrix& rho, std::span<const PauliAxis> basis,
                                                std::size_t n_shots, Rng& rng) {
  return sample_from_probabilities(measurement_probabilities(rho, basis), n_shots, rng);
}

}  // namespace liouvlearn
