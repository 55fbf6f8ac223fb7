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

// Pauli algebra on a handful of sites, backed by small dense matrices.
//
// Site 0 is the leftmost tensor factor (most significant bit of a basis
// index). Trace coefficients are evaluated numerically on 2^n x 2^n matrices;
// n is at most 3 in practice.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liouvlearn/errors.hpp"

namespace liouvlearn {

using cplx = std::complex<double>;

enum class PauliAxis : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<PauliAxis, 3> kAxes{PauliAxis::X, PauliAxis::Y,
                                                PauliAxis::Z};

constexpr int axis_index(PauliAxis a) { return static_cast<int>(a); }
constexpr PauliAxis axis_from_index(int k) { return static_cast<PauliAxis>(k); }

inline char axis_char(PauliAxis a) { return "xyz"[axis_index(a)]; }

/// Pauli eigenstate tau = (1 + sign * sigma^axis) / 2.
struct PauliState {
  PauliAxis axis = PauliAxis::Z;
  int sign = +1;

  /// Canonical index 0..5 in the order (+x, -x, +y, -y, +z, -z).
  constexpr int index() const { return 2 * axis_index(axis) + (sign < 0 ? 1 : 0); }

  static constexpr PauliState from_index(int k) {
    return PauliState{axis_from_index(k / 2), (k % 2 == 0) ? +1 : -1};
  }

  friend constexpr bool operator==(const PauliState&, const PauliState&) = default;

  std::string to_string() const {
    return std::string(sign > 0 ? "+" : "-") + axis_char(axis);
  }
};

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

constexpr Pauli to_pauli(PauliAxis a) { return static_cast<Pauli>(axis_index(a) + 1); }

/// Tensor product of single-site Paulis over a fixed number of sites.
class PauliWord {
 public:
  PauliWord() = default;
  explicit PauliWord(std::size_t n_sites) : ops_(n_sites, Pauli::I) {}
  PauliWord(std::initializer_list<Pauli> ops) : ops_(ops) {}
  explicit PauliWord(std::vector<Pauli> ops) : ops_(std::move(ops)) {}

  static PauliWord single(std::size_t n_sites, std::size_t site, PauliAxis a) {
    PauliWord w(n_sites);
    w.ops_.at(site) = to_pauli(a);
    return w;
  }

  std::size_t n_sites() const { return ops_.size(); }
  Pauli operator[](std::size_t k) const { return ops_[k]; }
  Pauli& operator[](std::size_t k) { return ops_[k]; }
  const std::vector<Pauli>& ops() const { return ops_; }

  bool is_identity() const {
    for (auto p : ops_)
      if (p != Pauli::I) return false;
    return true;
  }

  bool acts_on(std::size_t site) const { return ops_.at(site) != Pauli::I; }

  std::string to_string() const {
    std::string s;
    for (auto p : ops_) s += "IXYZ"[static_cast<int>(p)];
    return s;
  }

  friend bool operator==(const PauliWord&, const PauliWord&) = default;

 private:
  std::vector<Pauli> ops_;
};

/// Product state over sites; an empty entry is the maximally mixed 1/2.
using ProductState = std::vector<std::optional<PauliState>>;

inline Eigen::Matrix2cd pauli_matrix(Pauli p) {
  using namespace std::complex_literals;
  Eigen::Matrix2cd m;
  switch (p) {
    case Pauli::I: m << 1.0, 0.0, 0.0, 1.0; break;
    case Pauli::X: m << 0.0, 1.0, 1.0, 0.0; break;
    case Pauli::Y: m << 0.0, -1i, 1i, 0.0; break;
    case Pauli::Z: m << 1.0, 0.0, 0.0, -1.0; break;
  }
  return m;
}

inline Eigen::Matrix2cd pauli_matrix(PauliAxis a) { return pauli_matrix(to_pauli(a)); }

inline Eigen::Matrix2cd state_matrix(const std::optional<PauliState>& s) {
  if (!s) return 0.5 * Eigen::Matrix2cd::Identity();
  return 0.5 * (Eigen::Matrix2cd::Identity() + double(s->sign) * pauli_matrix(s->axis));
}

namespace detail {

template <typename Factor>
Eigen::MatrixXcd kron_all(std::size_t n, Factor&& factor) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::MatrixXcd next = Eigen::kroneckerProduct(out, factor(k)).eval();
    out = std::move(next);
  }
  return out;
}

}  // namespace detail

inline Eigen::MatrixXcd dense(const PauliWord& w) {
  return detail::kron_all(w.n_sites(), [&](std::size_t k) { return pauli_matrix(w[k]); });
}

inline Eigen::MatrixXcd dense(const ProductState& rho) {
  return detail::kron_all(rho.size(), [&](std::size_t k) { return state_matrix(rho[k]); });
}

inline constexpr double kRealnessTolerance = 1e-12;

namespace detail {

inline void require_same_support(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || b != c || a == 0)
    throw DimensionMismatch("operands must act on the same number of sites (got " +
                            std::to_string(a) + ", " + std::to_string(b) + ", " +
                            std::to_string(c) + ")");
}

}  // namespace detail

/// tr(-i [P, rho] O), which is real for Hermitian operands.
inline double hamiltonian_trace_coeff(const PauliWord& p, const ProductState& rho,
                                      const PauliWord& obs) {
  detail::require_same_support(p.n_sites(), rho.size(), obs.n_sites());
  const Eigen::MatrixXcd P = dense(p);
  const Eigen::MatrixXcd R = dense(rho);
  const Eigen::MatrixXcd O = dense(obs);
  const cplx value = (cplx(0.0, -1.0) * (P * R - R * P) * O).trace();
  if (std::abs(value.imag()) > kRealnessTolerance)
    throw NumericalError("hamiltonian trace coefficient is not real: " +
                         std::to_string(value.imag()));
  return value.real();
}

/// A(p, q, rho) = p rho q - {q p, rho} / 2.
inline Eigen::MatrixXcd dissipator_term(const Eigen::MatrixXcd& p, const Eigen::MatrixXcd& q,
                                        const Eigen::MatrixXcd& rho) {
  const Eigen::MatrixXcd qp = q * p;
  return p * rho * q - 0.5 * (qp * rho + rho * qp);
}

/// tr(A(p, q, rho) O).
inline cplx dissipator_trace_coeff(const PauliWord& p, const PauliWord& q,
                                   const ProductState& rho, const PauliWord& obs) {
  detail::require_same_support(p.n_sites(), rho.size(), obs.n_sites());
  if (q.n_sites() != p.n_sites())
    throw DimensionMismatch("dissipator operands act on different numbers of sites");
  return (dissipator_term(dense(p), dense(q), dense(rho)) * dense(obs)).trace();
}

}  // namespace liouvlearn
