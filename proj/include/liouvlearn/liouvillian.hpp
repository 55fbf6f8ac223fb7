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

// N-qubit two-body Liouvillian models: Pauli-basis Hamiltonian coefficients
// and a Hermitian dissipator matrix over single-qubit Pauli operators.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"
#include "liouvlearn/configuration.hpp"
#include "liouvlearn/errors.hpp"
#include "liouvlearn/pauli.hpp"

namespace liouvlearn {

/// Linear index of the pair (i, j), i < j, in row-major upper-triangle order.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

inline std::size_t num_pairs(std::size_t n) { return n * (n - 1) / 2; }

inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(num_pairs(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}

struct HamiltonianCoefficients {
  std::size_t n_qubits = 0;
  std::vector<Eigen::Vector3d> single;  // h_{i,a}
  std::vector<Eigen::Matrix3d> pair;    // h_{i,a,j,b}, indexed by pair_index(i, j)

  explicit HamiltonianCoefficients(std::size_t n = 0)
      : n_qubits(n),
        single(n, Eigen::Vector3d::Zero()),
        pair(num_pairs(n), Eigen::Matrix3d::Zero()) {}

  Eigen::Matrix3d& coupling(std::size_t i, std::size_t j) { return pair.at(pair_index(i, j, n_qubits)); }
  const Eigen::Matrix3d& coupling(std::size_t i, std::size_t j) const {
    return pair.at(pair_index(i, j, n_qubits));
  }

  std::size_t num_parameters() const { return 3 * n_qubits + 9 * num_pairs(n_qubits); }
};

/// Hermitian 3N x 3N matrix, element ((i, a), (j, b)) = d_{i,a,j,b}.
struct DissipatorMatrix {
  std::size_t n_qubits = 0;
  Eigen::MatrixXcd entries;

  explicit DissipatorMatrix(std::size_t n = 0)
      : n_qubits(n), entries(Eigen::MatrixXcd::Zero(3 * n, 3 * n)) {}

  static Eigen::Index row(std::size_t qubit, PauliAxis a) {
    return Eigen::Index(3 * qubit + axis_index(a));
  }

  cplx operator()(std::size_t i, PauliAxis a, std::size_t j, PauliAxis b) const {
    return entries(row(i, a), row(j, b));
  }

  /// Sets d_{i,a,j,b} and its Hermitian partner.
  void set(std::size_t i, PauliAxis a, std::size_t j, PauliAxis b, cplx v) {
    entries(row(i, a), row(j, b)) = v;
    entries(row(j, b), row(i, a)) = std::conj(v);
  }

  double hermiticity_error() const { return (entries - entries.adjoint()).cwiseAbs().maxCoeff(); }

  double min_eigenvalue() const {
    if (entries.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(entries, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
};

struct JumpDecomposition {
  std::vector<double> rates;                // descending
  std::vector<Eigen::VectorXcd> operators;  // Pauli-basis components l_{i,a}, unit norm

  Eigen::MatrixXcd reconstruct(Eigen::Index dim) const {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t k = 0; k < rates.size(); ++k)
      d += rates[k] * operators[k] * operators[k].adjoint();
    return d;
  }
};

struct LiouvillianModel {
  HamiltonianCoefficients hamiltonian;
  DissipatorMatrix dissipator;

  explicit LiouvillianModel(std::size_t n = 0) : hamiltonian(n), dissipator(n) {}

  std::size_t n_qubits() const { return hamiltonian.n_qubits; }

  void validate() const {
    if (hamiltonian.n_qubits != dissipator.n_qubits)
      throw DimensionMismatch("hamiltonian and dissipator disagree on qubit count");
    if (hamiltonian.single.size() != n_qubits() || hamiltonian.pair.size() != num_pairs(n_qubits()) ||
        dissipator.entries.rows() != Eigen::Index(3 * n_qubits()) ||
        dissipator.entries.cols() != Eigen::Index(3 * n_qubits()))
      throw DimensionMismatch("model storage does not match n_qubits");
    for (const auto& h : hamiltonian.single)
      if (!h.allFinite()) throw ValidationError("non-finite single-body coefficient");
    for (const auto& h : hamiltonian.pair)
      if (!h.allFinite()) throw ValidationError("non-finite two-body coefficient");
    if (!dissipator.entries.allFinite()) throw ValidationError("non-finite dissipator entry");
  }
};

inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kNegligibleRate = 1e-12;

/// Eigen-decomposition of the dissipator into jump operators and rates.
/// Eigenvalues in [-1e-10, 0) are clipped; rates below 1e-12 are dropped.
inline JumpDecomposition diagonalize_dissipator(const DissipatorMatrix& d) {
  JumpDecomposition out;
  if (d.entries.size() == 0) return out;
  if (d.hermiticity_error() > kHermitianTolerance)
    throw ValidationError("dissipator matrix is not Hermitian");
  const Eigen::MatrixXcd herm = 0.5 * (d.entries + d.entries.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
  const auto& values = es.eigenvalues();
  if (values.minCoeff() < -kPsdTolerance)
    throw NotPositiveSemiDefinite("dissipator has eigenvalue " + std::to_string(values.minCoeff()));
  // Eigen returns ascending eigenvalues.
  for (Eigen::Index k = values.size() - 1; k >= 0; --k) {
    const double rate = std::max(values[k], 0.0);
    if (rate < kNegligibleRate) continue;
    out.rates.push_back(rate);
    out.operators.emplace_back(es.eigenvectors().col(k));
  }
  return out;
}

/// Power-law XY model with uniform field and local dephasing:
/// H = (J/2) sum_{i<j} |i-j|^-alpha (X_i X_j + Y_i Y_j) + B sum_i Z_i, d_{i,z,i,z} = gamma.
inline LiouvillianModel build_xy_model(std::size_t n_qubits, double coupling, double field,
                                       double alpha, double gamma) {
  if (n_qubits < 2) throw ValidationError("XY model needs at least 2 qubits");
  if (!(alpha > 0.0)) throw ValidationError("power-law exponent must be positive");
  if (!(gamma >= 0.0)) throw ValidationError("dephasing rate must be non-negative");
  LiouvillianModel m(n_qubits);
  for (std::size_t i = 0; i < n_qubits; ++i) {
    m.hamiltonian.single[i][axis_index(PauliAxis::Z)] = field;
    m.dissipator.set(i, PauliAxis::Z, i, PauliAxis::Z, gamma);
    for (std::size_t j = i + 1; j < n_qubits; ++j) {
      const double h = 0.5 * coupling / std::pow(double(j - i), alpha);
      auto& c = m.hamiltonian.coupling(i, j);
      c(0, 0) = h;
      c(1, 1) = h;
    }
  }
  return m;
}

namespace detail {

inline void check_pair(const LiouvillianModel& model, std::size_t i, std::size_t j) {
  if (!(i < j) || j >= model.n_qubits())
    throw ValidationError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") is out of range for " + std::to_string(model.n_qubits()) + " qubits");
}

}  // namespace detail

inline PairParameters pair_parameters(const LiouvillianModel& model, std::size_t i, std::size_t j) {
  detail::check_pair(model, i, j);
  PairParameters p;
  p.h_i = model.hamiltonian.single[i];
  p.h_j = model.hamiltonian.single[j];
  p.h_ij = model.hamiltonian.coupling(i, j);
  const std::array<Eigen::Index, 6> rows{
      DissipatorMatrix::row(i, PauliAxis::X), DissipatorMatrix::row(i, PauliAxis::Y),
      DissipatorMatrix::row(i, PauliAxis::Z), DissipatorMatrix::row(j, PauliAxis::X),
      DissipatorMatrix::row(j, PauliAxis::Y), DissipatorMatrix::row(j, PauliAxis::Z)};
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) p.d(r, c) = model.dissipator.entries(rows[r], rows[c]);
  return p;
}

/// Pair-restricted coefficients in the canonical 51-component encoding.
inline ParameterVector restrict_to_pair(const LiouvillianModel& model, std::size_t i, std::size_t j) {
  return encode(pair_parameters(model, i, j));
}

// JSON document:
//   {n_qubits, h_single: [[hx, hy, hz], ...], h_pair: [{i, j, matrix}],
//    d_entries: [{i, a, j, b, re, im}]}
// Only nonzero pair matrices and dissipator entries are written.
inline nlohmann::ordered_json to_json(const LiouvillianModel& m) {
  nlohmann::ordered_json j;
  j["n_qubits"] = m.n_qubits();
  auto singles = nlohmann::ordered_json::array();
  for (const auto& h : m.hamiltonian.single) singles.push_back({h[0], h[1], h[2]});
  j["h_single"] = singles;
  auto pairs = nlohmann::ordered_json::array();
  for (auto [a, b] : all_pairs(m.n_qubits())) {
    const auto& c = m.hamiltonian.coupling(a, b);
    if (c.cwiseAbs().maxCoeff() == 0.0) continue;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({c(r, 0), c(r, 1), c(r, 2)});
    pairs.push_back({{"i", a}, {"j", b}, {"matrix", rows}});
  }
  j["h_pair"] = pairs;
  auto entries = nlohmann::ordered_json::array();
  const auto& d = m.dissipator.entries;
  for (Eigen::Index r = 0; r < d.rows(); ++r)
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      if (std::abs(d(r, c)) == 0.0) continue;
      entries.push_back({{"i", r / 3},
                         {"a", std::string(1, axis_char(axis_from_index(int(r % 3))))},
                         {"j", c / 3},
                         {"b", std::string(1, axis_char(axis_from_index(int(c % 3))))},
                         {"re", d(r, c).real()},
                         {"im", d(r, c).imag()}});
    }
  j["d_entries"] = entries;
  return j;
}

namespace detail {

inline PauliAxis parse_axis(const nlohmann::json& v) {
  const std::string s = v.get<std::string>();
  if (s == "x" || s == "X") return PauliAxis::X;
  if (s == "y" || s == "Y") return PauliAxis::Y;
  if (s == "z" || s == "Z") return PauliAxis::Z;
  throw ValidationError("unknown Pauli axis '" + s + "'");
}

template <typename Json>
void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end())
      throw ValidationError("unknown key '" + it.key() + "' in " + what);
}

}  // namespace detail

template <typename Json>
LiouvillianModel model_from_json(const Json& j) {
  try {
    detail::require_keys(j, {"n_qubits", "h_single", "h_pair", "d_entries"}, "model");
    const std::size_t n = j.at("n_qubits").template get<std::size_t>();
    if (n < 1) throw ValidationError("model needs at least one qubit");
    LiouvillianModel m(n);
    const auto& singles = j.at("h_single");
    if (singles.size() != n) throw ValidationError("h_single must have n_qubits rows");
    for (std::size_t i = 0; i < n; ++i) {
      if (singles[i].size() != 3) throw ValidationError("h_single rows have 3 entries");
      for (int a = 0; a < 3; ++a) m.hamiltonian.single[i][a] = singles[i][a].template get<double>();
    }
    if (j.contains("h_pair"))
      for (const auto& p : j.at("h_pair")) {
        const std::size_t a = p.at("i").template get<std::size_t>();
        const std::size_t b = p.at("j").template get<std::size_t>();
        if (!(a < b) || b >= n) throw ValidationError("h_pair entry needs 0 <= i < j < n_qubits");
        const auto& rows = p.at("matrix");
        if (rows.size() != 3) throw ValidationError("h_pair matrix must be 3x3");
        for (int r = 0; r < 3; ++r) {
          if (rows[r].size() != 3) throw ValidationError("h_pair matrix must be 3x3");
          for (int c = 0; c < 3; ++c) m.hamiltonian.coupling(a, b)(r, c) = rows[r][c].template get<double>();
        }
      }
    if (j.contains("d_entries"))
      for (const auto& e : j.at("d_entries")) {
        const std::size_t a = e.at("i").template get<std::size_t>();
        const std::size_t b = e.at("j").template get<std::size_t>();
        if (a >= n || b >= n) throw ValidationError("d_entries qubit index out of range");
        const cplx v(e.at("re").template get<double>(), e.value("im", 0.0));
        m.dissipator.entries(DissipatorMatrix::row(a, detail::parse_axis(e.at("a"))),
                             DissipatorMatrix::row(b, detail::parse_axis(e.at("b")))) = v;
      }
    if (m.dissipator.hermiticity_error() > kHermitianTolerance) {
      // Accept documents listing only one triangle.
      auto& d = m.dissipator.entries;
      for (Eigen::Index r = 0; r < d.rows(); ++r)
        for (Eigen::Index c = r + 1; c < d.cols(); ++c) {
          if (d(c, r) == cplx(0.0)) d(c, r) = std::conj(d(r, c));
          else if (d(r, c) == cplx(0.0)) d(r, c) = std::conj(d(c, r));
        }
      if (m.dissipator.hermiticity_error() > kHermitianTolerance)
        throw ValidationError("d_entries do not describe a Hermitian matrix");
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace liouvlearn
