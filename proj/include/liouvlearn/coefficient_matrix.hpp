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

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "liouvlearn/configuration.hpp"
#include "liouvlearn/errors.hpp"
#include "liouvlearn/pauli.hpp"

namespace liouvlearn {

/// Universal 360 x 51 trace-coefficient matrix of one qubit pair: row c
/// dotted with an encoded pair model gives d<O_c>/dt at t = 0.
struct CoefficientMatrixMax {
  Eigen::MatrixXd entries;
  std::vector<Configuration> row_labels;
  std::vector<ParameterIndex> col_labels;
};

namespace detail {

/// sigma_i^x, sigma_i^y, sigma_i^z, sigma_j^x, sigma_j^y, sigma_j^z on 2 sites.
inline std::array<PauliWord, 6> pair_site_operators() {
  std::array<PauliWord, 6> ops;
  for (int k = 0; k < 6; ++k) ops[k] = PauliWord::single(2, k / 3, axis_from_index(k % 3));
  return ops;
}

inline constexpr double kImaginaryResidue = 1e-10;

inline double checked_real(cplx v, const char* what) {
  if (std::abs(v.imag()) > kImaginaryResidue)
    throw NumericalError(std::string("M_max entry for ") + what +
                         " has imaginary residue " + std::to_string(v.imag()));
  return v.real();
}

}  // namespace detail

inline CoefficientMatrixMax build_m_max() {
  CoefficientMatrixMax m;
  m.row_labels = enumerate_configurations();
  m.col_labels = enumerate_parameters();
  m.entries = Eigen::MatrixXd::Zero(kNumConfigurations, kNumParameters);

  const auto ops = detail::pair_site_operators();
  // Column -> (p, q) site-operator indices for the dissipator block.
  auto dis_ops = [](const ParameterIndex& col) -> std::pair<int, int> {
    const int a = axis_index(col.a), b = axis_index(col.b);
    switch (col.block) {
      case ParameterBlock::DissipatorII: return {a, b};
      case ParameterBlock::DissipatorJJ: return {3 + a, 3 + b};
      default: return {a, 3 + b};
    }
  };

  for (int r = 0; r < kNumConfigurations; ++r) {
    const Configuration& cfg = m.row_labels[r];
    const ProductState rho = cfg.state();
    const PauliWord obs = cfg.observable();
    for (const ParameterIndex& col : m.col_labels) {
      double value = 0.0;
      switch (col.block) {
        case ParameterBlock::HamiltonianI:
          value = hamiltonian_trace_coeff(ops[axis_index(col.a)], rho, obs);
          break;
        case ParameterBlock::HamiltonianJ:
          value = hamiltonian_trace_coeff(ops[3 + axis_index(col.a)], rho, obs);
          break;
        case ParameterBlock::HamiltonianPair:
          value = hamiltonian_trace_coeff(PauliWord{to_pauli(col.a), to_pauli(col.b)}, rho, obs);
          break;
        default: {
          const auto [p, q] = dis_ops(col);
          const cplx apq = dissipator_trace_coeff(ops[p], ops[q], rho, obs);
          if (p == q) {
            value = detail::checked_real(apq, "diagonal dissipator");
          } else {
            const cplx aqp = dissipator_trace_coeff(ops[q], ops[p], rho, obs);
            value = col.part == ParameterPart::Real
                        ? detail::checked_real(apq + aqp, "real dissipator part")
                        : detail::checked_real(cplx(0.0, 1.0) * (apq - aqp),
                                               "imaginary dissipator part");
          }
        }
      }
      m.entries(r, col.ordinal) = value;
    }
  }
  return m;
}

/// Process-wide immutable instance, built on first use.
inline const CoefficientMatrixMax& m_max() {
  static const CoefficientMatrixMax instance = build_m_max();
  return instance;
}

/// Rows of M_max for the given configuration indices.
inline Eigen::MatrixXd slice_rows(const CoefficientMatrixMax& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), kNumParameters);
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) = m.entries.row(rows[k]);
  return out;
}

/// One line per entry: row label, column label, value.
inline void write_m_max_csv(std::ostream& os, const CoefficientMatrixMax& m) {
  os << "row,column,value\n";
  for (std::size_t r = 0; r < m.row_labels.size(); ++r)
    for (std::size_t c = 0; c < m.col_labels.size(); ++c)
      os << '"' << m.row_labels[r].to_string() << "\"," << m.col_labels[c].label() << ','
         << m.entries(r, c) << '\n';
}

}  // namespace liouvlearn
