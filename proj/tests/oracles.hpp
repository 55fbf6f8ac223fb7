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

// Independent reference computations used only by the test suites. Nothing
// here goes through the library's trace-coefficient or integrator code paths.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <random>
#include <vector>

#include "liouvlearn/configuration.hpp"

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;

inline Mat sigma(int k) {  // 0 = I, 1 = X, 2 = Y, 3 = Z
  Mat m(2, 2);
  const cplx i(0.0, 1.0);
  switch (k) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, -i, i, 0; break;
    default: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline Mat kron(const Mat& a, const Mat& b) { return Eigen::kroneckerProduct(a, b).eval(); }

/// Operator on n sites with `op` at `site` and identity elsewhere.
inline Mat embed(int n, int site, const Mat& op) {
  Mat out = Mat::Identity(1, 1);
  for (int k = 0; k < n; ++k) out = kron(out, k == site ? op : Mat::Identity(2, 2));
  return out;
}

/// Column-stacking superoperator of rho -> -i[H, rho] + sum d_pq (p rho q - {qp, rho}/2).
inline Mat lindblad_superoperator(const Mat& h, const std::vector<Mat>& ops, const Mat& d) {
  const Eigen::Index dim = h.rows();
  const Mat id = Mat::Identity(dim, dim);
  const cplx i(0.0, 1.0);
  Mat s = -i * (kron(id, h) - kron(h.transpose(), id));
  for (std::size_t p = 0; p < ops.size(); ++p)
    for (std::size_t q = 0; q < ops.size(); ++q) {
      const cplx dpq = d(p, q);
      if (dpq == cplx(0.0)) continue;
      const Mat qp = ops[q] * ops[p];
      s += dpq * (kron(ops[q].transpose(), ops[p]) - 0.5 * kron(id, qp) -
                  0.5 * kron(qp.transpose(), id));
    }
  return s;
}

inline Eigen::VectorXcd vec(const Mat& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

inline Mat unvec(const Eigen::VectorXcd& v, Eigen::Index dim) {
  return Eigen::Map<const Mat>(v.data(), dim, dim);
}

/// Pair Hamiltonian and site operators of a PairParameters model.
inline Mat pair_hamiltonian(const liouvlearn::PairParameters& p) {
  Mat h = Mat::Zero(4, 4);
  for (int a = 0; a < 3; ++a) {
    h += p.h_i[a] * embed(2, 0, sigma(a + 1));
    h += p.h_j[a] * embed(2, 1, sigma(a + 1));
    for (int b = 0; b < 3; ++b) h += p.h_ij(a, b) * kron(sigma(a + 1), sigma(b + 1));
  }
  return h;
}

inline std::vector<Mat> pair_site_ops() {
  std::vector<Mat> ops;
  for (int site = 0; site < 2; ++site)
    for (int a = 0; a < 3; ++a) ops.push_back(embed(2, site, sigma(a + 1)));
  return ops;
}

/// Dense 16x16 superoperator of a pair model.
inline Mat pair_superoperator(const liouvlearn::PairParameters& p) {
  const Mat d = p.d;
  return lindblad_superoperator(pair_hamiltonian(p), pair_site_ops(), d);
}

/// tr(L[rho] O) given the pair superoperator.
inline double generator_expectation(const Mat& superop, const Mat& rho, const Mat& obs) {
  const Mat out = unvec(superop * vec(rho), rho.rows());
  return (out * obs).trace().real();
}

inline Mat pauli_state(int index) {  // (+x, -x, +y, -y, +z, -z)
  const double sign = index % 2 == 0 ? 1.0 : -1.0;
  return 0.5 * (Mat::Identity(2, 2) + sign * sigma(index / 2 + 1));
}

/// Random pair model: uniform Hamiltonian, PSD dissipator d = B B^dagger.
template <typename Rng>
liouvlearn::PairParameters random_pair_parameters(Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  liouvlearn::PairParameters p;
  for (int a = 0; a < 3; ++a) {
    p.h_i[a] = scale * u(rng);
    p.h_j[a] = scale * u(rng);
    for (int b = 0; b < 3; ++b) p.h_ij(a, b) = scale * u(rng);
  }
  Eigen::Matrix<cplx, 6, 6> b;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) b(r, c) = cplx(g(rng), g(rng));
  p.d = (scale / 12.0) * b * b.adjoint();
  p.d = (0.5 * (p.d + p.d.adjoint())).eval();
  for (int k = 0; k < 6; ++k) p.d(k, k) = p.d(k, k).real();
  return p;
}

/// Random density matrix on `dim` levels (normalized Wishart).
template <typename Rng>
Mat random_density_matrix(Rng& rng, Eigen::Index dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) a(r, c) = cplx(g(rng), g(rng));
  Mat rho = a * a.adjoint();
  return rho / rho.trace();
}

/// Trace distance between two Hermitian matrices.
inline double trace_distance(const Mat& a, const Mat& b) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a - b);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace oracle
