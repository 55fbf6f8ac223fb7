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

// Learning configurations (prepared Pauli state, measured Pauli observable)
// on one qubit pair, and the 51 real pair parameters they constrain.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "liouvlearn/errors.hpp"
#include "liouvlearn/pauli.hpp"

namespace liouvlearn {

inline constexpr int kNumConfigurations = 360;
inline constexpr int kNumParameters = 51;
inline constexpr int kNumSingleConfigurations = 18;

enum class ConfigKind { SingleI, SingleJ, Pair };

struct Configuration {
  ConfigKind kind = ConfigKind::SingleI;
  std::optional<PauliState> prep_i;
  std::optional<PauliState> prep_j;
  std::optional<PauliAxis> obs_i;
  std::optional<PauliAxis> obs_j;

  static Configuration single_i(PauliState prep, PauliAxis obs) {
    return {ConfigKind::SingleI, prep, std::nullopt, obs, std::nullopt};
  }
  static Configuration single_j(PauliState prep, PauliAxis obs) {
    return {ConfigKind::SingleJ, std::nullopt, prep, std::nullopt, obs};
  }
  static Configuration pair(PauliState pi, PauliState pj, PauliAxis oi, PauliAxis oj) {
    return {ConfigKind::Pair, pi, pj, oi, oj};
  }

  /// Two-site preparation, with 1/2 on the inactive site.
  ProductState state() const { return {prep_i, prep_j}; }

  PauliWord observable() const {
    PauliWord w(2);
    if (obs_i) w[0] = to_pauli(*obs_i);
    if (obs_j) w[1] = to_pauli(*obs_j);
    return w;
  }

  /// Row of this configuration in the canonical enumeration.
  int index() const {
    switch (kind) {
      case ConfigKind::SingleI:
        return prep_i->index() * 3 + axis_index(*obs_i);
      case ConfigKind::SingleJ:
        return kNumSingleConfigurations + prep_j->index() * 3 + axis_index(*obs_j);
      case ConfigKind::Pair:
        return 2 * kNumSingleConfigurations +
               (prep_i->index() * 6 + prep_j->index()) * 9 + axis_index(*obs_i) * 3 +
               axis_index(*obs_j);
    }
    return -1;
  }

  std::string to_string() const {
    std::string s;
    switch (kind) {
      case ConfigKind::SingleI: s = "i"; break;
      case ConfigKind::SingleJ: s = "j"; break;
      case ConfigKind::Pair: s = "ij"; break;
    }
    s += "(";
    if (prep_i) s += prep_i->to_string();
    if (prep_i && prep_j) s += ",";
    if (prep_j) s += prep_j->to_string();
    s += ";";
    if (obs_i) s += axis_char(*obs_i);
    if (obs_j) s += axis_char(*obs_j);
    s += ")";
    return s;
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

/// All 360 configurations of a pair: SingleI, SingleJ, then Pair; within a
/// block the preparation varies slowest and the observable fastest.
inline std::vector<Configuration> enumerate_configurations() {
  std::vector<Configuration> out;
  out.reserve(kNumConfigurations);
  for (int p = 0; p < 6; ++p)
    for (auto o : kAxes) out.push_back(Configuration::single_i(PauliState::from_index(p), o));
  for (int p = 0; p < 6; ++p)
    for (auto o : kAxes) out.push_back(Configuration::single_j(PauliState::from_index(p), o));
  for (int pi = 0; pi < 6; ++pi)
    for (int pj = 0; pj < 6; ++pj)
      for (auto oi : kAxes)
        for (auto oj : kAxes)
          out.push_back(Configuration::pair(PauliState::from_index(pi),
                                            PauliState::from_index(pj), oi, oj));
  return out;
}

// Parameter layout (51 reals):
//   [0, 3)   h_i(a)              [3, 6)   h_j(a)
//   [6, 15)  h_ij(a, b), a-major
//   [15, 24) d_ii block: diag xx,yy,zz; Re (xy,xz,yz); Im (xy,xz,yz)
//   [24, 33) d_jj block, same scheme
//   [33, 42) Re d_{i a, j b}, a-major   [42, 51) Im d_{i a, j b}
enum class ParameterBlock { HamiltonianI, HamiltonianJ, HamiltonianPair, DissipatorII,
                            DissipatorJJ, DissipatorCross };

enum class ParameterPart { Real, Imag };

struct ParameterIndex {
  int ordinal = 0;
  ParameterBlock block = ParameterBlock::HamiltonianI;
  ParameterPart part = ParameterPart::Real;
  PauliAxis a = PauliAxis::X;
  PauliAxis b = PauliAxis::X;

  bool is_hamiltonian() const {
    return block == ParameterBlock::HamiltonianI || block == ParameterBlock::HamiltonianJ ||
           block == ParameterBlock::HamiltonianPair;
  }

  /// True for parameters estimated once per pair containing a single qubit.
  bool is_single_body() const {
    return block != ParameterBlock::HamiltonianPair && block != ParameterBlock::DissipatorCross;
  }

  std::string label() const {
    const std::string ab = std::string(1, axis_char(a)) + axis_char(b);
    const std::string re = part == ParameterPart::Real ? "re" : "im";
    switch (block) {
      case ParameterBlock::HamiltonianI: return std::string("h_i_") + axis_char(a);
      case ParameterBlock::HamiltonianJ: return std::string("h_j_") + axis_char(a);
      case ParameterBlock::HamiltonianPair: return "h_ij_" + ab;
      case ParameterBlock::DissipatorII: return re + "_d_ii_" + ab;
      case ParameterBlock::DissipatorJJ: return re + "_d_jj_" + ab;
      case ParameterBlock::DissipatorCross: return re + "_d_ij_" + ab;
    }
    return {};
  }
};

namespace detail {

inline constexpr std::array<std::array<int, 2>, 3> kUpperPairs{{{0, 1}, {0, 2}, {1, 2}}};

inline void push_local_block(std::vector<ParameterIndex>& out, ParameterBlock block) {
  for (auto a : kAxes)
    out.push_back({int(out.size()), block, ParameterPart::Real, a, a});
  for (auto part : {ParameterPart::Real, ParameterPart::Imag})
    for (auto [a, b] : kUpperPairs)
      out.push_back({int(out.size()), block, part, axis_from_index(a), axis_from_index(b)});
}

}  // namespace detail

inline std::vector<ParameterIndex> enumerate_parameters() {
  std::vector<ParameterIndex> out;
  out.reserve(kNumParameters);
  for (auto a : kAxes) out.push_back({int(out.size()), ParameterBlock::HamiltonianI, ParameterPart::Real, a, a});
  for (auto a : kAxes) out.push_back({int(out.size()), ParameterBlock::HamiltonianJ, ParameterPart::Real, a, a});
  for (auto a : kAxes)
    for (auto b : kAxes)
      out.push_back({int(out.size()), ParameterBlock::HamiltonianPair, ParameterPart::Real, a, b});
  detail::push_local_block(out, ParameterBlock::DissipatorII);
  detail::push_local_block(out, ParameterBlock::DissipatorJJ);
  for (auto part : {ParameterPart::Real, ParameterPart::Imag})
    for (auto a : kAxes)
      for (auto b : kAxes)
        out.push_back({int(out.size()), ParameterBlock::DissipatorCross, part, a, b});
  return out;
}

using ParameterVector = Eigen::Matrix<double, kNumParameters, 1>;

/// Liouvillian coefficients supported on one pair (i, j).
///
/// `d` is the 6x6 Hermitian dissipator matrix over the operators
/// (sigma_i^x, sigma_i^y, sigma_i^z, sigma_j^x, sigma_j^y, sigma_j^z).
struct PairParameters {
  Eigen::Vector3d h_i = Eigen::Vector3d::Zero();
  Eigen::Vector3d h_j = Eigen::Vector3d::Zero();
  Eigen::Matrix3d h_ij = Eigen::Matrix3d::Zero();
  Eigen::Matrix<cplx, 6, 6> d = Eigen::Matrix<cplx, 6, 6>::Zero();
};

namespace detail {

inline void encode_local(const Eigen::Matrix<cplx, 6, 6>& d, int offset, int base,
                         ParameterVector& x) {
  for (int a = 0; a < 3; ++a) x[base + a] = d(offset + a, offset + a).real();
  for (int k = 0; k < 3; ++k) {
    const auto [a, b] = kUpperPairs[k];
    x[base + 3 + k] = d(offset + a, offset + b).real();
    x[base + 6 + k] = d(offset + a, offset + b).imag();
  }
}

inline void decode_local(const ParameterVector& x, int offset, int base,
                         Eigen::Matrix<cplx, 6, 6>& d) {
  for (int a = 0; a < 3; ++a) d(offset + a, offset + a) = x[base + a];
  for (int k = 0; k < 3; ++k) {
    const auto [a, b] = kUpperPairs[k];
    const cplx v(x[base + 3 + k], x[base + 6 + k]);
    d(offset + a, offset + b) = v;
    d(offset + b, offset + a) = std::conj(v);
  }
}

}  // namespace detail

/// Canonical 51-component real encoding. The lower triangle of `d` is implied
/// by Hermiticity and ignored.
inline ParameterVector encode(const PairParameters& p) {
  ParameterVector x;
  x.segment<3>(0) = p.h_i;
  x.segment<3>(3) = p.h_j;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) x[6 + 3 * a + b] = p.h_ij(a, b);
  detail::encode_local(p.d, 0, 15, x);
  detail::encode_local(p.d, 3, 24, x);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      x[33 + 3 * a + b] = p.d(a, 3 + b).real();
      x[42 + 3 * a + b] = p.d(a, 3 + b).imag();
    }
  return x;
}

inline PairParameters decode(const ParameterVector& x) {
  PairParameters p;
  p.h_i = x.segment<3>(0);
  p.h_j = x.segment<3>(3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) p.h_ij(a, b) = x[6 + 3 * a + b];
  detail::decode_local(x, 0, 15, p.d);
  detail::decode_local(x, 3, 24, p.d);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const cplx v(x[33 + 3 * a + b], x[42 + 3 * a + b]);
      p.d(a, 3 + b) = v;
      p.d(3 + b, a) = std::conj(v);
    }
  return p;
}

}  // namespace liouvlearn
