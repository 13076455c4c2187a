#pragma once

#include "gsprep/common.hpp"

#include <vector>

namespace gsprep {

// Dense state-vector helpers. Site 1 is the most significant bit of the basis
// index (see pauli.hpp); all gate routines below take 0-based wire indices
// with wire 0 as the most significant position.

inline StateVector basis_state(int n_wires, Index index) {
  StateVector v = StateVector::Zero(Index(1) << n_wires);
  v[index] = 1.0;
  return v;
}

/// Apply a 2x2 matrix to one wire.
inline void apply_1q(StateVector& psi, const DenseMatrix& m, int wire, int n_wires) {
  const Index stride = Index(1) << (n_wires - 1 - wire);
  const Index dim = psi.size();
  for (Index base = 0; base < dim; ++base) {
    if (base & stride) continue;
    const Complex a0 = psi[base];
    const Complex a1 = psi[base | stride];
    psi[base] = m(0, 0) * a0 + m(0, 1) * a1;
    psi[base | stride] = m(1, 0) * a0 + m(1, 1) * a1;
  }
}

/// Apply a 4x4 matrix to (wire_a, wire_b); wire_a indexes the more significant
/// bit of the gate's 2-bit row/column index.
inline void apply_2q(StateVector& psi, const DenseMatrix& m, int wire_a, int wire_b,
                     int n_wires) {
  const Index sa = Index(1) << (n_wires - 1 - wire_a);
  const Index sb = Index(1) << (n_wires - 1 - wire_b);
  const Index dim = psi.size();
  Complex amp[4];
  for (Index base = 0; base < dim; ++base) {
    if (base & (sa | sb)) continue;
    const Index idx[4] = {base, base | sb, base | sa, base | sa | sb};
    for (int i = 0; i < 4; ++i) amp[i] = psi[idx[i]];
    for (int i = 0; i < 4; ++i)
      psi[idx[i]] = m(i, 0) * amp[0] + m(i, 1) * amp[1] + m(i, 2) * amp[2] + m(i, 3) * amp[3];
  }
}

/// Multiply amplitudes by per-basis phases derived from Z-masks: for each
/// basis index b, factor(popcount(b & mask) parity).
inline void apply_z_phase(StateVector& psi, Index mask, Complex even_factor,
                          Complex odd_factor) {
  const Index dim = psi.size();
  for (Index b = 0; b < dim; ++b) {
    const bool odd = std::popcount(static_cast<std::uint64_t>(b & mask)) & 1;
    psi[b] *= odd ? odd_factor : even_factor;
  }
}

inline double fidelity(const StateVector& a, const StateVector& b) {
  const Complex o = a.dot(b);
  return std::norm(o);
}

/// Fidelity against a (possibly degenerate) reference subspace:
/// sum_i |<g_i|psi>|^2.
inline double subspace_fidelity(const StateVector& psi, const std::vector<StateVector>& basis) {
  double f = 0.0;
  for (const auto& g : basis) f += std::norm(g.dot(psi));
  return f;
}

}  // namespace gsprep
