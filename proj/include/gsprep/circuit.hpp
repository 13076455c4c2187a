#pragma once

#include "gsprep/hamiltonian.hpp"
#include "gsprep/states.hpp"

#include <array>
#include <utility>
#include <vector>

namespace gsprep {

// Gate-level IR over the native set {RZZ, RZ, RX} plus {H, S, Sdg}, abstract
// one- and two-qubit unitaries, and ancilla-controlled rotations. Angle
// conventions: RZZ(theta) = exp(-i theta/2 Z x Z), RZ(phi) = exp(-i phi/2 Z),
// RX(phi) = exp(-i phi/2 X). Controlled kinds carry the angle of the rotation
// applied on the control-1 branch.

enum class GateKind { RZZ, RZ, RX, H, S, Sdg, U1q, U2q, CRZZ, CRZ };

struct Gate {
  GateKind kind;
  std::array<int, 3> wires{-1, -1, -1};
  int n_wires = 0;
  double angle = 0.0;
  DenseMatrix matrix;  // U1q / U2q payload

  static Gate one(GateKind kind, int wire, double angle = 0.0) {
    Gate g;
    g.kind = kind;
    g.wires[0] = wire;
    g.n_wires = 1;
    g.angle = angle;
    return g;
  }
  static Gate rzz(int a, int b, double angle) {
    Gate g;
    g.kind = GateKind::RZZ;
    g.wires = {a, b, -1};
    g.n_wires = 2;
    g.angle = angle;
    return g;
  }
  static Gate u1q(int wire, DenseMatrix m) {
    Gate g = one(GateKind::U1q, wire);
    g.matrix = std::move(m);
    return g;
  }
  static Gate u2q(int a, int b, DenseMatrix m) {
    Gate g;
    g.kind = GateKind::U2q;
    g.wires = {a, b, -1};
    g.n_wires = 2;
    g.matrix = std::move(m);
    return g;
  }
  static Gate crz(int ctrl, int target, double angle) {
    Gate g;
    g.kind = GateKind::CRZ;
    g.wires = {ctrl, target, -1};
    g.n_wires = 2;
    g.angle = angle;
    return g;
  }
  static Gate crzz(int ctrl, int a, int b, double angle) {
    Gate g;
    g.kind = GateKind::CRZZ;
    g.wires = {ctrl, a, b};
    g.n_wires = 3;
    g.angle = angle;
    return g;
  }
};

struct Circuit {
  int n_wires = 0;
  std::vector<Gate> gates;
  double global_phase = 0.0;  // accumulated by lowering passes

  void push(Gate g) { gates.push_back(std::move(g)); }
};

namespace circuit_detail {

inline DenseMatrix mat_1q(const Gate& g) {
  DenseMatrix m(2, 2);
  switch (g.kind) {
    case GateKind::RZ:
      m << std::exp(Complex(0, -g.angle / 2)), 0, 0, std::exp(Complex(0, g.angle / 2));
      break;
    case GateKind::RX: {
      const double c = std::cos(g.angle / 2), s = std::sin(g.angle / 2);
      m << c, Complex(0, -s), Complex(0, -s), c;
      break;
    }
    case GateKind::H:
      m << 1, 1, 1, -1;
      m /= std::sqrt(2.0);
      break;
    case GateKind::S: m << 1, 0, 0, Complex(0, 1); break;
    case GateKind::Sdg: m << 1, 0, 0, Complex(0, -1); break;
    case GateKind::U1q: return g.matrix;
    default: throw Error("mat_1q: not a single-qubit gate");
  }
  return m;
}

}  // namespace circuit_detail

/// Apply the circuit to a state vector (wire 0 = most significant bit).
inline void apply_circuit(const Circuit& c, StateVector& psi) {
  if (psi.size() != (Index(1) << c.n_wires)) throw Error("apply_circuit: dimension mismatch");
  auto wire_mask = [&](int w) { return Index(1) << (c.n_wires - 1 - w); };
  for (const auto& g : c.gates) {
    switch (g.kind) {
      case GateKind::RZ:
      case GateKind::RX:
      case GateKind::H:
      case GateKind::S:
      case GateKind::Sdg:
      case GateKind::U1q:
        apply_1q(psi, circuit_detail::mat_1q(g), g.wires[0], c.n_wires);
        break;
      case GateKind::RZZ:
        apply_z_phase(psi, wire_mask(g.wires[0]) | wire_mask(g.wires[1]),
                      std::exp(Complex(0, -g.angle / 2)), std::exp(Complex(0, g.angle / 2)));
        break;
      case GateKind::U2q:
        apply_2q(psi, g.matrix, g.wires[0], g.wires[1], c.n_wires);
        break;
      case GateKind::CRZ: {
        const Index cm = wire_mask(g.wires[0]), tm = wire_mask(g.wires[1]);
        const Complex lo = std::exp(Complex(0, -g.angle / 2));
        const Complex hi = std::exp(Complex(0, g.angle / 2));
        for (Index b = 0; b < psi.size(); ++b)
          if (b & cm) psi[b] *= (b & tm) ? hi : lo;
        break;
      }
      case GateKind::CRZZ: {
        const Index cm = wire_mask(g.wires[0]);
        const Index am = wire_mask(g.wires[1]), bm = wire_mask(g.wires[2]);
        const Complex even = std::exp(Complex(0, -g.angle / 2));
        const Complex odd = std::exp(Complex(0, g.angle / 2));
        for (Index b = 0; b < psi.size(); ++b) {
          if (!(b & cm)) continue;
          const bool parity = ((b & am) != 0) ^ ((b & bm) != 0);
          psi[b] *= parity ? odd : even;
        }
        break;
      }
    }
  }
  if (c.global_phase != 0.0) psi *= std::exp(Complex(0, c.global_phase));
}

/// Dense unitary of the circuit (small wire counts).
inline DenseMatrix circuit_unitary(const Circuit& c) {
  const Index dim = Index(1) << c.n_wires;
  if (c.n_wires > 12) throw Error("circuit_unitary: too many wires for a dense build");
  DenseMatrix u(dim, dim);
  for (Index col = 0; col < dim; ++col) {
    StateVector e = basis_state(c.n_wires, col);
    apply_circuit(c, e);
    u.col(col) = e;
  }
  return u;
}

// ---------------------------------------------------------------------------
// lowering and optimization passes

/// Native realization of a controlled rotation. Exact including global phase:
///   CRZ(phi)  on (c,t)   = RZ_t(phi/2) RZZ_{ct}(-phi/2)
///   CRZZ(phi) on (c,a,b) = RZZ_{ab}(phi/2) . ZZZ-rotation(-phi/2)
/// where the three-wire Z-rotation is an RZZ conjugated by CNOT(c -> a), and
/// CNOT = H_a CZ H_a with CZ = e^{i pi/4} RZ(pi/2) RZ(pi/2) RZZ(-pi/2).
inline std::pair<std::vector<Gate>, double> lower_controlled(const Gate& g) {
  std::vector<Gate> out;
  double phase = 0.0;
  if (g.angle == 0.0) return {out, phase};
  if (g.kind == GateKind::CRZ) {
    const int c = g.wires[0], t = g.wires[1];
    out.push_back(Gate::one(GateKind::RZ, t, g.angle / 2));
    out.push_back(Gate::rzz(c, t, -g.angle / 2));
    return {out, phase};
  }
  if (g.kind != GateKind::CRZZ) throw Error("lower_controlled: not a controlled gate");
  const int c = g.wires[0], a = g.wires[1], b = g.wires[2];
  out.push_back(Gate::rzz(a, b, g.angle / 2));
  auto cnot_ca = [&]() {
    out.push_back(Gate::one(GateKind::H, a));
    out.push_back(Gate::one(GateKind::RZ, c, kPi / 2));
    out.push_back(Gate::one(GateKind::RZ, a, kPi / 2));
    out.push_back(Gate::rzz(c, a, -kPi / 2));
    phase += kPi / 4;
    out.push_back(Gate::one(GateKind::H, a));
  };
  cnot_ca();
  out.push_back(Gate::rzz(a, b, -g.angle / 2));
  cnot_ca();
  return {out, phase};
}

/// Replace all controlled gates by native sequences.
inline Circuit lower(const Circuit& c) {
  Circuit out;
  out.n_wires = c.n_wires;
  out.global_phase = c.global_phase;
  for (const auto& g : c.gates) {
    if (g.kind == GateKind::CRZ || g.kind == GateKind::CRZZ) {
      auto [gates, phase] = lower_controlled(g);
      for (auto& x : gates) out.push(std::move(x));
      out.global_phase += phase;
    } else {
      out.push(g);
    }
  }
  return out;
}

/// Fuse maximal runs of single-qubit gates between multi-qubit gates. Runs
/// that reduce to the identity (up to phase) are removed; pure-RZ runs stay
/// RZ gates.
inline Circuit merge_1q(const Circuit& c) {
  Circuit out;
  out.n_wires = c.n_wires;
  out.global_phase = c.global_phase;

  struct Pending {
    bool any = false;
    bool pure_rz = true;
    double angle = 0.0;
    DenseMatrix m = DenseMatrix::Identity(2, 2);
  };
  std::vector<Pending> pending(c.n_wires);

  auto flush = [&](int w) {
    Pending& p = pending[w];
    if (!p.any) return;
    if (p.pure_rz) {
      if (std::abs(p.angle) > 1e-15) out.push(Gate::one(GateKind::RZ, w, p.angle));
    } else if (std::abs(p.m(0, 1)) < 1e-14 && std::abs(p.m(1, 0)) < 1e-14 &&
               std::abs(p.m(0, 0) - p.m(1, 1)) < 1e-14) {
      out.global_phase += std::arg(p.m(0, 0));  // proportional to identity
    } else {
      out.push(Gate::u1q(w, p.m));
    }
    p = Pending{};
  };

  for (const auto& g : c.gates) {
    if (g.n_wires == 1) {
      Pending& p = pending[g.wires[0]];
      p.any = true;
      if (g.kind == GateKind::RZ) {
        p.angle += g.angle;
      } else {
        p.pure_rz = false;
      }
      p.m = circuit_detail::mat_1q(g) * p.m;
    } else {
      for (int k = 0; k < g.n_wires; ++k) flush(g.wires[k]);
      out.push(g);
    }
  }
  for (int w = 0; w < c.n_wires; ++w) flush(w);
  return out;
}

/// Longest path in the wire-dependency DAG; every gate costs 1.
inline Index dag_depth(const Circuit& c) {
  std::vector<Index> depth(c.n_wires, 0);
  Index total = 0;
  for (const auto& g : c.gates) {
    Index d = 0;
    for (int k = 0; k < g.n_wires; ++k) d = std::max(d, depth[g.wires[k]]);
    ++d;
    for (int k = 0; k < g.n_wires; ++k) depth[g.wires[k]] = d;
    total = std::max(total, d);
  }
  return total;
}

inline Index rzz_count(const Circuit& c) {
  Index n = 0;
  for (const auto& g : c.gates)
    if (g.kind == GateKind::RZZ) ++n;
  return n;
}

/// Depth convention D1: DAG longest path of the lowered and 1q-merged native
/// circuit (ancilla preparation gates included).
inline Index depth_d1(const Circuit& c) { return dag_depth(merge_1q(lower(c))); }

// ---------------------------------------------------------------------------
// builders

namespace circuit_detail {

// Pauli-pair rotation exp(-i tau c P P) on the given wires, as RZZ(2 tau c)
// conjugated into the right basis; X and Y need single-qubit dressings.
// When `ctrl` >= 0 the rotation is promoted to its ancilla-controlled form
// (the dressings stay uncontrolled).
inline void emit_pair(Circuit& out, char letter, int wa, int wb, double theta, int ctrl) {
  const bool x = letter == 'X', y = letter == 'Y';
  if (y) {
    out.push(Gate::one(GateKind::Sdg, wa));
    out.push(Gate::one(GateKind::Sdg, wb));
  }
  if (x || y) {
    out.push(Gate::one(GateKind::H, wa));
    out.push(Gate::one(GateKind::H, wb));
  }
  if (ctrl >= 0) {
    out.push(Gate::crzz(ctrl, wa, wb, theta));
  } else {
    out.push(Gate::rzz(wa, wb, theta));
  }
  if (x || y) {
    out.push(Gate::one(GateKind::H, wa));
    out.push(Gate::one(GateKind::H, wb));
  }
  if (y) {
    out.push(Gate::one(GateKind::S, wa));
    out.push(Gate::one(GateKind::S, wb));
  }
}

// One symmetric slice E(dt/2) O(dt/2) F(dt) O(dt/2) E(dt/2); `offset` maps
// 1-based sites to wires, `ctrl` < 0 for the plain (uncontrolled) slice.
inline void emit_strang_slice(Circuit& out, const TermSplit& split, double dt, int offset,
                              int ctrl) {
  auto emit_group = [&](const std::vector<PauliTerm>& terms, double tau, bool field) {
    for (const auto& t : terms) {
      const std::string s = t.string.to_string();
      if (field) {
        const int site = static_cast<int>(s.find('Z')) + 1;
        const double theta = 2.0 * tau * t.coeff;
        if (ctrl >= 0) {
          out.push(Gate::crz(ctrl, site - 1 + offset, theta));
        } else {
          out.push(Gate::one(GateKind::RZ, site - 1 + offset, theta));
        }
      } else {
        int wa = -1;
        char letter = 'Z';
        for (int i = 0; i < static_cast<int>(s.size()); ++i) {
          if (s[i] != 'I') {
            wa = i + offset;
            letter = s[i];
            break;
          }
        }
        emit_pair(out, letter, wa, wa + 1, 2.0 * tau * t.coeff, ctrl);
      }
    }
  };
  emit_group(split.even_bonds, dt / 2, false);
  emit_group(split.odd_bonds, dt / 2, false);
  emit_group(split.field_terms, dt, true);
  emit_group(split.odd_bonds, dt / 2, false);
  emit_group(split.even_bonds, dt / 2, false);
}

}  // namespace circuit_detail

/// One second-order Trotter slice over N system wires (wire w = site w+1).
inline Circuit build_trotter_slice(const TermSplit& split, int n_sites, double dt) {
  if (!std::isfinite(dt)) throw Error("build_trotter_slice: dt must be finite");
  Circuit c;
  c.n_wires = n_sites;
  circuit_detail::emit_strang_slice(c, split, dt, 0, -1);
  return c;
}

/// Parameters of one probabilistic imaginary-time step. The ancilla rotation
/// angle compensates the energy shift, which the controlled evolution blocks
/// do not carry (identity terms produce no gates):
///   theta_eff = kappa Theta + s dtau E_shift,  kappa Theta = pi/4 - arccos(m0),
/// making the post-selected map exactly
///   m0 [ cos((H - E_shift) s dtau) - sin((H - E_shift) s dtau) / s ].
struct PiteStepParams {
  double m0 = 0.999;
  double s = 0.0;
  double big_theta = 0.0;  // arccos((m0 + sqrt(1 - m0^2)) / sqrt(2))
  int kappa = 1;
  double e_shift = 0.0;
  double dtau = 0.0;
  double theta_eff = 0.0;

  PiteStepParams() = default;
  PiteStepParams(double m0_, double e_shift_, double dtau_) : m0(m0_), e_shift(e_shift_),
                                                              dtau(dtau_) {
    if (m0 <= 0.0 || m0 >= 1.0) throw Error("PiteStepParams: m0 must lie in (0, 1)");
    s = m0 / std::sqrt(1.0 - m0 * m0);
    big_theta = std::acos((m0 + std::sqrt(1.0 - m0 * m0)) / std::sqrt(2.0));
    kappa = (m0 >= 1.0 / std::sqrt(2.0)) ? 1 : -1;
    theta_eff = kappa * big_theta + s * dtau * e_shift;
  }

  double alpha() const { return s * dtau; }  // real-time scale of one step
};

/// One-ancilla probabilistic filter step on N+1 wires (ancilla = wire 0):
/// H, W on the ancilla; the forward evolution conditioned on ancilla 0 and
/// the backward evolution conditioned on ancilla 1, each as r_k controlled
/// Strang slices; then RZ(-2 theta_eff) and W^dag. Post-selecting ancilla 0
/// applies the first-order imaginary-time filter to the system register.
inline Circuit build_pite_step(const TermSplit& split, int n_sites,
                               const PiteStepParams& params, int reps) {
  if (reps < 1) throw Error("build_pite_step: need at least one repetition");
  Circuit c;
  c.n_wires = n_sites + 1;

  DenseMatrix w_gate(2, 2);
  w_gate << 1, Complex(0, -1), 1, Complex(0, 1);
  w_gate /= std::sqrt(2.0);

  c.push(Gate::one(GateKind::H, 0));
  c.push(Gate::u1q(0, w_gate));

  const double delta = params.alpha() / reps;
  // forward block, conditioned on ancilla |0>: X-conjugate the controls
  c.push(Gate::one(GateKind::RX, 0, kPi));
  c.global_phase += kPi / 2;
  for (int rep = 0; rep < reps; ++rep)
    circuit_detail::emit_strang_slice(c, split, delta, 1, 0);
  c.push(Gate::one(GateKind::RX, 0, kPi));
  c.global_phase += kPi / 2;
  // backward block, conditioned on ancilla |1>
  for (int rep = 0; rep < reps; ++rep)
    circuit_detail::emit_strang_slice(c, split, -delta, 1, 0);

  c.push(Gate::one(GateKind::RZ, 0, -2.0 * params.theta_eff));
  c.push(Gate::u1q(0, w_gate.adjoint()));
  return c;
}

/// Apply the step circuit to |0>_ancilla x |psi> and project on ancilla
/// outcome 0 (wire 0 is the most significant bit, so that is the top half of
/// the register). Returns the renormalized system state and the success
/// probability.
inline std::pair<StateVector, double> post_selected_map(const Circuit& c,
                                                        const StateVector& psi) {
  const Index sys_dim = psi.size();
  if ((Index(1) << c.n_wires) != 2 * sys_dim)
    throw Error("post_selected_map: circuit must have one ancilla above the system register");
  StateVector full = StateVector::Zero(2 * sys_dim);
  full.head(sys_dim) = psi;
  apply_circuit(c, full);
  StateVector branch = full.head(sys_dim);
  const double p = branch.squaredNorm();
  if (p > 0.0) branch /= std::sqrt(p);
  return {branch, p};
}

}  // namespace gsprep
