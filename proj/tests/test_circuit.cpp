#include <catch2/catch_amalgamated.hpp>

#include "gsprep/circuit.hpp"
#include "gsprep/hamiltonian.hpp"
#include "oracles.hpp"

using namespace gsprep;

namespace {

DenseMatrix controlled_dense(const Gate& g, int n_wires) {
  // oracle: control on the first wire, Z-type rotation on the rest
  const Index dim = Index(1) << n_wires;
  DenseMatrix u = DenseMatrix::Identity(dim, dim);
  for (Index b = 0; b < dim; ++b) {
    if (!(b & (Index(1) << (n_wires - 1)))) continue;  // control wire = MSB
    double z = 1.0;
    for (int k = 1; k < g.n_wires; ++k) {
      const int wire = g.wires[k];
      z *= (b & (Index(1) << (n_wires - 1 - wire))) ? -1.0 : 1.0;
    }
    u(b, b) = std::exp(Complex(0, -g.angle / 2 * z));
  }
  return u;
}

}  // namespace

TEST_CASE("trotter slice at dt=0 is the identity") {
  const HamiltonianSpec spec{4, 1.0, 0.5};
  const Circuit c = build_trotter_slice(split_terms(spec), 4, 0.0);
  const DenseMatrix u = circuit_unitary(c);
  CHECK((u - DenseMatrix::Identity(16, 16)).norm() < 1e-12);
}

TEST_CASE("trotter slice is exact for a single bond") {
  // N=2, h_z=0: only the even group acts, so the slice is the exact
  // propagator of the full Hamiltonian
  const HamiltonianSpec spec{2, 1.0, 0.0};
  const double dt = 0.1;
  const Circuit c = build_trotter_slice(split_terms(spec), 2, dt);
  const DenseMatrix expect = oracle::expm_unitary(oracle::heisenberg_dense(2, 1.0, 0.0), dt);
  CHECK((circuit_unitary(c) - expect).norm() < 1e-13);
}

TEST_CASE("trotter slice equals the analytic Strang product") {
  for (int n : {3, 4, 6}) {
    for (double hz : {0.0, 0.5}) {
      const HamiltonianSpec spec{n, 1.0, hz};
      const TermSplit split = split_terms(spec);
      const double dt = 0.17;
      auto group_dense = [&](const std::vector<PauliTerm>& terms, double tau) {
        const Index dim = Index(1) << n;
        DenseMatrix h = DenseMatrix::Zero(dim, dim);
        for (const auto& t : terms) h += Complex(t.coeff, 0) * t.string.dense();
        return oracle::expm_unitary(h, tau);
      };
      const DenseMatrix expect = group_dense(split.even_bonds, dt / 2) *
                                 group_dense(split.odd_bonds, dt / 2) *
                                 group_dense(split.field_terms, dt) *
                                 group_dense(split.odd_bonds, dt / 2) *
                                 group_dense(split.even_bonds, dt / 2);
      const Circuit c = build_trotter_slice(split, n, dt);
      CHECK((circuit_unitary(c) - expect).norm() < 1e-12);
    }
  }
}

TEST_CASE("strang error scales as dt^3 per slice") {
  const HamiltonianSpec spec{4, 1.0, 0.5};
  const TermSplit split = split_terms(spec);
  const DenseMatrix h = oracle::heisenberg_dense(4, 1.0, 0.5);
  std::vector<double> errs;
  for (double dt : {0.1, 0.05, 0.025}) {
    const DenseMatrix u = circuit_unitary(build_trotter_slice(split, 4, dt));
    errs.push_back((u - oracle::expm_unitary(h, dt)).norm());
  }
  const double slope1 = std::log2(errs[0] / errs[1]);
  const double slope2 = std::log2(errs[1] / errs[2]);
  CHECK(slope1 == Catch::Approx(3.0).margin(0.2));
  CHECK(slope2 == Catch::Approx(3.0).margin(0.2));
}

TEST_CASE("lower_controlled reproduces controlled gates exactly") {
  // CRZ(0) lowers to nothing
  CHECK(lower_controlled(Gate::crz(0, 1, 0.0)).first.empty());

  for (double angle : {kPi, 0.3, -1.7}) {
    const Gate g = Gate::crz(0, 1, angle);
    Circuit c;
    c.n_wires = 2;
    auto [gates, phase] = lower_controlled(g);
    for (auto& x : gates) c.push(x);
    c.global_phase = phase;
    CHECK((circuit_unitary(c) - controlled_dense(g, 2)).norm() < 1e-12);
  }

  for (double angle : {0.3, 2.1, -0.9}) {
    const Gate g = Gate::crzz(0, 1, 2, angle);
    Circuit c;
    c.n_wires = 3;
    auto [gates, phase] = lower_controlled(g);
    for (auto& x : gates) c.push(x);
    c.global_phase = phase;
    CHECK((circuit_unitary(c) - controlled_dense(g, 3)).norm() < 1e-12);
  }
}

TEST_CASE("lower preserves the circuit unitary") {
  const HamiltonianSpec spec{3, 1.0, 0.5};
  const Circuit c = build_pite_step(split_terms(spec), 3, PiteStepParams(0.9, -1.0, 0.05), 2);
  const DenseMatrix before = circuit_unitary(c);
  const DenseMatrix after = circuit_unitary(lower(c));
  CHECK((before - after).norm() < 1e-11);
}

TEST_CASE("merge_1q fuses runs and preserves unitaries") {
  // RZ(a) RZ(b) -> RZ(a+b)
  {
    Circuit c;
    c.n_wires = 1;
    c.push(Gate::one(GateKind::RZ, 0, 0.3));
    c.push(Gate::one(GateKind::RZ, 0, 0.4));
    const Circuit m = merge_1q(c);
    REQUIRE(m.gates.size() == 1);
    CHECK(m.gates[0].kind == GateKind::RZ);
    CHECK(m.gates[0].angle == Catch::Approx(0.7));
  }
  // H H -> removed
  {
    Circuit c;
    c.n_wires = 1;
    c.push(Gate::one(GateKind::H, 0));
    c.push(Gate::one(GateKind::H, 0));
    const Circuit m = merge_1q(c);
    CHECK(m.gates.empty());
    CHECK(std::abs(m.global_phase) < 1e-14);
  }
  // random 4-wire circuit: dense unitary preserved, count non-increasing
  {
    Rng rng(403);
    Circuit c;
    c.n_wires = 4;
    for (int i = 0; i < 60; ++i) {
      const int w = static_cast<int>(rng.next_u64() % 4);
      switch (rng.next_u64() % 5) {
        case 0: c.push(Gate::one(GateKind::RZ, w, rng.gaussian())); break;
        case 1: c.push(Gate::one(GateKind::H, w)); break;
        case 2: c.push(Gate::one(GateKind::S, w)); break;
        case 3: c.push(Gate::one(GateKind::RX, w, rng.gaussian())); break;
        default: c.push(Gate::rzz(w, (w + 1) % 4, rng.gaussian())); break;
      }
    }
    const Circuit m = merge_1q(c);
    CHECK(m.gates.size() <= c.gates.size());
    CHECK((circuit_unitary(m) - circuit_unitary(c)).norm() < 1e-12);
    CHECK(dag_depth(m) <= dag_depth(c));
  }
}

TEST_CASE("dag_depth basics") {
  Circuit c;
  c.n_wires = 4;
  CHECK(dag_depth(c) == 0);

  // two disjoint RZZ run in parallel
  c.push(Gate::rzz(0, 1, 0.1));
  c.push(Gate::rzz(2, 3, 0.1));
  CHECK(dag_depth(c) == 1);

  // a staircase of N-1 two-qubit gates plus a final single-qubit gate has
  // depth N: every gate shares a wire with its predecessor
  Circuit stair;
  stair.n_wires = 6;
  for (int w = 0; w < 5; ++w) stair.push(Gate::u2q(w, w + 1, DenseMatrix::Identity(4, 4)));
  stair.push(Gate::u1q(5, DenseMatrix::Identity(2, 2)));
  CHECK(dag_depth(stair) == 6);
}

TEST_CASE("depth is subadditive under concatenation") {
  Rng rng(407);
  Circuit a, b;
  a.n_wires = b.n_wires = 4;
  for (int i = 0; i < 12; ++i) {
    a.push(Gate::rzz(static_cast<int>(rng.next_u64() % 3), 3, rng.gaussian()));
    b.push(Gate::one(GateKind::RX, static_cast<int>(rng.next_u64() % 4), rng.gaussian()));
  }
  Circuit both = a;
  for (const auto& g : b.gates) both.push(g);
  CHECK(dag_depth(both) <= dag_depth(a) + dag_depth(b));
}

TEST_CASE("pite step unitarity: outcome probabilities sum to 1") {
  Rng rng(409);
  const HamiltonianSpec spec{3, 1.0, 0.5};
  const Circuit c = build_pite_step(split_terms(spec), 3, PiteStepParams(0.999, -1.2, 0.08), 2);
  const StateVector psi = random_state(8, rng);
  StateVector full = StateVector::Zero(16);
  full.head(8) = psi;
  apply_circuit(c, full);
  CHECK(std::abs(full.norm() - 1.0) < 1e-12);
  const double p0 = full.head(8).squaredNorm();
  const double p1 = full.tail(8).squaredNorm();
  CHECK(p0 + p1 == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("pite step at dtau=0 filters every eigenstate by m0") {
  const HamiltonianSpec spec{2, 1.0, 0.5};
  const double m0 = 0.999;
  const Circuit c = build_pite_step(split_terms(spec), 2, PiteStepParams(m0, -0.7, 0.0), 1);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(oracle::heisenberg_dense(2, 1.0, 0.5));
  for (Index i = 0; i < 4; ++i) {
    const StateVector v = es.eigenvectors().col(i);
    const auto [state, p] = post_selected_map(c, v);
    CHECK(p == Catch::Approx(m0 * m0).margin(1e-10));
    CHECK(fidelity(state, v) == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("pite step depth grows with repetitions and system size") {
  const HamiltonianSpec small{4, 1.0, 0.5};
  const HamiltonianSpec large{6, 1.0, 0.5};
  const PiteStepParams params(0.999, -2.0, 0.05);
  const Index d1 = depth_d1(build_pite_step(split_terms(small), 4, params, 1));
  const Index d2 = depth_d1(build_pite_step(split_terms(small), 4, params, 2));
  const Index d3 = depth_d1(build_pite_step(split_terms(large), 6, params, 1));
  CHECK(d2 > d1);
  CHECK(d3 > d1);
}

TEST_CASE("rzz_count counts native two-wire couplers after lowering") {
  const HamiltonianSpec spec{3, 1.0, 0.5};
  const Circuit raw = build_pite_step(split_terms(spec), 3, PiteStepParams(0.999, -1.0, 0.05), 1);
  const Circuit native = merge_1q(lower(raw));
  CHECK(rzz_count(native) > 0);
  for (const auto& g : native.gates) {
    CHECK(g.kind != GateKind::CRZZ);
    CHECK(g.kind != GateKind::CRZ);
  }
}
