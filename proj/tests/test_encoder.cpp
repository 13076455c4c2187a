#include <catch2/catch_amalgamated.hpp>

#include "gsprep/dmrg.hpp"
#include "gsprep/encoder.hpp"
#include "gsprep/hamiltonian.hpp"

using namespace gsprep;

namespace {

Mps random_rank2_mps(int n, Rng& rng) { return Mps::random(n, 2, rng); }

double disentangle_infidelity(const Mps& mps2) {
  StateVector psi = mps2.to_statevector();
  const MpdLayer layer = build_mpd_layer(mps2);
  layer.apply_disentangle(psi);
  return 1.0 - std::norm(psi[0]);
}

}  // namespace

TEST_CASE("complete_isometry reproduces the tensor rows and is unitary") {
  Rng rng(201);
  const Mps mps = random_rank2_mps(5, rng);
  for (int site = 1; site < 5; ++site) {
    const SiteTensor& a = mps.tensor(site);
    const DenseMatrix g = complete_isometry(a);
    CHECK((g * g.adjoint() - DenseMatrix::Identity(4, 4)).norm() < 1e-12);
    CHECK((g.adjoint() * g - DenseMatrix::Identity(4, 4)).norm() < 1e-12);
    for (Index j = 0; j < a.left_dim(); ++j)
      for (int s = 0; s < 2; ++s)
        for (Index b = 0; b < a.right_dim(); ++b)
          CHECK(std::abs(g(j, s * 2 + b) - a.block[s](j, b)) < 1e-14);
  }
  // boundary completion is a single-qubit unitary
  const DenseMatrix g2 = complete_boundary(mps.tensor(5));
  CHECK(g2.rows() == 2);
  CHECK((g2 * g2.adjoint() - DenseMatrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("complete_isometry on a product-state tensor") {
  // site tensor of |0>: A[0] row = (1, 0, 0, 0) in the (sigma, b) layout
  SiteTensor t = SiteTensor::zero(1, 1);
  t.block[0](0, 0) = 1.0;
  const DenseMatrix g = complete_isometry(t);
  CHECK((g * g.adjoint() - DenseMatrix::Identity(4, 4)).norm() < 1e-12);
  CHECK(std::abs(g(0, 0) - Complex(1, 0)) < 1e-14);
}

TEST_CASE("complete_isometry rejects non-isometric input") {
  SiteTensor t = SiteTensor::zero(2, 2);
  t.block[0](0, 0) = 0.5;  // rows far from orthonormal
  CHECK_THROWS_AS(complete_isometry(t), Error);
}

TEST_CASE("completion is deterministic") {
  Rng rng(203);
  const Mps mps = random_rank2_mps(4, rng);
  const DenseMatrix a = complete_isometry(mps.tensor(2));
  const DenseMatrix b = complete_isometry(mps.tensor(2));
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("one layer disentangles its rank-2 source") {
  Rng rng(207);
  for (int n : {2, 4, 6, 8}) {
    for (int rep = 0; rep < 10; ++rep) {
      CHECK(disentangle_infidelity(random_rank2_mps(n, rng)) < 1e-9);
    }
  }
}

TEST_CASE("layer fixes |0...0>") {
  // rank-2 MPS of the all-zero product state
  StateVector zero = basis_state(4, 0);
  const Mps mps2 = compress(Mps::from_statevector(zero, 4), 2);
  const MpdLayer layer = build_mpd_layer(mps2);
  StateVector psi = zero;
  layer.apply_disentangle(psi);
  CHECK(std::norm(psi[0]) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("N=2 singlet disentangles to |00> exactly") {
  StateVector singlet(4);
  singlet << 0, 1 / std::sqrt(2.0), -1 / std::sqrt(2.0), 0;
  const Mps mps2 = compress(Mps::from_statevector(singlet, 2), 2);
  const MpdLayer layer = build_mpd_layer(mps2);
  StateVector psi = singlet;
  layer.apply_disentangle(psi);
  CHECK(std::abs(psi[0] - Complex(1, 0)) < 1e-12);
}

TEST_CASE("layer application preserves norm") {
  Rng rng(211);
  const int n = 5;
  const Mps mps2 = random_rank2_mps(n, rng);
  const MpdLayer layer = build_mpd_layer(mps2);
  StateVector psi = random_state(Index(1) << n, rng);
  layer.apply_disentangle(psi);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-12);
  layer.apply_encode(psi);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-12);
}

TEST_CASE("encode is the exact inverse of disentangle") {
  Rng rng(213);
  const int n = 6;
  const Mps mps2 = random_rank2_mps(n, rng);
  const MpdLayer layer = build_mpd_layer(mps2);
  const StateVector psi0 = random_state(Index(1) << n, rng);
  StateVector psi = psi0;
  layer.apply_disentangle(psi);
  layer.apply_encode(psi);
  CHECK((psi - psi0).norm() < 1e-12);
}

TEST_CASE("encode_state basics") {
  Rng rng(217);
  const int n = 6;
  const StateVector psi0 = random_state(Index(1) << n, rng);
  const auto ref = std::vector<StateVector>{psi0};
  const auto result = run_disentangler(psi0, 4, ref);

  // L = 0 is the vacuum
  CHECK((encode_state(result.layers, 0) - basis_state(n, 0)).norm() < 1e-15);

  // round trip: disentangling the encoded state returns |0...0>
  StateVector enc = encode_state(result.layers, 4);
  for (const auto& layer : result.layers) layer.apply_disentangle(enc);
  CHECK(std::abs(enc[0] - Complex(1, 0)) < 1e-10);
}

TEST_CASE("one layer suffices for an exact rank-2 target") {
  Rng rng(219);
  const int n = 6;
  const StateVector target = random_rank2_mps(n, rng).to_statevector();
  const auto result = run_disentangler(target, 1, {target});
  CHECK(result.diagnostics.records[1].if_per_site * n <= 1e-9);
  const StateVector enc = encode_state(result.layers, 1);
  CHECK(fidelity(enc, target) > 1.0 - 1e-9);
}

TEST_CASE("diagnostic fidelity equals the recomputed overlap") {
  Rng rng(223);
  const int n = 5;
  const StateVector psi0 = random_state(Index(1) << n, rng);
  const StateVector ref = random_state(Index(1) << n, rng);
  const auto result = run_disentangler(psi0, 5, {ref});
  for (int l = 0; l <= 5; ++l) {
    const double f = fidelity(ref, encode_state(result.layers, l));
    CHECK(std::abs(f - result.diagnostics.records[l].fidelity) < 1e-12);
  }
}

TEST_CASE("product-state input is disentangled at the first layer") {
  const int n = 6;
  const StateVector psi0 = neel_state(n);
  const auto result = run_disentangler(psi0, 3, {psi0});
  CHECK(result.diagnostics.records[1].chi_cut == 1);
  // F stabilizes after layer 1
  for (int l = 2; l <= 3; ++l) {
    CHECK(result.diagnostics.records[l].fidelity ==
          Catch::Approx(result.diagnostics.records[1].fidelity).margin(1e-10));
  }
}

TEST_CASE("rank bound holds along the pipeline") {
  Rng rng(227);
  const int n = 6;
  const StateVector psi0 = random_state(Index(1) << n, rng);
  const auto result = run_disentangler(psi0, 6, {psi0});
  for (const auto& r : result.diagnostics.records) {
    CHECK(r.chi_cut <= result.diagnostics.chi_max);
    CHECK(r.chi_cut >= 1);
  }
}

TEST_CASE("find_lstar recovers planted logistic parameters") {
  const double r0 = 1.0 / 16.0, gamma = 0.5;
  EncodingDiagnostics diag;
  diag.n_sites = 8;
  diag.chi_max = 16;
  for (int l = 1; l <= 30; ++l) {
    LayerRecord rec;
    rec.layer = l;
    rec.chi_ratio = 1.0 / (1.0 + (1.0 / r0 - 1.0) * std::exp(-gamma * l));
    rec.chi_cut = static_cast<Index>(std::round(rec.chi_ratio * 16));
    diag.records.push_back(rec);
  }
  const LstarResult result = find_lstar(diag);
  CHECK(result.l_star == Catch::Approx(std::log(15.0) / 0.5).epsilon(1e-6));
  CHECK(result.fit.r0 == Catch::Approx(r0).epsilon(1e-6));
  CHECK(result.fit.gamma == Catch::Approx(gamma).epsilon(1e-6));
}

TEST_CASE("find_lstar rejects saturated rank data") {
  EncodingDiagnostics diag;
  diag.n_sites = 4;
  diag.chi_max = 4;
  for (int l = 1; l <= 8; ++l) {
    LayerRecord rec;
    rec.layer = l;
    rec.chi_ratio = 1.0;
    rec.chi_cut = 4;
    diag.records.push_back(rec);
  }
  CHECK_THROWS_AS(find_lstar(diag), Error);
}

TEST_CASE("dmrg state runs through the encoder with sane diagnostics") {
  const HamiltonianSpec spec{8, 1.0, 0.5};
  const auto dmrg = dmrg_ground(build_mpo(spec), 8);
  const auto ref = reference_spectrum(spec, 1e-11);
  const StateVector psi0 = dmrg.state.to_statevector();
  const auto result = run_disentangler(psi0, 32, ref.ground_multiplet);

  // the layer-0 record carries the input state's rank; the rank then grows
  // toward saturation under the staircase
  const auto& recs = result.diagnostics.records;
  CHECK(recs.front().layer == 0);
  CHECK(recs.front().chi_ratio ==
        Catch::Approx(double(schmidt_spectrum(psi0, 8, 4).rank) / 16.0).margin(1e-12));
  double running_max = 0.0;
  for (const auto& r : recs) running_max = std::max(running_max, r.chi_ratio);
  CHECK(running_max >= recs.front().chi_ratio);

  // parametric and nonparametric layer scales agree within 2 layers
  const LstarResult lstar = find_lstar(result.diagnostics);
  CHECK(lstar.crossing_found);
  CHECK(std::abs(lstar.l_star - lstar.l_star_nonparametric) <= 2.0);

  // fidelity improves over the first layers
  CHECK(recs.back().fidelity > recs.front().fidelity - 1e-9);
}
