#include <catch2/catch_amalgamated.hpp>

#include "gsprep/numerics.hpp"
#include "gsprep/hamiltonian.hpp"
#include "oracles.hpp"

using namespace gsprep;

namespace {

HermitianOperator diag_operator(const std::vector<double>& d) {
  return {static_cast<Index>(d.size()), [d](const StateVector& x, StateVector& y) {
            y.resize(x.size());
            for (Index i = 0; i < x.size(); ++i) y[i] = d[i] * x[i];
          }};
}

HermitianOperator dense_operator(const DenseMatrix& m) {
  return {m.rows(), [m](const StateVector& x, StateVector& y) { y = m * x; }};
}

}  // namespace

TEST_CASE("svd identity and diagonal cases") {
  SvdResult r = svd(DenseMatrix::Identity(2, 2));
  CHECK(r.s[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(r.s[1] == Catch::Approx(1.0).margin(1e-14));

  DenseMatrix d = DenseMatrix::Zero(2, 2);
  d(0, 0) = 3.0;
  r = svd(d);
  CHECK(r.s[0] == Catch::Approx(3.0).margin(1e-14));
  CHECK(r.s[1] == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("svd reconstructs random matrices with orthonormal factors") {
  Rng rng(11);
  for (Index n : {8, 33, 128}) {
    const DenseMatrix m = oracle::random_matrix(n, n, rng);
    const SvdResult r = svd(m);
    const DenseMatrix rec = r.u * r.s.cast<Complex>().asDiagonal() * r.vh;
    CHECK((rec - m).norm() < 1e-12 * m.norm());
    CHECK((r.u.adjoint() * r.u - DenseMatrix::Identity(n, n)).norm() < 1e-12 * std::sqrt(n));
    CHECK((r.vh * r.vh.adjoint() - DenseMatrix::Identity(n, n)).norm() < 1e-12 * std::sqrt(n));
    for (Index i = 1; i < r.s.size(); ++i) CHECK(r.s[i] <= r.s[i - 1] + 1e-15);
  }
}

TEST_CASE("svd reconstruction at 1024x1024") {
  Rng rng(12);
  const DenseMatrix m = oracle::random_matrix(1024, 1024, rng);
  const SvdResult r = svd(m);
  const DenseMatrix rec = r.u * r.s.cast<Complex>().asDiagonal() * r.vh;
  CHECK((rec - m).norm() < 1e-12 * m.norm() * 32);
}

TEST_CASE("dense_eig_hermitian basics") {
  DenseMatrix one(1, 1);
  one << 5.0;
  CHECK(dense_eig_hermitian(one).values[0] == Catch::Approx(5.0));

  DenseMatrix z(2, 2);
  z << 1, 0, 0, -1;
  const EigResult r = dense_eig_hermitian(z);
  CHECK(r.values[0] == Catch::Approx(-1.0));
  CHECK(r.values[1] == Catch::Approx(1.0));

  DenseMatrix bad(2, 2);
  bad << 0, 1, 0, 0;
  CHECK_THROWS_AS(dense_eig_hermitian(bad), Error);
}

TEST_CASE("dense_eig_hermitian residual on random 16x16") {
  Rng rng(13);
  const DenseMatrix m = oracle::random_hermitian(16, rng);
  const EigResult r = dense_eig_hermitian(m);
  const DenseMatrix resid = m * r.vectors - r.vectors * r.values.cast<Complex>().asDiagonal();
  CHECK(resid.norm() < 1e-11 * m.norm());
}

TEST_CASE("lanczos_extremal on diagonal operator") {
  const auto pairs = lanczos_extremal(diag_operator({0, 1, 2, 3}), 2, 1e-12);
  CHECK(pairs[0].value == Catch::Approx(0.0).margin(1e-10));
  CHECK(pairs[1].value == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("lanczos_extremal on small Heisenberg chains") {
  // N=2: singlet/triplet
  HamiltonianSpec spec{2, 1.0, 0.0};
  auto op = build_hamiltonian(spec);
  auto pairs = lanczos_extremal(op.as_operator(), 2, 1e-12);
  CHECK(pairs[0].value == Catch::Approx(-0.75).margin(1e-10));
  CHECK(pairs[1].value == Catch::Approx(0.25).margin(1e-10));

  // N=4 against the dense oracle
  spec.n_sites = 4;
  op = build_hamiltonian(spec);
  pairs = lanczos_extremal(op.as_operator(), 1, 1e-13);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(oracle::heisenberg_dense(4, 1.0, 0.0));
  CHECK(pairs[0].value == Catch::Approx(es.eigenvalues()[0]).margin(1e-10));
}

TEST_CASE("lanczos_extremal matches dense spectra with orthogonal vectors") {
  Rng rng(17);
  for (Index dim : {16, 64, 256}) {
    const DenseMatrix m = oracle::random_hermitian(dim, rng);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m);
    const auto pairs = lanczos_extremal(dense_operator(m), 3, 1e-12);
    for (int i = 0; i < 3; ++i) {
      CHECK(pairs[i].value == Catch::Approx(es.eigenvalues()[i]).margin(1e-10 * m.norm()));
      CHECK(pairs[i].vector.norm() == Catch::Approx(1.0).margin(1e-10));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        CHECK(std::abs(pairs[i].vector.dot(pairs[j].vector)) < 1e-8);
  }
}

TEST_CASE("lanczos_extremal resolves degenerate levels") {
  const auto pairs = lanczos_extremal(diag_operator({0, 0, 1, 2, 3, 4}), 3, 1e-12);
  CHECK(pairs[0].value == Catch::Approx(0.0).margin(1e-10));
  CHECK(pairs[1].value == Catch::Approx(0.0).margin(1e-10));
  CHECK(pairs[2].value == Catch::Approx(1.0).margin(1e-10));
  CHECK(std::abs(pairs[0].vector.dot(pairs[1].vector)) < 1e-8);
}

TEST_CASE("lanczos_extremal rejects k larger than dimension") {
  CHECK_THROWS_AS(lanczos_extremal(diag_operator({1.0}), 2, 1e-10), Error);
}

TEST_CASE("krylov_expmv trivial and phase cases") {
  Rng rng(23);
  const StateVector v = random_state(8, rng);
  CHECK((krylov_expmv(diag_operator({0, 1, 2, 3, 4, 5, 6, 7}), 0.0, v, 1e-12) - v).norm() ==
        Catch::Approx(0.0).margin(1e-15));

  StateVector e1(2);
  e1 << 0.0, 1.0;
  const StateVector out = krylov_expmv(diag_operator({0.0, kPi}), 1.0, e1, 1e-12);
  CHECK(std::abs(out[1] - Complex(-1.0, 0.0)) < 1e-12);
  CHECK(std::abs(out[0]) < 1e-14);
}

TEST_CASE("krylov_expmv matches dense propagator on N=4 Heisenberg") {
  Rng rng(29);
  const DenseMatrix h = oracle::heisenberg_dense(4, 1.0, 0.0);
  const StateVector v = random_state(16, rng);
  const StateVector expect = oracle::expm_unitary(h, 0.3) * v;
  const auto op = build_hamiltonian({4, 1.0, 0.0});
  const StateVector got = krylov_expmv(op.as_operator(), 0.3, v, 1e-12);
  CHECK((got - expect).norm() < 1e-10);
}

TEST_CASE("krylov_expmv is unitary and invertible") {
  Rng rng(31);
  const auto op = build_hamiltonian({5, 1.0, 0.5});
  const StateVector v = random_state(32, rng);
  const double tol = 1e-11;
  const StateVector fwd = krylov_expmv(op.as_operator(), 1.7, v, tol);
  CHECK(std::abs(fwd.norm() - 1.0) < tol);
  const StateVector back = krylov_expmv(op.as_operator(), -1.7, fwd, tol);
  CHECK((back - v).norm() < 2 * tol);
}

TEST_CASE("krylov_expmv substeps long times") {
  Rng rng(37);
  const DenseMatrix h = oracle::heisenberg_dense(6, 1.0, 0.5);
  const auto op = build_hamiltonian({6, 1.0, 0.5});
  const StateVector v = random_state(64, rng);
  const StateVector expect = oracle::expm_unitary(h, 25.0) * v;
  const StateVector got = krylov_expmv(op.as_operator(), 25.0, v, 1e-10);
  CHECK((got - expect).norm() < 1e-8);
}
