#pragma once

#include "gsprep/common.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

namespace gsprep {

/// Hermitian operator given by its dimension and a matvec contract.
/// All solvers below only touch the operator through `apply`.
struct HermitianOperator {
  Index dim = 0;
  std::function<void(const StateVector&, StateVector&)> apply;

  StateVector operator()(const StateVector& x) const {
    StateVector y(dim);
    apply(x, y);
    return y;
  }
};

struct SvdResult {
  DenseMatrix u;
  RealVector s;  // descending
  DenseMatrix vh;
};

/// Thin SVD, M = U diag(S) Vh. Singular values descending.
inline SvdResult svd(const DenseMatrix& m) {
  if (!m.allFinite()) throw Error("svd: non-finite input");
  const Index k = std::min(m.rows(), m.cols());
  if (k <= 16) {
    Eigen::JacobiSVD<DenseMatrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {solver.matrixU(), solver.singularValues(), solver.matrixV().adjoint()};
  }
  Eigen::BDCSVD<DenseMatrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw Error("svd: did not converge for " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + " matrix");
  }
  return {solver.matrixU(), solver.singularValues(), solver.matrixV().adjoint()};
}

struct EigResult {
  RealVector values;   // ascending
  DenseMatrix vectors;  // columns
};

/// Dense Hermitian eigensolve. Rejects input that is not Hermitian to 1e-12.
inline EigResult dense_eig_hermitian(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw Error("dense_eig_hermitian: matrix not square");
  const double scale = std::max(1.0, m.norm());
  if ((m - m.adjoint()).norm() > 1e-12 * scale) {
    throw Error("dense_eig_hermitian: input not Hermitian to 1e-12 (" +
                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")");
  }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(m);
  if (solver.info() != Eigen::Success) throw Error("dense_eig_hermitian: did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

struct EigenPair {
  double value = 0.0;
  StateVector vector;
  double residual = 0.0;  // ||A v - value v||
};

struct LanczosOptions {
  int max_subspace = 64;
  int max_restarts = 400;
  std::uint64_t seed = 0x5eedu;
};

namespace detail {

// Tridiagonal eigensolve for the Lanczos projection.
inline EigResult tridiag_eig(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const Index m = static_cast<Index>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
  return {solver.eigenvalues(), solver.eigenvectors().cast<Complex>()};
}

inline void orthogonalize_against(StateVector& w, const std::vector<StateVector>& basis) {
  for (int pass = 0; pass < 2; ++pass) {  // twice is enough
    for (const auto& q : basis) w -= q * q.dot(w);
  }
}

// One restarted pass of Lanczos with full reorthogonalization. Returns the
// lowest Ritz pair of the Krylov space built from v0, keeping the iteration
// orthogonal to `deflated`.
inline EigenPair lanczos_lowest_pass(const HermitianOperator& a, StateVector v0,
                                     const std::vector<StateVector>& deflated,
                                     int max_subspace, bool* invariant) {
  orthogonalize_against(v0, deflated);
  const double n0 = v0.norm();
  if (n0 < 1e-14) throw Error("lanczos: start vector lies in the deflated subspace");
  v0 /= n0;

  std::vector<StateVector> basis{v0};
  std::vector<double> alpha, beta;
  *invariant = false;

  StateVector w(a.dim);
  for (int j = 0; j < max_subspace; ++j) {
    a.apply(basis[j], w);
    alpha.push_back(basis[j].dot(w).real());
    orthogonalize_against(w, deflated);
    orthogonalize_against(w, basis);
    const double b = w.norm();
    if (b < 1e-13 || j + 1 == max_subspace) {
      if (b < 1e-13) *invariant = true;
      break;
    }
    beta.push_back(b);
    basis.push_back(w / b);
  }

  const EigResult te = tridiag_eig(alpha, beta);
  StateVector ritz = StateVector::Zero(a.dim);
  for (size_t i = 0; i < basis.size(); ++i) ritz += te.vectors(static_cast<Index>(i), 0) * basis[i];
  ritz.normalize();
  a.apply(ritz, w);
  const double lambda = ritz.dot(w).real();
  return {lambda, ritz, (w - lambda * ritz).norm()};
}

}  // namespace detail

/// Extremal (lowest) eigenpairs via restarted Lanczos with full
/// reorthogonalization and explicit deflation of converged vectors, so
/// degenerate levels are resolved one copy at a time. Eigenvalues ascending,
/// residual ||A v - lambda v|| <= tol * ||A||_est per pair.
inline std::vector<EigenPair> lanczos_extremal(const HermitianOperator& a, int k, double tol,
                                               const LanczosOptions& opts = {}) {
  if (k < 1) throw Error("lanczos_extremal: k must be >= 1");
  if (a.dim < k) {
    throw Error("lanczos_extremal: dimension " + std::to_string(a.dim) + " < k = " +
                std::to_string(k));
  }

  Rng rng(opts.seed);
  std::vector<EigenPair> pairs;
  std::vector<StateVector> deflated;
  double norm_est = 0.0;

  for (int j = 0; j < k; ++j) {
    StateVector v0 = random_state(a.dim, rng);
    EigenPair best;
    bool have = false;
    for (int restart = 0; restart < opts.max_restarts; ++restart) {
      bool invariant = false;
      EigenPair p = detail::lanczos_lowest_pass(a, v0, deflated, opts.max_subspace, &invariant);
      norm_est = std::max(norm_est, std::abs(p.value));
      if (!have || p.value <= best.value + 1e-15) {
        best = p;
        have = true;
      }
      if (p.residual <= tol * std::max(norm_est, 1e-30) || invariant) break;
      v0 = p.vector;
      if (restart + 1 == opts.max_restarts) {
        throw Error("lanczos_extremal: no convergence for pair " + std::to_string(j) +
                    " at dimension " + std::to_string(a.dim) + " (residual " +
                    std::to_string(p.residual) + ")");
      }
    }
    pairs.push_back(best);
    deflated.push_back(best.vector);
  }

  std::sort(pairs.begin(), pairs.end(),
            [](const EigenPair& x, const EigenPair& y) { return x.value < y.value; });
  return pairs;
}

struct ExpmvOptions {
  int max_subspace = 64;
  int max_substep_doublings = 16;
};

namespace detail {

// Krylov approximation of exp(-i t A) v for one substep. Returns false when the
// a-posteriori estimate misses `tol`.
inline bool expmv_step(const HermitianOperator& a, double t, const StateVector& v, double tol,
                       int max_subspace, StateVector* out) {
  const double vnorm = v.norm();
  if (vnorm == 0.0 || t == 0.0) {
    *out = v;
    return true;
  }

  std::vector<StateVector> basis{v / vnorm};
  std::vector<double> alpha, beta;
  StateVector w(a.dim);
  bool invariant = false;

  for (int j = 0; j < max_subspace; ++j) {
    a.apply(basis[j], w);
    alpha.push_back(basis[j].dot(w).real());
    orthogonalize_against(w, basis);
    const double b = w.norm();
    const Index m = static_cast<Index>(alpha.size());

    if (b < 1e-13) invariant = true;

    // Projected propagator and Saad's residual-style estimate
    const EigResult te = tridiag_eig(alpha, beta);
    Eigen::VectorXcd phases(m);
    for (Index i = 0; i < m; ++i) phases[i] = std::exp(Complex(0.0, -t * te.values[i]));
    Eigen::VectorXcd coeff = te.vectors * phases.cwiseProduct(te.vectors.row(0).adjoint());
    const double est = invariant ? 0.0 : b * std::abs(coeff[m - 1]) * std::abs(t);

    if (est <= 0.25 * tol || invariant || j + 1 == max_subspace) {
      if (est > tol && !invariant) return false;
      StateVector r = StateVector::Zero(a.dim);
      for (Index i = 0; i < m; ++i) r += coeff[i] * basis[i];
      *out = vnorm * r;
      return true;
    }
    beta.push_back(b);
    basis.push_back(w / b);
  }
  return false;
}

}  // namespace detail

/// exp(-i t A) v with relative accuracy `tol`, using a Lanczos subspace of
/// bounded dimension and adaptive time-substepping when one step cannot meet
/// the tolerance.
inline StateVector krylov_expmv(const HermitianOperator& a, double t, const StateVector& v,
                                double tol, const ExpmvOptions& opts = {}) {
  if (t == 0.0) return v;
  int n_steps = 1;
  for (int d = 0; d <= opts.max_substep_doublings; ++d, n_steps *= 2) {
    const double dt = t / n_steps;
    const double step_tol = tol / n_steps;
    StateVector cur = v;
    bool ok = true;
    for (int s = 0; s < n_steps && ok; ++s) {
      StateVector next;
      ok = detail::expmv_step(a, dt, cur, step_tol, opts.max_subspace, &next);
      if (ok) cur = std::move(next);
    }
    if (ok) return cur;
  }
  throw Error("krylov_expmv: tolerance " + std::to_string(tol) +
              " not reachable within subspace cap at dimension " + std::to_string(a.dim));
}

}  // namespace gsprep
