#pragma once

#include "gsprep/hamiltonian.hpp"
#include "gsprep/mps.hpp"

#include <optional>
#include <vector>

namespace gsprep {

/// Matrix product operator: per site a sparse list of (left bond, right bond,
/// 2x2 operator) entries. Bond dimension 5 for the nearest-neighbor
/// Heisenberg chain with a field.
struct MpoTensor {
  Index left_dim = 1;
  Index right_dim = 1;
  struct Entry {
    Index l, r;
    Eigen::Matrix2cd op;
  };
  std::vector<Entry> entries;
};

class Mpo {
 public:
  explicit Mpo(std::vector<MpoTensor> tensors) : tensors_(std::move(tensors)) {}

  int n_sites() const { return static_cast<int>(tensors_.size()); }
  const MpoTensor& tensor(int site) const { return tensors_.at(site - 1); }  // 1-based

  /// Dense reconstruction for N <= 6 (oracle-sized checks).
  DenseMatrix dense() const {
    const int n = n_sites();
    if (n > 6) throw Error("Mpo::dense: N > 6");
    // accumulate one matrix per running MPO bond index
    std::vector<DenseMatrix> cur(1, DenseMatrix::Identity(1, 1));
    for (int k = 0; k < n; ++k) {
      const auto& t = tensors_[k];
      const Index dim = cur[0].rows() * 2;
      std::vector<DenseMatrix> next(t.right_dim, DenseMatrix::Zero(dim, dim));
      for (const auto& e : t.entries) {
        next[e.r] += PauliString::kron(cur[e.l], DenseMatrix(e.op));
      }
      cur = std::move(next);
    }
    return cur[0];
  }

 private:
  std::vector<MpoTensor> tensors_;
};

/// Standard bond-dimension-5 MPO for the staggered-field Heisenberg chain.
inline Mpo build_mpo(const HamiltonianSpec& spec) {
  spec.validate();
  const int n = spec.n_sites;
  Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, Complex(0, -1), Complex(0, 1), 0;
  sz << 1, 0, 0, -1;
  const double jq = spec.exchange_j / 4.0;

  // channels: 0 identity-so-far, 1..3 open X/Y/Z bond, 4 finished terms
  std::vector<MpoTensor> tensors;
  for (int site = 1; site <= n; ++site) {
    MpoTensor t;
    t.left_dim = (site == 1) ? 1 : 5;
    t.right_dim = (site == n) ? 1 : 5;
    const double c = spec.field_coeff(site);
    if (site < n) {
      t.entries.push_back({0, 0, id});
      t.entries.push_back({0, 1, sx});
      t.entries.push_back({0, 2, sy});
      t.entries.push_back({0, 3, sz});
      if (c != 0.0) t.entries.push_back({0, 4, c * sz});
      if (site > 1) {
        t.entries.push_back({1, 4, jq * sx});
        t.entries.push_back({2, 4, jq * sy});
        t.entries.push_back({3, 4, jq * sz});
        t.entries.push_back({4, 4, id});
      }
    } else {
      if (c != 0.0) t.entries.push_back({0, 0, c * sz});
      t.entries.push_back({1, 0, jq * sx});
      t.entries.push_back({2, 0, jq * sy});
      t.entries.push_back({3, 0, jq * sz});
      t.entries.push_back({4, 0, id});
    }
    tensors.push_back(std::move(t));
  }
  return Mpo(std::move(tensors));
}

struct DmrgOptions {
  int sweep_cap = 30;
  double e_tol = 1e-10;
  std::uint64_t seed = 0x5eed;
  int local_subspace = 32;
};

struct DmrgResult {
  Mps state;                    // normalized, left-canonical
  double energy = 0.0;
  std::vector<double> sweep_energies;
  bool converged = false;       // energy change below e_tol before the cap
  bool energy_increased = false;  // non-decreasing energy beyond tolerance seen
  int sweeps_run = 0;
};

namespace detail {

// Environments carry (bra bond, mpo bond, ket bond) as one matrix per MPO
// bond index.
using Environment = std::vector<DenseMatrix>;

inline Environment left_edge() { return {DenseMatrix::Ones(1, 1)}; }
inline Environment right_edge() { return {DenseMatrix::Ones(1, 1)}; }

inline Environment grow_left(const Environment& env, const MpoTensor& w, const SiteTensor& t) {
  Environment out(w.right_dim, DenseMatrix::Zero(t.right_dim(), t.right_dim()));
  for (const auto& e : w.entries) {
    for (int sp = 0; sp < 2; ++sp) {
      for (int s = 0; s < 2; ++s) {
        const Complex c = e.op(sp, s);
        if (c == Complex(0, 0)) continue;
        out[e.r] += c * (t.block[sp].adjoint() * env[e.l] * t.block[s]);
      }
    }
  }
  return out;
}

inline Environment grow_right(const Environment& env, const MpoTensor& w, const SiteTensor& t) {
  Environment out(w.left_dim, DenseMatrix::Zero(t.left_dim(), t.left_dim()));
  for (const auto& e : w.entries) {
    for (int sp = 0; sp < 2; ++sp) {
      for (int s = 0; s < 2; ++s) {
        const Complex c = e.op(sp, s);
        if (c == Complex(0, 0)) continue;
        out[e.l] += c * (t.block[sp].conjugate() * env[e.r] * t.block[s].transpose());
      }
    }
  }
  return out;
}

// theta is the two-site tensor flattened as ((a * 2 + s1) * 2 + s2) * dr + b.
struct TwoSiteProblem {
  const Environment* left;
  const Environment* right;
  const MpoTensor* w1;
  const MpoTensor* w2;
  Index dl, dr;

  Index dim() const { return dl * 4 * dr; }

  void apply(const StateVector& theta, StateVector& out) const {
    out.setZero(theta.size());
    // stage via complex matrices keyed by (mpo bond, s1, s2)
    // theta view: block (a, s1, s2, b) -> matrix (dl x dr) per (s1, s2)
    auto view = [&](const StateVector& v, int s1, int s2) {
      DenseMatrix m(dl, dr);
      for (Index a = 0; a < dl; ++a)
        m.row(a) = v.segment(((a * 2 + s1) * 2 + s2) * dr, dr).transpose();
      return m;
    };
    DenseMatrix th[2][2];
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2) th[s1][s2] = view(theta, s1, s2);

    for (const auto& e1 : w1->entries) {
      for (const auto& e2 : w2->entries) {
        if (e1.r != e2.l) continue;
        const DenseMatrix& l = (*left)[e1.l];
        const DenseMatrix& r = (*right)[e2.r];
        for (int s1p = 0; s1p < 2; ++s1p)
          for (int s1 = 0; s1 < 2; ++s1) {
            const Complex c1 = e1.op(s1p, s1);
            if (c1 == Complex(0, 0)) continue;
            for (int s2p = 0; s2p < 2; ++s2p)
              for (int s2 = 0; s2 < 2; ++s2) {
                const Complex c2 = e2.op(s2p, s2);
                if (c2 == Complex(0, 0)) continue;
                const DenseMatrix contrib = (c1 * c2) * (l * th[s1][s2] * r.transpose());
                for (Index a = 0; a < dl; ++a)
                  out.segment(((a * 2 + s1p) * 2 + s2p) * dr, dr) += contrib.row(a).transpose();
              }
          }
      }
    }
  }
};

// Lowest eigenpair of the local two-site problem; restarted Lanczos warm
// started from the current two-site tensor.
inline std::pair<double, StateVector> solve_local(const TwoSiteProblem& prob, StateVector guess,
                                                  double tol, int subspace) {
  HermitianOperator op{prob.dim(),
                       [&prob](const StateVector& x, StateVector& y) { prob.apply(x, y); }};
  double lambda = 0.0;
  for (int restart = 0; restart < 200; ++restart) {
    bool invariant = false;
    EigenPair p = lanczos_lowest_pass(op, guess, {}, subspace, &invariant);
    lambda = p.value;
    guess = p.vector;
    if (invariant || p.residual <= tol * std::max(1.0, std::abs(lambda))) break;
  }
  return {lambda, guess};
}

}  // namespace detail

/// Two-site DMRG ground-state search. Sweeps left-right-left, truncating each
/// split to chi_max; energies are recorded per half sweep and convergence is
/// judged on full sweeps.
inline DmrgResult dmrg_ground(const Mpo& mpo, Index chi_max, const DmrgOptions& opts = {}) {
  if (chi_max < 2) throw Error("dmrg_ground: chi_max must be >= 2");
  const int n = mpo.n_sites();
  if (n < 2) throw Error("dmrg_ground: need at least two sites");

  Rng rng(opts.seed);
  Mps mps = Mps::random(n, 2, rng);  // left-canonical: valid right environments

  // right environments for bonds n-1 .. 1
  std::vector<detail::Environment> renv(n + 1);
  renv[n] = detail::right_edge();
  for (int site = n; site >= 2; --site)
    renv[site - 1] = detail::grow_right(renv[site], mpo.tensor(site), mps.tensor(site));
  std::vector<detail::Environment> lenv(n + 1);
  lenv[0] = detail::left_edge();

  DmrgResult result;
  double energy = 0.0;

  auto two_site_guess = [&](int site) {
    const SiteTensor& t1 = mps.tensor(site);
    const SiteTensor& t2 = mps.tensor(site + 1);
    const Index dl = t1.left_dim(), dr = t2.right_dim();
    StateVector theta(dl * 4 * dr);
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2) {
        const DenseMatrix m = t1.block[s1] * t2.block[s2];
        for (Index a = 0; a < dl; ++a)
          theta.segment(((a * 2 + s1) * 2 + s2) * dr, dr) = m.row(a).transpose();
      }
    return theta;
  };

  auto split_theta = [&](int site, const StateVector& theta, bool move_right) {
    const Index dl = mps.tensor(site).left_dim();
    const Index dr = mps.tensor(site + 1).right_dim();
    DenseMatrix m(dl * 2, 2 * dr);
    for (Index a = 0; a < dl; ++a)
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
          m.row(a * 2 + s1).segment(s2 * dr, dr) =
              theta.segment(((a * 2 + s1) * 2 + s2) * dr, dr).transpose();
    const SvdResult s = svd(m);
    Index keep = 0;
    const double floor = s.s.size() ? s.s[0] * 1e-14 : 0.0;
    for (Index i = 0; i < s.s.size(); ++i)
      if (s.s[i] > floor) ++keep;
    keep = std::max<Index>(1, std::min(keep, chi_max));
    RealVector kept = s.s.head(keep);
    kept /= kept.norm();  // keep the state normalized after truncation
    if (move_right) {
      mps.tensor(site) = SiteTensor::from_matrix_lp(s.u.leftCols(keep));
      const DenseMatrix sv = kept.cast<Complex>().asDiagonal() * s.vh.topRows(keep);
      SiteTensor t2 = SiteTensor::zero(keep, dr);
      t2.block[0] = sv.leftCols(dr);
      t2.block[1] = sv.rightCols(dr);
      mps.tensor(site + 1) = std::move(t2);
    } else {
      SiteTensor t2 = SiteTensor::zero(keep, dr);
      t2.block[0] = s.vh.topRows(keep).leftCols(dr);
      t2.block[1] = s.vh.topRows(keep).rightCols(dr);
      mps.tensor(site + 1) = std::move(t2);
      const DenseMatrix us = s.u.leftCols(keep) * kept.cast<Complex>().asDiagonal();
      mps.tensor(site) = SiteTensor::from_matrix_lp(us);
    }
  };

  double prev_sweep_energy = 0.0;
  for (int sweep = 0; sweep < opts.sweep_cap; ++sweep) {
    // left to right
    for (int site = 1; site <= n - 1; ++site) {
      detail::TwoSiteProblem prob{&lenv[site - 1], &renv[site + 1], &mpo.tensor(site),
                                  &mpo.tensor(site + 1), mps.tensor(site).left_dim(),
                                  mps.tensor(site + 1).right_dim()};
      auto [lambda, theta] = detail::solve_local(prob, two_site_guess(site),
                                                 std::max(1e-13, 0.01 * opts.e_tol),
                                                 opts.local_subspace);
      energy = lambda;
      split_theta(site, theta, true);
      lenv[site] = detail::grow_left(lenv[site - 1], mpo.tensor(site), mps.tensor(site));
    }
    // right to left
    for (int site = n - 1; site >= 1; --site) {
      detail::TwoSiteProblem prob{&lenv[site - 1], &renv[site + 1], &mpo.tensor(site),
                                  &mpo.tensor(site + 1), mps.tensor(site).left_dim(),
                                  mps.tensor(site + 1).right_dim()};
      auto [lambda, theta] = detail::solve_local(prob, two_site_guess(site),
                                                 std::max(1e-13, 0.01 * opts.e_tol),
                                                 opts.local_subspace);
      energy = lambda;
      split_theta(site, theta, false);
      renv[site] = detail::grow_right(renv[site + 1], mpo.tensor(site + 1),
                                      mps.tensor(site + 1));
    }
    result.sweep_energies.push_back(energy);
    result.sweeps_run = sweep + 1;
    if (sweep > 0) {
      if (energy > prev_sweep_energy + 100 * opts.e_tol * std::max(1.0, std::abs(energy)))
        result.energy_increased = true;
      if (std::abs(energy - prev_sweep_energy) < opts.e_tol) {
        result.converged = true;
        break;
      }
    }
    prev_sweep_energy = energy;
  }

  result.energy = energy;
  result.state = left_canonicalize(std::move(mps));
  return result;
}

}  // namespace gsprep
