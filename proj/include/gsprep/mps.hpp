#pragma once

#include "gsprep/numerics.hpp"
#include "gsprep/states.hpp"

#include <utility>
#include <vector>

namespace gsprep {

/// Rank-3 site tensor with shape (left bond, physical = 2, right bond),
/// stored as one matrix per physical index.
struct SiteTensor {
  DenseMatrix block[2];  // block[sigma] is (Dl x Dr)

  Index left_dim() const { return block[0].rows(); }
  Index right_dim() const { return block[0].cols(); }

  static SiteTensor zero(Index dl, Index dr) {
    SiteTensor t;
    t.block[0] = DenseMatrix::Zero(dl, dr);
    t.block[1] = DenseMatrix::Zero(dl, dr);
    return t;
  }

  /// Reshape to (Dl x 2 Dr); column index is sigma * Dr + b.
  DenseMatrix to_matrix_pr() const {
    DenseMatrix m(left_dim(), 2 * right_dim());
    m << block[0], block[1];
    return m;
  }

  static SiteTensor from_matrix_pr(const DenseMatrix& m) {
    SiteTensor t;
    const Index dr = m.cols() / 2;
    t.block[0] = m.leftCols(dr);
    t.block[1] = m.rightCols(dr);
    return t;
  }

  /// Reshape to (2 Dl x Dr); row index is a * 2 + sigma.
  DenseMatrix to_matrix_lp() const {
    DenseMatrix m(2 * left_dim(), right_dim());
    for (Index a = 0; a < left_dim(); ++a) {
      m.row(2 * a) = block[0].row(a);
      m.row(2 * a + 1) = block[1].row(a);
    }
    return m;
  }

  static SiteTensor from_matrix_lp(const DenseMatrix& m) {
    const Index dl = m.rows() / 2;
    SiteTensor t = zero(dl, m.cols());
    for (Index a = 0; a < dl; ++a) {
      t.block[0].row(a) = m.row(2 * a);
      t.block[1].row(a) = m.row(2 * a + 1);
    }
    return t;
  }
};

enum class CanonicalForm { none, left, mixed };

/// Matrix product state over N spin-1/2 sites, D_0 = D_N = 1.
///
/// `left` canonical form means every tensor is an isometry from its left bond
/// into (physical x right bond) — the tensor rows are orthonormal — which
/// makes the represented state normalized with the norm carried at site 1.
/// This is the form consumed by the sequential encoder.
class Mps {
 public:
  Mps() = default;
  explicit Mps(std::vector<SiteTensor> tensors, CanonicalForm form = CanonicalForm::none,
               int center = -1)
      : tensors_(std::move(tensors)), form_(form), center_(center) {
    check_shapes();
  }

  int n_sites() const { return static_cast<int>(tensors_.size()); }
  CanonicalForm canonical_form() const { return form_; }
  int center() const { return center_; }

  const SiteTensor& tensor(int site) const { return tensors_.at(site - 1); }  // 1-based
  SiteTensor& tensor(int site) { return tensors_.at(site - 1); }

  std::vector<Index> bond_dims() const {
    std::vector<Index> dims{1};
    for (const auto& t : tensors_) dims.push_back(t.right_dim());
    return dims;
  }

  Index max_bond_dim() const {
    Index chi = 1;
    for (const auto& t : tensors_) chi = std::max(chi, t.right_dim());
    return chi;
  }

  /// Worst per-site deviation from the left isometry condition
  /// sum_{sigma, b} A_{a, sigma b} conj(A_{a', sigma b}) = delta_{a a'}.
  double left_isometry_defect() const {
    double worst = 0.0;
    for (const auto& t : tensors_) {
      const DenseMatrix m = t.to_matrix_pr();
      worst = std::max(worst, (m * m.adjoint() -
                               DenseMatrix::Identity(m.rows(), m.rows())).norm());
    }
    return worst;
  }

  /// Random normalized MPS at the given bond dimension (deterministic in the
  /// seed).
  static Mps random(int n_sites, Index chi, Rng& rng);

  /// Exact conversion, no truncation. N <= 20.
  static Mps from_statevector(const StateVector& psi, int n_sites);

  StateVector to_statevector() const;

  friend Mps left_canonicalize(Mps mps);
  friend std::pair<Mps, std::vector<double>> compress_with_weights(const Mps& mps, Index chi);

 private:
  void check_shapes() const {
    if (tensors_.empty()) throw Error("Mps: empty tensor list");
    if (tensors_.front().left_dim() != 1 || tensors_.back().right_dim() != 1)
      throw Error("Mps: boundary bond dimensions must be 1");
    for (size_t i = 0; i + 1 < tensors_.size(); ++i) {
      if (tensors_[i].right_dim() != tensors_[i + 1].left_dim())
        throw Error("Mps: bond dimension mismatch at bond " + std::to_string(i + 1));
    }
  }

  std::vector<SiteTensor> tensors_;
  CanonicalForm form_ = CanonicalForm::none;
  int center_ = -1;
};

inline Mps Mps::random(int n_sites, Index chi, Rng& rng) {
  std::vector<SiteTensor> tensors;
  Index dl = 1;
  for (int n = 1; n <= n_sites; ++n) {
    const Index cap = Index(1) << std::min({n, n_sites - n, 20});
    const Index dr = (n == n_sites) ? 1 : std::min(chi, cap);
    SiteTensor t = SiteTensor::zero(dl, dr);
    for (int s = 0; s < 2; ++s)
      for (Index a = 0; a < dl; ++a)
        for (Index b = 0; b < dr; ++b) t.block[s](a, b) = rng.gaussian_complex();
    tensors.push_back(std::move(t));
    dl = dr;
  }
  Mps mps(std::move(tensors));
  return left_canonicalize(std::move(mps));
}

inline Mps Mps::from_statevector(const StateVector& psi, int n_sites) {
  if (n_sites > 20) throw Error("Mps::from_statevector: N > 20 exceeds the desk-scale cap");
  if (psi.size() != (Index(1) << n_sites)) throw Error("Mps::from_statevector: size mismatch");

  std::vector<SiteTensor> tensors;
  // sequential SVD from the left; remaining block R is (Dl x 2^{N-n})
  DenseMatrix r = psi.transpose();  // 1 x 2^N, row-major over site bits
  Index dl = 1;
  for (int n = 1; n < n_sites; ++n) {
    const Index rest = r.cols() / 2;
    // rows (a, sigma) = a * 2 + sigma; site n's bit is the most significant
    // of the remaining block, so splitting off the leading factor of 2
    DenseMatrix m(dl * 2, rest);
    for (Index a = 0; a < dl; ++a) {
      m.row(2 * a) = r.block(a, 0, 1, rest);
      m.row(2 * a + 1) = r.block(a, rest, 1, rest);
    }
    SvdResult s = svd(m);
    Index keep = 0;
    const double floor = s.s.size() ? s.s[0] * 1e-15 : 0.0;
    for (Index i = 0; i < s.s.size(); ++i)
      if (s.s[i] > floor) ++keep;
    keep = std::max<Index>(keep, 1);
    tensors.push_back(SiteTensor::from_matrix_lp(s.u.leftCols(keep)));
    r = s.s.head(keep).cast<Complex>().asDiagonal() * s.vh.topRows(keep);
    dl = keep;
  }
  SiteTensor last = SiteTensor::zero(dl, 1);
  for (Index a = 0; a < dl; ++a) {
    last.block[0](a, 0) = r(a, 0);
    last.block[1](a, 0) = r(a, 1);
  }
  tensors.push_back(std::move(last));
  return Mps(std::move(tensors), CanonicalForm::mixed, n_sites);
}

inline StateVector Mps::to_statevector() const {
  const int n = n_sites();
  if (n > 20) throw Error("Mps::to_statevector: N > 20 exceeds the desk-scale cap");
  // accumulate (2^k x D_k) amplitudes left to right
  DenseMatrix acc(2, tensors_[0].right_dim());
  acc.row(0) = tensors_[0].block[0];
  acc.row(1) = tensors_[0].block[1];
  for (int k = 1; k < n; ++k) {
    const SiteTensor& t = tensors_[k];
    DenseMatrix next(acc.rows() * 2, t.right_dim());
    next.setZero();
    for (int s = 0; s < 2; ++s) {
      // interleave: row (x, sigma) = x * 2 + sigma
      const DenseMatrix part = acc * t.block[s];
      for (Index x = 0; x < acc.rows(); ++x) next.row(2 * x + s) = part.row(x);
    }
    acc = std::move(next);
  }
  StateVector psi(acc.rows());
  psi = acc.col(0);
  return psi;
}

/// Cast into left-canonical form (right-to-left sweep of row-orthonormalizing
/// SVDs). The represented state is unchanged up to a global phase, and the
/// result is normalized.
inline Mps left_canonicalize(Mps mps) {
  const int n = mps.n_sites();
  for (int k = n - 1; k >= 1; --k) {
    const DenseMatrix m = mps.tensors_[k].to_matrix_pr();
    const SvdResult s = svd(m);
    Index keep = 0;
    const double floor = s.s.size() ? s.s[0] * 1e-15 : 0.0;
    for (Index i = 0; i < s.s.size(); ++i)
      if (s.s[i] > floor) ++keep;
    if (keep == 0) throw Error("left_canonicalize: zero-norm state");
    mps.tensors_[k] = SiteTensor::from_matrix_pr(s.vh.topRows(keep));
    const DenseMatrix carry = s.u.leftCols(keep) * s.s.head(keep).cast<Complex>().asDiagonal();
    mps.tensors_[k - 1].block[0] *= carry;
    mps.tensors_[k - 1].block[1] *= carry;
  }
  const double norm = std::sqrt(mps.tensors_[0].block[0].squaredNorm() +
                                mps.tensors_[0].block[1].squaredNorm());
  if (norm < 1e-300) throw Error("left_canonicalize: zero-norm state");
  mps.tensors_[0].block[0] /= norm;
  mps.tensors_[0].block[1] /= norm;
  mps.form_ = CanonicalForm::left;
  mps.center_ = 1;
  return mps;
}

/// Optimal sequential truncation to bond dimension chi. Returns the truncated,
/// normalized, left-canonical MPS together with the discarded weight (sum of
/// squared dropped singular values) per cut.
inline std::pair<Mps, std::vector<double>> compress_with_weights(const Mps& mps, Index chi) {
  if (chi < 1) throw Error("compress: chi must be >= 1");
  Mps work = mps;
  const int n = work.n_sites();

  // left-to-right column isometrization so each subsequent SVD sees the true
  // Schmidt spectrum of its cut
  for (int k = 0; k + 1 < n; ++k) {
    const DenseMatrix m = work.tensors_[k].to_matrix_lp();
    Eigen::HouseholderQR<DenseMatrix> qr(m);
    const Index rank = std::min(m.rows(), m.cols());
    DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(m.rows(), rank);
    DenseMatrix r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    work.tensors_[k] = SiteTensor::from_matrix_lp(q);
    work.tensors_[k + 1].block[0] = r * work.tensors_[k + 1].block[0];
    work.tensors_[k + 1].block[1] = r * work.tensors_[k + 1].block[1];
  }

  // right-to-left truncating sweep into left-canonical (row isometry) form
  std::vector<double> discarded(static_cast<size_t>(n - 1), 0.0);
  for (int k = n - 1; k >= 1; --k) {
    const DenseMatrix m = work.tensors_[k].to_matrix_pr();
    const SvdResult s = svd(m);
    Index keep = 0;
    const double floor = s.s.size() ? s.s[0] * 1e-15 : 0.0;
    for (Index i = 0; i < s.s.size(); ++i)
      if (s.s[i] > floor) ++keep;
    keep = std::max<Index>(std::min(keep, chi), 1);
    for (Index i = keep; i < s.s.size(); ++i) discarded[k - 1] += s.s[i] * s.s[i];
    work.tensors_[k] = SiteTensor::from_matrix_pr(s.vh.topRows(keep));
    const DenseMatrix carry = s.u.leftCols(keep) * s.s.head(keep).cast<Complex>().asDiagonal();
    work.tensors_[k - 1].block[0] *= carry;
    work.tensors_[k - 1].block[1] *= carry;
  }
  const double norm = std::sqrt(work.tensors_[0].block[0].squaredNorm() +
                                work.tensors_[0].block[1].squaredNorm());
  if (norm < 1e-300) throw Error("compress: zero-norm state");
  work.tensors_[0].block[0] /= norm;
  work.tensors_[0].block[1] /= norm;
  work.form_ = CanonicalForm::left;
  work.center_ = 1;
  return {std::move(work), std::move(discarded)};
}

inline Mps compress(const Mps& mps, Index chi) { return compress_with_weights(mps, chi).first; }

struct SchmidtSpectrum {
  int cut = 0;                    // bipartition between sites cut and cut+1
  RealVector singular_values;     // descending
  Index rank = 0;                 // values above threshold * sigma_1
  double threshold = 0.0;

  Index rank_at(double rel_threshold) const {
    if (singular_values.size() == 0) return 0;
    Index r = 0;
    for (Index i = 0; i < singular_values.size(); ++i)
      if (singular_values[i] > rel_threshold * singular_values[0]) ++r;
    return r;
  }
};

/// Schmidt spectrum of a state vector across the cut separating sites 1..cut
/// from cut+1..N.
inline SchmidtSpectrum schmidt_spectrum(const StateVector& psi, int n_sites, int cut,
                                        double threshold = 1e-10) {
  if (cut < 1 || cut >= n_sites) throw Error("schmidt_spectrum: cut out of range");
  const Index rows = Index(1) << cut;
  const Index cols = Index(1) << (n_sites - cut);
  // site 1 is the most significant bit, so the reshape is contiguous
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = psi.segment(i * cols, cols).transpose();
  SchmidtSpectrum out;
  out.cut = cut;
  out.singular_values = svd(m).s;
  out.threshold = threshold;
  out.rank = out.rank_at(threshold);
  return out;
}

}  // namespace gsprep
