#pragma once

#include "gsprep/fits.hpp"
#include "gsprep/mps.hpp"
#include "gsprep/states.hpp"

#include <utility>
#include <vector>

namespace gsprep {

// Sequential staircase encoder. A layer is built from a rank-2 left-canonical
// MPS by completing each site tensor's isometry to a unitary:
//
//   G_{0,j,k,l} = A_{j,k,l},   rows (i,j) orthonormal,
//
// with rows indexed by (i, j) and columns by (k, l) = (sigma_n, a_n). The
// gate applied to qubits (n, n+1) in the disentangling direction is
// D = SWAP_rows . conj(G); the encoding direction uses the adjoints in
// reverse order. A single layer maps its source MPS to |0...0> exactly, which
// the tests pin down as the defining property of these conventions.

namespace encoder_detail {

/// Deterministic orthonormal completion: the missing rows are built by
/// pivoted Gram-Schmidt over the standard basis, each phase-fixed so its
/// first nonvanishing entry is real positive.
inline void complete_rows(DenseMatrix& g, Index n_fixed) {
  const Index dim = g.rows();
  Index filled = n_fixed;
  while (filled < dim) {
    StateVector best;
    double best_norm = -1.0;
    for (Index cand = 0; cand < dim; ++cand) {
      StateVector v = StateVector::Zero(dim);
      v[cand] = 1.0;
      for (Index r = 0; r < filled; ++r) {
        const StateVector row = g.row(r).transpose();
        v -= row * row.dot(v);
      }
      const double norm = v.norm();
      if (norm > best_norm + 1e-12) {
        best_norm = norm;
        best = v;
      }
    }
    if (best_norm < 1e-8) throw Error("complete_isometry: input rows are not an isometry");
    best /= best_norm;
    for (Index i = 0; i < dim; ++i) {
      if (std::abs(best[i]) > 1e-12) {
        best *= std::abs(best[i]) / best[i];
        break;
      }
    }
    g.row(filled) = best.transpose();
    ++filled;
  }
}

inline DenseMatrix swap_rows_2q(const DenseMatrix& m) {
  DenseMatrix out = m;
  out.row(1) = m.row(2);
  out.row(2) = m.row(1);
  return out;
}

}  // namespace encoder_detail

/// Complete a left-canonical site tensor (bond dims <= 2) into the 4x4
/// two-qubit unitary G with G_{0,j,k,l} = A_{j,k,l}. Missing bond dimensions
/// are zero-padded; the padding columns land in the kernel.
inline DenseMatrix complete_isometry(const SiteTensor& a) {
  const Index dl = a.left_dim(), dr = a.right_dim();
  if (dl > 2 || dr > 2) throw Error("complete_isometry: bond dimension exceeds 2");
  DenseMatrix g = DenseMatrix::Zero(4, 4);
  for (Index j = 0; j < dl; ++j)
    for (int sigma = 0; sigma < 2; ++sigma)
      for (Index b = 0; b < dr; ++b) g(j, sigma * 2 + b) = a.block[sigma](j, b);
  // verify the isometry condition before completing
  const DenseMatrix fixed = g.topRows(dl);
  if ((fixed * fixed.adjoint() - DenseMatrix::Identity(dl, dl)).norm() > 1e-8)
    throw Error("complete_isometry: tensor violates the left-isometry condition");
  encoder_detail::complete_rows(g, dl);
  return g;
}

/// Boundary completion for the last site (right bond dimension 1): a 2x2
/// unitary with rows G_{j, sigma} = A_{j, sigma}.
inline DenseMatrix complete_boundary(const SiteTensor& a) {
  const Index dl = a.left_dim();
  if (dl > 2 || a.right_dim() != 1) throw Error("complete_boundary: unexpected tensor shape");
  DenseMatrix g = DenseMatrix::Zero(2, 2);
  for (Index j = 0; j < dl; ++j)
    for (int sigma = 0; sigma < 2; ++sigma) g(j, sigma) = a.block[sigma](j, 0);
  const DenseMatrix fixed = g.topRows(dl);
  if ((fixed * fixed.adjoint() - DenseMatrix::Identity(dl, dl)).norm() > 1e-8)
    throw Error("complete_boundary: tensor violates the left-isometry condition");
  encoder_detail::complete_rows(g, dl);
  return g;
}

/// One staircase layer: N-1 two-qubit gates on (n, n+1) plus one single-qubit
/// gate on site N. Disentangling applies the site-N gate first, then the
/// two-qubit gates down to (1, 2); encoding applies the adjoints in reverse.
struct MpdLayer {
  std::vector<DenseMatrix> gates;  // gates[0..N-2] are 4x4, gates[N-1] is 2x2
  int n_sites = 0;

  void apply_disentangle(StateVector& psi) const {
    apply_1q(psi, gates.back().conjugate(), n_sites - 1, n_sites);
    for (int n = n_sites - 2; n >= 0; --n)
      apply_2q(psi, encoder_detail::swap_rows_2q(gates[n].conjugate()), n, n + 1, n_sites);
  }

  void apply_encode(StateVector& psi) const {
    for (int n = 0; n <= n_sites - 2; ++n)
      apply_2q(psi, encoder_detail::swap_rows_2q(gates[n].conjugate()).adjoint(), n, n + 1,
               n_sites);
    apply_1q(psi, gates.back().transpose(), n_sites - 1, n_sites);
  }
};

inline MpdLayer build_mpd_layer(const Mps& mps2) {
  if (mps2.max_bond_dim() > 2) throw Error("build_mpd_layer: bond dimension exceeds 2");
  if (mps2.canonical_form() != CanonicalForm::left)
    throw Error("build_mpd_layer: input must be left-canonical");
  MpdLayer layer;
  layer.n_sites = mps2.n_sites();
  for (int site = 1; site < layer.n_sites; ++site)
    layer.gates.push_back(complete_isometry(mps2.tensor(site)));
  layer.gates.push_back(complete_boundary(mps2.tensor(layer.n_sites)));
  return layer;
}

struct LayerRecord {
  int layer = 0;
  Index chi_cut = 0;       // post-layer central-bond Schmidt rank (default floor)
  Index chi_cut_loose = 0;  // 1e-8 relative floor
  Index chi_cut_tight = 0;  // 1e-12 relative floor
  double chi_ratio = 0.0;  // chi_cut / chi_max
  double fidelity = 0.0;   // |<exact|encoded(l)>|^2 (subspace-aware)
  double if_per_site = 0.0;
  double discarded_weight = 0.0;  // total rank-2 truncation weight at this layer
};

struct EncodingDiagnostics {
  int n_sites = 0;
  Index chi_max = 0;
  double rank_threshold = 1e-10;
  std::vector<LayerRecord> records;

  std::vector<double> layers() const {
    std::vector<double> out;
    for (const auto& r : records) out.push_back(r.layer);
    return out;
  }
  std::vector<double> chi_ratios() const {
    std::vector<double> out;
    for (const auto& r : records) out.push_back(r.chi_ratio);
    return out;
  }
  std::vector<double> if_per_site() const {
    std::vector<double> out;
    for (const auto& r : records) out.push_back(r.if_per_site);
    return out;
  }
};

struct DisentanglerResult {
  std::vector<MpdLayer> layers;
  EncodingDiagnostics diagnostics;
};

struct DisentanglerOptions {
  double rank_threshold = 1e-10;
};

/// Iterate the staircase construction on an explicit state vector: truncate
/// the current state to a rank-2 MPS, build the layer, apply it to the
/// untruncated state, and record the post-layer (pre-truncation) central-bond
/// rank plus the encoding fidelity against the reference subspace. A layer-0
/// record holds the input state's rank, anchoring the logistic fit's r0.
inline DisentanglerResult run_disentangler(const StateVector& psi0, int l_max,
                                           const std::vector<StateVector>& reference,
                                           const DisentanglerOptions& opts = {}) {
  if (l_max < 1) throw Error("run_disentangler: need at least one layer");
  const int n = static_cast<int>(std::round(std::log2(static_cast<double>(psi0.size()))));
  if ((Index(1) << n) != psi0.size()) throw Error("run_disentangler: state size not a power of 2");
  const int cut = n / 2;
  const Index chi_max = Index(1) << cut;

  DisentanglerResult out;
  out.diagnostics.n_sites = n;
  out.diagnostics.chi_max = chi_max;
  out.diagnostics.rank_threshold = opts.rank_threshold;

  StateVector current = psi0;
  // F(l) = |<ref| U_1^dag ... U_l^dag |0...0>|^2 = |<0...0| U_l ... U_1 |ref>|^2,
  // so tracking the disentangled reference avoids rebuilding the encoder state
  std::vector<StateVector> tracked = reference;

  auto record = [&](int layer_idx, double discarded) {
    LayerRecord rec;
    rec.layer = layer_idx;
    const SchmidtSpectrum ss = schmidt_spectrum(current, n, cut, opts.rank_threshold);
    rec.chi_cut = ss.rank;
    rec.chi_cut_loose = ss.rank_at(1e-8);
    rec.chi_cut_tight = ss.rank_at(1e-12);
    rec.chi_ratio = static_cast<double>(ss.rank) / static_cast<double>(chi_max);
    double f = 0.0;
    for (const auto& ref : tracked) f += std::norm(ref[0]);
    rec.fidelity = f;
    rec.if_per_site = (1.0 - f) / n;
    rec.discarded_weight = discarded;
    out.diagnostics.records.push_back(rec);
  };

  record(0, 0.0);
  for (int layer_idx = 1; layer_idx <= l_max; ++layer_idx) {
    const Mps exact = Mps::from_statevector(current, n);
    const auto [mps2, weights] = compress_with_weights(exact, 2);
    MpdLayer layer = build_mpd_layer(mps2);

    layer.apply_disentangle(current);
    for (auto& ref : tracked) layer.apply_disentangle(ref);

    double w = 0.0;
    for (double d : weights) w += d;
    record(layer_idx, w);
    out.layers.push_back(std::move(layer));
  }
  return out;
}

/// The L-layer encoding circuit applied to |0...0>: layer L acts first and
/// layer 1 last.
inline StateVector encode_state(const std::vector<MpdLayer>& layers, int l) {
  if (l < 0 || l > static_cast<int>(layers.size()))
    throw Error("encode_state: layer count out of range");
  if (layers.empty()) throw Error("encode_state: no layers");
  const int n = layers.front().n_sites;
  StateVector psi = basis_state(n, 0);
  for (int k = l - 1; k >= 0; --k) layers[k].apply_encode(psi);
  return psi;
}

struct LstarResult {
  LogisticFit fit;
  double l_star = 0.0;          // inflection point of the logistic fit
  int l_star_nonparametric = 0;  // first layer with chi_cut >= chi_max / 2
  bool crossing_found = false;
  int fit_window_hi = 0;        // last layer included in the logistic fit
};

/// Logistic fit of the normalized rank growth and its inflection point, with
/// the half-saturation crossing as a nonparametric cross-check. The fit uses
/// the growth-and-saturation segment only: at small sizes the rank can decay
/// again once the encoder residual falls below the counting floor, which the
/// logistic model does not describe.
inline LstarResult find_lstar(const EncodingDiagnostics& diag) {
  if (diag.records.size() < 5) throw Error("find_lstar: need at least 5 layer records");

  // maximal contiguous non-decreasing prefix, minimally extended to 5 points
  size_t end = 1;
  while (end < diag.records.size() &&
         diag.records[end].chi_ratio >= diag.records[end - 1].chi_ratio - 1e-9)
    ++end;
  end = std::max<size_t>(end, std::min<size_t>(diag.records.size(), 5));

  std::vector<double> l, ratio;
  for (size_t i = 0; i < end; ++i) {
    l.push_back(diag.records[i].layer);
    ratio.push_back(diag.records[i].chi_ratio);
  }

  LstarResult out;
  out.fit = fit_logistic(l, ratio);
  out.l_star = out.fit.inflection();
  out.fit_window_hi = static_cast<int>(l.back());
  for (const auto& r : diag.records) {
    if (2 * r.chi_cut >= diag.chi_max) {
      out.l_star_nonparametric = r.layer;
      out.crossing_found = true;
      break;
    }
  }
  return out;
}

}  // namespace gsprep
