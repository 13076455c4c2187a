#pragma once

#include "gsprep/numerics.hpp"
#include "gsprep/pauli.hpp"
#include "gsprep/states.hpp"

#include <vector>

namespace gsprep {

/// Staggered-field antiferromagnetic Heisenberg chain with open boundaries:
///   H = J sum_i S_i.S_{i+1} + h_z sum_i (-1)^i S_i^z,   S = sigma/2,
/// i.e. bond coefficient J/4 per Pauli pair and field coefficient
/// (-1)^i h_z/2 on site i (site 1 carries -h_z/2).
struct HamiltonianSpec {
  int n_sites = 2;
  double exchange_j = 1.0;
  double staggered_hz = 0.0;

  void validate() const {
    if (n_sites < 2) throw Error("HamiltonianSpec: need at least 2 sites");
    if (exchange_j <= 0.0) throw Error("HamiltonianSpec: J must be positive");
    if (staggered_hz < 0.0) throw Error("HamiltonianSpec: h_z must be nonnegative");
  }

  double field_coeff(int site) const {
    return (site % 2 == 0 ? 1.0 : -1.0) * staggered_hz / 2.0;
  }
};

struct TermSplit {
  std::vector<PauliTerm> even_bonds;  // bonds (i, i+1) with odd i: (1,2), (3,4), ...
  std::vector<PauliTerm> odd_bonds;   // bonds (2,3), (4,5), ...
  std::vector<PauliTerm> field_terms;

  std::vector<PauliTerm> all() const {
    std::vector<PauliTerm> t;
    t.insert(t.end(), even_bonds.begin(), even_bonds.end());
    t.insert(t.end(), odd_bonds.begin(), odd_bonds.end());
    t.insert(t.end(), field_terms.begin(), field_terms.end());
    return t;
  }
};

inline TermSplit split_terms(const HamiltonianSpec& spec) {
  spec.validate();
  const int n = spec.n_sites;
  TermSplit split;
  for (int i = 1; i < n; ++i) {
    auto& group = (i % 2 == 1) ? split.even_bonds : split.odd_bonds;
    for (char p : {'X', 'Y', 'Z'}) {
      group.push_back({PauliString::two(n, i, i + 1, p, p), spec.exchange_j / 4.0});
    }
  }
  for (int i = 1; i <= n; ++i) {
    if (spec.staggered_hz == 0.0) continue;
    split.field_terms.push_back({PauliString::single(n, i, 'Z'), spec.field_coeff(i)});
  }
  return split;
}

inline SparseHermitianOperator build_hamiltonian(const HamiltonianSpec& spec) {
  return {spec.n_sites, split_terms(spec).all()};
}

struct ReferenceSpectrum {
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;
  StateVector ground;                    // lowest eigenvector
  std::vector<StateVector> ground_multiplet;  // all vectors within degeneracy_tol of e0
  bool degenerate = false;
};

/// Exact low-energy reference by Lanczos. When the gap is below
/// `degeneracy_tol` the ground multiplet is extended until a separated level
/// appears, so fidelity diagnostics can project on the full subspace.
inline ReferenceSpectrum reference_spectrum(const HamiltonianSpec& spec, double tol = 1e-12,
                                            double degeneracy_tol = 1e-8) {
  spec.validate();
  if (spec.n_sites > 20) throw Error("reference_spectrum: N > 20 exceeds the desk-scale cap");
  const SparseHermitianOperator h = build_hamiltonian(spec);
  const HermitianOperator op = h.as_operator();

  int k = 2;
  std::vector<EigenPair> pairs = lanczos_extremal(op, k, tol);
  while (pairs.back().value - pairs.front().value < degeneracy_tol &&
         k < std::min<Index>(8, h.dim())) {
    ++k;
    pairs = lanczos_extremal(op, k, tol);
  }

  ReferenceSpectrum ref;
  ref.e0 = pairs[0].value;
  ref.ground = pairs[0].vector;
  for (const auto& p : pairs) {
    if (p.value - ref.e0 < degeneracy_tol) ref.ground_multiplet.push_back(p.vector);
  }
  ref.degenerate = ref.ground_multiplet.size() > 1;
  // first level above the multiplet, if resolved; otherwise the k=2 value
  ref.e1 = pairs[std::min<size_t>(ref.ground_multiplet.size(), pairs.size() - 1)].value;
  ref.gap = ref.e1 - ref.e0;
  return ref;
}

/// Antiferromagnetic product state |0101...>, site 1 = |0>.
inline StateVector neel_state(int n_sites) {
  if (n_sites < 1) throw Error("neel_state: need at least 1 site");
  Index index = 0;
  for (int site = 2; site <= n_sites; site += 2) index |= Index(1) << site_bit(n_sites, site);
  return basis_state(n_sites, index);
}

namespace detail {

inline std::vector<int> mask_sites(std::uint32_t mask, int n_sites) {
  std::vector<int> sites;
  for (int site = 1; site <= n_sites; ++site) {
    if (mask & (1u << site_bit(n_sites, site))) sites.push_back(site);
  }
  return sites;
}

}  // namespace detail

/// Second-order Trotter commutator prefactor
///   alpha_comm = sum_{a,b,c} || [h_c, [h_b, h_a]] ||   (spectral norm),
/// evaluated exactly on the union support of each triple. Triples whose
/// supports cannot connect are skipped; their nested commutator vanishes.
inline double commutator_prefactor(const HamiltonianSpec& spec, bool prune = true) {
  spec.validate();
  if (spec.n_sites > 10) throw Error("commutator_prefactor: N > 10 exceeds the brute-force cap");
  const std::vector<PauliTerm> terms = split_terms(spec).all();
  const int n = spec.n_sites;

  double total = 0.0;
  for (const auto& ta : terms) {
    for (const auto& tb : terms) {
      if (prune && tb.string.commutes_with(ta.string)) continue;
      const std::uint32_t inner_mask = ta.string.support_mask() | tb.string.support_mask();
      for (const auto& tc : terms) {
        if (prune && (tc.string.support_mask() & inner_mask) == 0) continue;
        const std::uint32_t mask = inner_mask | tc.string.support_mask();
        const std::vector<int> sites = detail::mask_sites(mask, n);
        const DenseMatrix a = ta.coeff * ta.string.dense_on(sites);
        const DenseMatrix b = tb.coeff * tb.string.dense_on(sites);
        const DenseMatrix c = tc.coeff * tc.string.dense_on(sites);
        const DenseMatrix inner = b * a - a * b;
        const DenseMatrix nested = c * inner - inner * c;
        if (nested.norm() < 1e-16) continue;
        const EigResult eig = dense_eig_hermitian(nested);
        total += std::max(std::abs(eig.values[0]), std::abs(eig.values[eig.values.size() - 1]));
      }
    }
  }
  return total;
}

}  // namespace gsprep
