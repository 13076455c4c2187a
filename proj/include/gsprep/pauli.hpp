#pragma once

#include "gsprep/common.hpp"
#include "gsprep/numerics.hpp"

#include <bit>
#include <string>
#include <vector>

namespace gsprep {

// Bit convention used everywhere in this library: site 1 is the most
// significant bit of a basis index, site N the least significant. For an
// N-site register, site i lives at bit position (N - i).

inline int site_bit(int n_sites, int site) { return n_sites - site; }

/// Tensor product of single-site Paulis, stored in the symplectic (X,Z) mask
/// representation with the i^{#Y} factor tracked in `phase_pow`
/// (P = i^{phase_pow} * X^{x} Z^{z} sitewise). Letters are {I,X,Y,Z}.
class PauliString {
 public:
  PauliString() = default;

  static PauliString identity(int n_sites) {
    PauliString p;
    p.n_sites_ = n_sites;
    return p;
  }

  /// `letters[i]` is the Pauli on site i+1.
  static PauliString from_letters(const std::string& letters) {
    PauliString p;
    p.n_sites_ = static_cast<int>(letters.size());
    for (int i = 0; i < p.n_sites_; ++i) p.set(i + 1, letters[i]);
    return p;
  }

  static PauliString single(int n_sites, int site, char letter) {
    PauliString p = identity(n_sites);
    p.set(site, letter);
    return p;
  }

  static PauliString two(int n_sites, int site_a, int site_b, char la, char lb) {
    PauliString p = identity(n_sites);
    p.set(site_a, la);
    p.set(site_b, lb);
    return p;
  }

  void set(int site, char letter) {
    const std::uint32_t bit = 1u << site_bit(n_sites_, site);
    x_ &= ~bit;
    z_ &= ~bit;
    switch (letter) {
      case 'I': break;
      case 'X': x_ |= bit; break;
      case 'Z': z_ |= bit; break;
      case 'Y':
        x_ |= bit;
        z_ |= bit;
        phase_pow_ = (phase_pow_ + 1) & 3;  // Y = i XZ
        break;
      default: throw Error("PauliString: unknown letter");
    }
  }

  int n_sites() const { return n_sites_; }

  char letter(int site) const {
    const std::uint32_t bit = 1u << site_bit(n_sites_, site);
    const bool x = x_ & bit, z = z_ & bit;
    return x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
  }

  std::string to_string() const {
    std::string s(n_sites_, 'I');
    for (int i = 1; i <= n_sites_; ++i) s[i - 1] = letter(i);
    return s;
  }

  std::uint32_t support_mask() const { return x_ | z_; }

  bool commutes_with(const PauliString& other) const {
    const int a = std::popcount(x_ & other.z_);
    const int b = std::popcount(z_ & other.x_);
    return ((a ^ b) & 1) == 0;
  }

  /// out += c * P |in>, with (X^x Z^z)|b> = (-1)^{popcount(b & z)} |b ^ x>.
  void accumulate(const StateVector& in, Complex c, StateVector& out) const {
    c *= phase_factor();
    const auto dim = in.size();
    for (Index b = 0; b < dim; ++b) {
      const Index target = b ^ static_cast<Index>(x_);
      const double sign = (std::popcount(static_cast<std::uint32_t>(b) & z_) & 1) ? -1.0 : 1.0;
      out[target] += c * sign * in[b];
    }
  }

  /// Dense 2x2-per-site matrix restricted to an ordered site list that must
  /// contain the support. The letter matrices carry the Y phases, so no
  /// explicit i^{#Y} factor enters here.
  DenseMatrix dense_on(const std::vector<int>& sites) const {
    DenseMatrix m = DenseMatrix::Identity(1, 1);
    for (int site : sites) m = kron(m, site_matrix(letter(site)));
    return m;
  }

  DenseMatrix dense() const {
    std::vector<int> sites;
    for (int i = 1; i <= n_sites_; ++i) sites.push_back(i);
    return dense_on(sites);
  }

  static DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j)
        out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  }

 private:
  Complex phase_factor() const {
    static const Complex table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return table[phase_pow_];
  }

  static DenseMatrix site_matrix(char letter) {
    DenseMatrix m(2, 2);
    switch (letter) {
      case 'I': m << 1, 0, 0, 1; break;
      case 'X': m << 0, 1, 1, 0; break;
      case 'Y': m << 0, Complex(0, -1), Complex(0, 1), 0; break;
      case 'Z': m << 1, 0, 0, -1; break;
      default: throw Error("PauliString: unknown letter");
    }
    return m;
  }

  int n_sites_ = 0;
  std::uint32_t x_ = 0, z_ = 0;
  int phase_pow_ = 0;
};

struct PauliTerm {
  PauliString string;
  double coeff = 0.0;  // real by Hermiticity
};

/// Hermitian operator presented as a real-coefficient Pauli-term list with a
/// matvec contract on 2^N-dimensional state vectors.
class SparseHermitianOperator {
 public:
  SparseHermitianOperator(int n_sites, std::vector<PauliTerm> terms)
      : n_sites_(n_sites), terms_(std::move(terms)) {
    if (n_sites_ < 1 || n_sites_ > 24) throw Error("SparseHermitianOperator: bad site count");
  }

  int n_sites() const { return n_sites_; }
  Index dim() const { return Index(1) << n_sites_; }
  const std::vector<PauliTerm>& terms() const { return terms_; }

  void apply(const StateVector& in, StateVector& out) const {
    out.setZero(dim());
    for (const auto& t : terms_) t.string.accumulate(in, Complex(t.coeff, 0.0), out);
  }

  StateVector operator()(const StateVector& in) const {
    StateVector out;
    apply(in, out);
    return out;
  }

  HermitianOperator as_operator() const {
    return {dim(), [this](const StateVector& x, StateVector& y) { apply(x, y); }};
  }

  DenseMatrix dense() const {
    DenseMatrix m = DenseMatrix::Zero(dim(), dim());
    for (const auto& t : terms_) m += Complex(t.coeff, 0.0) * t.string.dense();
    return m;
  }

  /// <x|A y> vs <A x|y> on random vectors; used by tests and input validation.
  double hermiticity_defect(Rng& rng, int n_probes = 4) const {
    double worst = 0.0;
    for (int p = 0; p < n_probes; ++p) {
      const StateVector x = random_state(dim(), rng);
      const StateVector y = random_state(dim(), rng);
      const Complex lhs = x.dot((*this)(y));
      const Complex rhs = (*this)(x).dot(y);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
  }

 private:
  int n_sites_;
  std::vector<PauliTerm> terms_;
};

}  // namespace gsprep
