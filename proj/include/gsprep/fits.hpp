#pragma once

#include "gsprep/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gsprep {

// Deterministic least-squares fitters: damped Gauss-Newton with analytic
// Jacobians and fixed multi-start grids. No RNG anywhere, so a given data set
// always produces the same fit.

struct LogisticFit {
  double r0 = 0.0;  // in (0, 1]
  double gamma = 0.0;  // > 0
  double residual_norm = 0.0;
  bool converged = false;

  double evaluate(double l) const { return 1.0 / (1.0 + (1.0 / r0 - 1.0) * std::exp(-gamma * l)); }

  /// Inflection point of the fitted curve, where it crosses 1/2.
  double inflection() const { return std::log(1.0 / r0 - 1.0) / gamma; }
};

struct TailFit {
  double c = 0.0;  // >= 0 floor
  double a = 0.0;  // >= 0 amplitude
  double k = 0.0;  // >= 0 decay rate
  double lo = 0.0, hi = 0.0;  // fitted window
  double residual_norm = 0.0;
  std::vector<std::string> active_constraints;  // parameters pinned at 0
  bool converged = false;

  double evaluate(double l) const { return c + a * std::exp(-k * l); }
};

struct PowerLawFit {
  double alpha = 0.0;  // > 0 prefactor
  double beta = 0.0;   // exponent
  double beta_stderr = std::numeric_limits<double>::quiet_NaN();
  bool stderr_defined = false;  // needs more than two points
  double r2_log = 1.0;

  double evaluate(double n) const { return alpha * std::pow(n, beta); }
};

namespace fit_detail {

constexpr int kMaxIterations = 200;
constexpr double kStepTol = 1e-12;

struct GnResult {
  std::vector<double> params;
  double residual_norm = 0.0;
  bool converged = false;
};

// Damped (Levenberg-style) Gauss-Newton with optional lower bounds at zero.
// `model` fills residuals r_i(p) and the Jacobian row J_i.
template <typename Model>
GnResult gauss_newton(const Model& model, std::vector<double> p,
                      const std::vector<bool>& nonneg) {
  const int np = static_cast<int>(p.size());
  auto project = [&](std::vector<double>& q) {
    for (int i = 0; i < np; ++i)
      if (nonneg[i] && q[i] < 0.0) q[i] = 0.0;
  };
  project(p);

  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  model(p, r, j);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  bool converged = false;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd jtr = j.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 25 && !accepted; ++attempt) {
      Eigen::MatrixXd m = jtj;
      for (int i = 0; i < np; ++i) m(i, i) += lambda * std::max(jtj(i, i), 1e-12);
      const Eigen::VectorXd step = m.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      std::vector<double> q(p);
      for (int i = 0; i < np; ++i) q[i] += step[i];
      project(q);
      Eigen::VectorXd r2;
      Eigen::MatrixXd j2;
      model(q, r2, j2);
      const double cost2 = r2.squaredNorm();
      if (std::isfinite(cost2) && cost2 <= cost) {
        double moved = 0.0;
        for (int i = 0; i < np; ++i) moved = std::max(moved, std::abs(q[i] - p[i]));
        p = q;
        r = r2;
        j = j2;
        const bool tiny_step = moved < kStepTol * (1.0 + std::abs(p[0]));
        const bool tiny_gain = cost - cost2 < 1e-15 * (1.0 + cost);
        cost = cost2;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        if (tiny_step || tiny_gain) {
          converged = true;
          iter = kMaxIterations;  // done
        }
      } else {
        lambda *= 10;
      }
    }
    if (!accepted) {
      converged = cost < 1e-24 || iter > 0;
      break;
    }
  }
  return {p, std::sqrt(cost), converged};
}

}  // namespace fit_detail

/// Fit r(l) = 1 / (1 + (1/r0 - 1) e^{-gamma l}) with r0 in (0,1], gamma > 0.
/// Multi-start over a fixed grid; the best local optimum wins.
inline LogisticFit fit_logistic(const std::vector<double>& l, const std::vector<double>& r) {
  if (l.size() != r.size()) throw Error("fit_logistic: size mismatch");
  if (l.size() < 5) throw Error("fit_logistic: need at least 5 points");
  const double rmin = *std::min_element(r.begin(), r.end());
  const double rmax = *std::max_element(r.begin(), r.end());
  for (double v : r)
    if (v <= 0.0 || v > 1.0 + 1e-12) throw Error("fit_logistic: data outside (0, 1]");
  if (rmax - rmin < 1e-12) throw Error("fit_logistic: constant data, fit is degenerate");

  // parameters p = (u, g) with r0 = 1/(1+e^u), gamma = g; the u substitution
  // keeps r0 inside (0,1) without explicit bounds
  auto model = [&](const std::vector<double>& p, Eigen::VectorXd& res, Eigen::MatrixXd& jac) {
    const double u = p[0], g = p[1];
    const Index m = static_cast<Index>(l.size());
    res.resize(m);
    jac.resize(m, 2);
    for (Index i = 0; i < m; ++i) {
      const double e = std::exp(u - g * l[i]);
      const double f = 1.0 / (1.0 + e);
      res[i] = f - r[i];
      jac(i, 0) = -f * f * e;        // d/du
      jac(i, 1) = f * f * e * l[i];  // d/dgamma
    }
  };

  fit_detail::GnResult best;
  bool have = false;
  const double r_first = std::clamp(r.front(), 1e-9, 1.0 - 1e-9);
  const double u_first = std::log(1.0 / r_first - 1.0);
  for (double u0 : {u_first, u_first + 2.0, std::log(99.0), std::log(9.0)}) {
    for (double g0 : {0.05, 0.2, 0.5, 1.0}) {
      const auto fitted = fit_detail::gauss_newton(model, {u0, g0}, {false, false});
      if (!std::isfinite(fitted.residual_norm) || fitted.params[1] <= 0.0) continue;
      if (!have || fitted.residual_norm < best.residual_norm) {
        best = fitted;
        have = true;
      }
    }
  }
  if (!have) throw Error("fit_logistic: all starts diverged");

  LogisticFit out;
  out.r0 = 1.0 / (1.0 + std::exp(best.params[0]));
  out.gamma = best.params[1];
  out.residual_norm = best.residual_norm;
  out.converged = best.converged;
  return out;
}

/// Fit y(l) = C + A e^{-k l} on the window [lo, hi], subject to C, A, k >= 0.
inline TailFit fit_tail(const std::vector<double>& l, const std::vector<double>& y, double lo,
                        double hi) {
  if (l.size() != y.size()) throw Error("fit_tail: size mismatch");
  std::vector<double> lw, yw;
  for (size_t i = 0; i < l.size(); ++i) {
    if (l[i] >= lo && l[i] <= hi) {
      lw.push_back(l[i]);
      yw.push_back(y[i]);
    }
  }
  if (lw.size() < 6) throw Error("fit_tail: fewer than 6 points in window [" +
                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");

  auto model = [&](const std::vector<double>& p, Eigen::VectorXd& res, Eigen::MatrixXd& jac) {
    const double c = p[0], a = p[1], k = p[2];
    const Index m = static_cast<Index>(lw.size());
    res.resize(m);
    jac.resize(m, 3);
    for (Index i = 0; i < m; ++i) {
      const double e = std::exp(-k * lw[i]);
      res[i] = c + a * e - yw[i];
      jac(i, 0) = 1.0;
      jac(i, 1) = e;
      jac(i, 2) = -a * lw[i] * e;
    }
  };

  const double ymin = *std::min_element(yw.begin(), yw.end());
  const double ymax = *std::max_element(yw.begin(), yw.end());
  // decay-rate seed from the window endpoints
  double k_seed = 0.0;
  if (yw.front() > ymin && yw.back() >= 0 && lw.back() > lw.front()) {
    const double top = std::max(yw.front() - ymin, 1e-300);
    const double bot = std::max(yw.back() - ymin, top * 1e-12);
    k_seed = std::max(std::log(top / bot) / (lw.back() - lw.front()), 0.0);
  }

  fit_detail::GnResult best;
  bool have = false;
  for (double c0 : {0.0, 0.9 * ymin}) {
    for (double a0 : {ymax - ymin, ymax}) {
      for (double k0 : {k_seed, k_seed * 0.3 + 1e-4, 0.01, 0.1}) {
        const auto fitted =
            fit_detail::gauss_newton(model, {c0, std::max(a0, 0.0), k0}, {true, true, true});
        if (!std::isfinite(fitted.residual_norm)) continue;
        if (!have || fitted.residual_norm < best.residual_norm) {
          best = fitted;
          have = true;
        }
      }
    }
  }
  if (!have) throw Error("fit_tail: all starts diverged (singular Jacobian?)");

  TailFit out;
  out.c = best.params[0];
  out.a = best.params[1];
  out.k = best.params[2];
  out.lo = lo;
  out.hi = hi;
  out.residual_norm = best.residual_norm;
  out.converged = best.converged;
  const char* names[3] = {"C", "A", "k"};
  for (int i = 0; i < 3; ++i)
    if (best.params[i] == 0.0) out.active_constraints.push_back(names[i]);
  return out;
}

/// Ordinary least squares of ln y on ln n: y = alpha * n^beta.
inline PowerLawFit fit_powerlaw(const std::vector<double>& n, const std::vector<double>& y) {
  if (n.size() != y.size()) throw Error("fit_powerlaw: size mismatch");
  const int m = static_cast<int>(n.size());
  if (m < 2) throw Error("fit_powerlaw: need at least 2 points");
  for (int i = 0; i < m; ++i)
    if (n[i] <= 0.0 || y[i] <= 0.0) throw Error("fit_powerlaw: inputs must be positive");

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < m; ++i) {
    const double x = std::log(n[i]), v = std::log(y[i]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
    syy += v * v;
  }
  const double det = m * sxx - sx * sx;
  if (std::abs(det) < 1e-14) throw Error("fit_powerlaw: degenerate abscissae");
  PowerLawFit out;
  out.beta = (m * sxy - sx * sy) / det;
  out.alpha = std::exp((sy - out.beta * sx) / m);

  double rss = 0, tss = 0;
  const double ymean = sy / m;
  for (int i = 0; i < m; ++i) {
    const double x = std::log(n[i]), v = std::log(y[i]);
    const double pred = std::log(out.alpha) + out.beta * x;
    rss += (v - pred) * (v - pred);
    tss += (v - ymean) * (v - ymean);
  }
  out.r2_log = tss > 0 ? 1.0 - rss / tss : 1.0;
  if (m > 2) {
    const double sigma2 = rss / (m - 2);
    out.beta_stderr = std::sqrt(sigma2 * m / det);
    out.stderr_defined = true;
  }
  return out;
}

struct DeltaLPrediction {
  double layers = 0.0;
  bool reachable = true;  // false when the floor C exceeds the per-site target
};

/// Additional layers needed for the tail model to reach a per-site target
/// eps/N: deltaL = (1/k) ln(A / (eps/N - C)).
inline DeltaLPrediction predict_delta_l(const TailFit& tail, double n, double eps) {
  if (tail.k <= 0.0) throw Error("predict_delta_l: k must be positive");
  const double target = eps / n;
  if (target <= tail.c) return {0.0, false};
  return {std::log(tail.a / (target - tail.c)) / tail.k, true};
}

}  // namespace gsprep
