#pragma once

#include "gsprep/circuit.hpp"
#include "gsprep/hamiltonian.hpp"
#include "gsprep/numerics.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gsprep {

/// Deterministic imaginary-time schedule fixed from classical inputs: the
/// energy shift E0 (from the variational stage), the effective gap, and the
/// reference overlap w0 of the initial state. The step list is a linear ramp
/// dtau_min -> dtau_max with dtau_max = 0.62 pi / (s * gap); the step count
/// is the conservative estimate K_safe; the Trotter error budget is split
/// per step proportionally to dtau_k^3.
struct Schedule {
  double m0 = 0.999;
  double s = 0.0;
  double e_shift = 0.0;
  double delta_eff = 0.0;
  double w0_ref = 0.0;
  double eps = 1e-6;
  double eps_alg = 0.0;
  double eps_trot = 0.0;
  double eps_tilde = 0.0;
  int k_safe = 1;
  bool k_safe_clamped = false;  // the estimate came out <= 0 and was clamped
  double dtau_min = 0.0;
  double dtau_max = 0.0;
  std::vector<double> dtau;        // k = 1..K_safe
  std::vector<double> trot_budget;  // per-step share of eps_trot
  std::vector<int> reps;            // filled by calibration as the run goes
};

struct ScheduleOptions {
  double m0 = 0.999;
  /// dtau_min as a fraction of dtau_max.
  double dtau_min_fraction = 0.02;
};

inline Schedule make_schedule(double e0_dmrg, double delta_eff, double w0_ref, double eps,
                              const ScheduleOptions& opts = {}) {
  if (delta_eff <= 0.0) throw Error("make_schedule: effective gap must be positive");
  if (delta_eff < 1e-8)
    throw Error("make_schedule: effective gap below 1e-8, dtau_max would diverge");
  if (w0_ref <= 0.0 || w0_ref >= 1.0 + 1e-12)
    throw Error("make_schedule: reference overlap must lie in (0, 1)");
  if (eps <= 0.0 || eps >= 1.0) throw Error("make_schedule: target must lie in (0, 1)");

  Schedule sch;
  sch.m0 = opts.m0;
  sch.s = opts.m0 / std::sqrt(1.0 - opts.m0 * opts.m0);
  sch.e_shift = e0_dmrg;
  sch.delta_eff = delta_eff;
  sch.w0_ref = std::min(w0_ref, 1.0 - 1e-15);
  sch.eps = eps;
  sch.eps_alg = eps / 2.0;
  sch.eps_trot = eps / 2.0;
  sch.eps_tilde = sch.eps_alg * (4.0 - sch.eps_alg) / ((2.0 - sch.eps_alg) * (2.0 - sch.eps_alg));

  const double estimate =
      1.5 / std::log(2.0) * std::log((1.0 - sch.w0_ref) / (sch.eps_tilde * sch.w0_ref));
  if (estimate <= 0.0) {
    sch.k_safe = 1;
    sch.k_safe_clamped = true;
  } else {
    sch.k_safe = static_cast<int>(std::ceil(estimate));
  }

  sch.dtau_max = 0.62 * kPi / (sch.s * delta_eff);
  sch.dtau_min = opts.dtau_min_fraction * sch.dtau_max;

  if (sch.k_safe == 1) {
    sch.dtau.push_back(sch.dtau_max);
  } else {
    for (int k = 1; k <= sch.k_safe; ++k) {
      sch.dtau.push_back(sch.dtau_min + (k - 1.0) / (sch.k_safe - 1.0) *
                                            (sch.dtau_max - sch.dtau_min));
    }
  }

  double cube_sum = 0.0;
  for (double d : sch.dtau) cube_sum += d * d * d;
  for (double d : sch.dtau) sch.trot_budget.push_back(sch.eps_trot * d * d * d / cube_sum);
  sch.reps.assign(sch.dtau.size(), 0);
  return sch;
}

namespace pite_detail {

// m0 [ (1/2 + i/2s) u_plus + (1/2 - i/2s) u_minus ] with
// u_plus = exp(+i t H~) v, u_minus = exp(-i t H~) v.
inline StateVector combine_filter(double m0, double s, const StateVector& u_plus,
                                  const StateVector& u_minus) {
  const Complex cp(0.5, 0.5 / s);
  const Complex cm(0.5, -0.5 / s);
  return m0 * (cp * u_plus + cm * u_minus);
}

}  // namespace pite_detail

/// Exact filter application via two Krylov propagators:
/// f(H~) = m0 [cos(H~ s dtau) - sin(H~ s dtau) / s], H~ = H - E_shift.
/// Returns the renormalized state and the success probability |f psi|^2.
inline std::pair<StateVector, double> exact_filter_apply(const SparseHermitianOperator& h,
                                                         const StateVector& psi, double dtau,
                                                         const Schedule& sch,
                                                         double expmv_tol = 1e-12) {
  const double t = sch.s * dtau;
  const HermitianOperator op = h.as_operator();
  // the shift enters as a global phase on each propagator
  const Complex shift_plus = std::exp(Complex(0, -t * sch.e_shift));
  const Complex shift_minus = std::exp(Complex(0, t * sch.e_shift));
  const StateVector u_plus = shift_plus * krylov_expmv(op, -t, psi, expmv_tol);
  const StateVector u_minus = shift_minus * krylov_expmv(op, t, psi, expmv_tol);
  StateVector f = pite_detail::combine_filter(sch.m0, sch.s, u_plus, u_minus);
  const double p = f.squaredNorm();
  if (p > 0.0) f /= std::sqrt(p);
  return {f, p};
}

/// Apply r repetitions of the symmetric Strang slice for time t (per-term
/// exponentials are exact, so this matches the gate-level circuit to float
/// precision).
inline StateVector strang_power_apply(const TermSplit& split, int n_sites,
                                      const StateVector& psi, double t, int reps) {
  StateVector out = psi;
  const double dt = t / reps;

  auto term_matrix = [&](const PauliTerm& t_, double tau) {
    // dense 4x4 exponential of one Pauli-pair term
    std::vector<int> sites;
    const std::string s = t_.string.to_string();
    for (int i = 0; i < static_cast<int>(s.size()); ++i)
      if (s[i] != 'I') sites.push_back(i + 1);
    const DenseMatrix p = t_.string.dense_on(sites);
    const EigResult eig = dense_eig_hermitian(p);
    DenseMatrix d = DenseMatrix::Zero(4, 4);
    for (Index i = 0; i < 4; ++i)
      d(i, i) = std::exp(Complex(0, -tau * t_.coeff * eig.values[i]));
    return DenseMatrix(eig.vectors * d * eig.vectors.adjoint());
  };

  // bond group propagator: product of the three commuting pair rotations
  auto group_propagators = [&](const std::vector<PauliTerm>& terms, double tau) {
    std::vector<std::pair<int, DenseMatrix>> out_b;
    for (size_t i = 0; i + 2 < terms.size(); i += 3) {
      const std::string s = terms[i].string.to_string();
      int wire = 0;
      while (s[wire] == 'I') ++wire;
      DenseMatrix m = term_matrix(terms[i], tau) * term_matrix(terms[i + 1], tau) *
                      term_matrix(terms[i + 2], tau);
      out_b.push_back({wire, std::move(m)});
    }
    return out_b;
  };

  const auto even_half = group_propagators(split.even_bonds, dt / 2);
  const auto odd_half = group_propagators(split.odd_bonds, dt / 2);

  auto apply_bonds = [&](const std::vector<std::pair<int, DenseMatrix>>& bonds) {
    for (const auto& [wire, m] : bonds) apply_2q(out, m, wire, wire + 1, n_sites);
  };
  auto apply_fields = [&]() {
    for (const auto& t_ : split.field_terms) {
      const std::string s = t_.string.to_string();
      const int wire = static_cast<int>(s.find('Z'));
      const Complex lo = std::exp(Complex(0, -dt * t_.coeff));
      const Complex hi = std::exp(Complex(0, dt * t_.coeff));
      apply_z_phase(out, Index(1) << (n_sites - 1 - wire), lo, hi);
    }
  };

  for (int rep = 0; rep < reps; ++rep) {
    apply_bonds(even_half);
    apply_bonds(odd_half);
    apply_fields();
    apply_bonds(odd_half);
    apply_bonds(even_half);
  }
  return out;
}

/// Trotterized filter: the exact propagators replaced by Strang-slice powers;
/// the energy shift enters analytically as a phase.
inline std::pair<StateVector, double> trotter_filter_apply(const TermSplit& split, int n_sites,
                                                           const StateVector& psi, double dtau,
                                                           int reps, const Schedule& sch) {
  if (reps < 1) throw Error("trotter_filter_apply: need at least one repetition");
  const double t = sch.s * dtau;
  const Complex shift_plus = std::exp(Complex(0, -t * sch.e_shift));
  const Complex shift_minus = std::exp(Complex(0, t * sch.e_shift));
  const StateVector u_plus = shift_plus * strang_power_apply(split, n_sites, psi, -t, reps);
  const StateVector u_minus = shift_minus * strang_power_apply(split, n_sites, psi, t, reps);
  StateVector f = pite_detail::combine_filter(sch.m0, sch.s, u_plus, u_minus);
  const double p = f.squaredNorm();
  if (p > 0.0) f /= std::sqrt(p);
  return {f, p};
}

struct CalibrationResult {
  int reps = 1;
  bool cap_hit = false;        // budget not met even at the cap
  bool certificate = false;    // reps - 1 verified to fail (when reps > 1)
  double achieved_error = 0.0;
};

inline constexpr int kMaxTrotterReps = 1024;

/// Smallest repetition count whose one-step Trotterized output stays within
/// `budget` of the exact one-step output, searched by doubling then
/// bisection along the actual trajectory state. The error metric is the
/// infidelity between the two one-step states, matching the scale on which
/// the total target eps is split into algorithmic and Trotter shares.
inline CalibrationResult calibrate_reps(const SparseHermitianOperator& h, const TermSplit& split,
                                        const StateVector& psi, double dtau,
                                        const Schedule& sch, double budget, int start_hint = 1) {
  if (budget <= 0.0) throw Error("calibrate_reps: budget must be positive");
  if (dtau == 0.0) return {1, false, false, 0.0};

  const int n = h.n_sites();
  const auto [exact_state, exact_p] =
      exact_filter_apply(h, psi, dtau, sch, std::min(1e-12, std::sqrt(budget) / 8));

  auto error_at = [&](int reps) {
    const auto [state, p] = trotter_filter_apply(split, n, psi, dtau, reps, sch);
    return std::max(0.0, 1.0 - std::norm(exact_state.dot(state)));
  };

  int hi = std::clamp(start_hint, 1, kMaxTrotterReps);
  double err_hi = error_at(hi);
  while (err_hi > budget && hi < kMaxTrotterReps) {
    hi = std::min(2 * hi, kMaxTrotterReps);
    err_hi = error_at(hi);
  }
  if (err_hi > budget) return {kMaxTrotterReps, true, false, err_hi};

  // bisect for the smallest passing count in (lo, hi], lo failing
  int lo = 0;
  int lo_known_fail = -1;
  int probe_lo = hi / 2;
  if (hi == 1) return {1, false, false, err_hi};
  // establish a failing lower bound below hi
  while (probe_lo >= 1) {
    const double e = error_at(probe_lo);
    if (e > budget) {
      lo = probe_lo;
      lo_known_fail = probe_lo;
      break;
    }
    hi = probe_lo;
    err_hi = e;
    probe_lo /= 2;
  }
  if (lo_known_fail < 0) return {hi, false, false, err_hi};  // passes down to reps = 1

  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    const double e = error_at(mid);
    if (e > budget) {
      lo = mid;
    } else {
      hi = mid;
      err_hi = e;
    }
  }
  return {hi, false, true, err_hi};
}

enum class PiteBackend { exact, trotter };

struct TrajectoryRecord {
  int step = 0;  // 0 is the initial state
  double dtau = 0.0;
  int reps = 0;
  double p = 1.0;
  double p_cum = 1.0;
  double infidelity = 0.0;
  double energy_error = 0.0;
  Index depth = 0;       // convention-D1 depth of this step's circuit
  Index depth_cum = 0;
  bool rep_cap_hit = false;
};

struct Trajectory {
  std::string initializer;  // "mps" or "neel"
  PiteBackend backend = PiteBackend::trotter;
  std::vector<TrajectoryRecord> records;
  bool reached_target = false;  // stopped early below the tracking floor
};

struct TrajectoryOptions {
  PiteBackend backend = PiteBackend::trotter;
  /// Stop once the energy error falls below this floor (margin under the
  /// crossing target so interpolation still brackets it).
  double stop_energy_error = kChemicalAccuracy / 10.0;
  bool record_depth = true;
};

/// Run the scheduled filter sequence, recording per-step diagnostics against
/// the exact reference. Repetition counts are calibrated per step on the
/// actual trajectory state and the step circuit depth is measured under
/// convention D1.
inline Trajectory run_trajectory(const StateVector& init, Schedule& sch,
                                 const SparseHermitianOperator& h, const TermSplit& split,
                                 const ReferenceSpectrum& ref,
                                 const TrajectoryOptions& opts = {}) {
  const int n = h.n_sites();
  Trajectory traj;
  traj.backend = opts.backend;

  StateVector state = init;
  double p_cum = 1.0;
  Index depth_cum = 0;

  auto energy_error = [&](const StateVector& v) {
    const StateVector hv = h(v);
    return v.dot(hv).real() - ref.e0;
  };

  TrajectoryRecord rec0;
  rec0.infidelity = 1.0 - subspace_fidelity(state, ref.ground_multiplet);
  rec0.energy_error = energy_error(state);
  traj.records.push_back(rec0);

  int rep_hint = 1;
  for (int k = 1; k <= sch.k_safe; ++k) {
    const double dtau = sch.dtau[k - 1];
    TrajectoryRecord rec;
    rec.step = k;
    rec.dtau = dtau;

    const CalibrationResult cal =
        calibrate_reps(h, split, state, dtau, sch, sch.trot_budget[k - 1], rep_hint);
    rec.reps = cal.reps;
    rec.rep_cap_hit = cal.cap_hit;
    sch.reps[k - 1] = cal.reps;
    rep_hint = std::max(1, cal.reps / 2);

    double p = 0.0;
    if (opts.backend == PiteBackend::exact) {
      std::tie(state, p) = exact_filter_apply(h, state, dtau, sch);
    } else {
      std::tie(state, p) = trotter_filter_apply(split, n, state, dtau, cal.reps, sch);
    }
    rec.p = p;
    p_cum *= p;
    rec.p_cum = p_cum;

    if (opts.record_depth) {
      const Circuit step = build_pite_step(split, n, PiteStepParams(sch.m0, sch.e_shift, dtau),
                                           cal.reps);
      rec.depth = depth_d1(step);
    }
    depth_cum += rec.depth;
    rec.depth_cum = depth_cum;

    rec.infidelity = 1.0 - subspace_fidelity(state, ref.ground_multiplet);
    rec.energy_error = energy_error(state);
    traj.records.push_back(rec);

    if (rec.energy_error < opts.stop_energy_error) {
      traj.reached_target = true;
      break;
    }
  }
  return traj;
}

struct CrossingMetrics {
  bool reached = false;
  double k_chem = 0.0;   // fractional step index at the crossing
  double d_raw = 0.0;    // cumulative depth at the crossing
  double d_post = 0.0;   // d_raw / p_cum
  double p_cum = 0.0;
  // final values when the target was never reached
  double final_energy_error = 0.0;
  double final_depth = 0.0;
};

/// Locate the crossing of the energy-error target by linear interpolation of
/// log10(dE) against cumulative depth between the two bracketing steps.
inline CrossingMetrics crossing_metrics(const Trajectory& traj, double target) {
  CrossingMetrics out;
  const auto& recs = traj.records;
  if (recs.empty()) throw Error("crossing_metrics: empty trajectory");
  out.final_energy_error = recs.back().energy_error;
  out.final_depth = static_cast<double>(recs.back().depth_cum);

  for (size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].energy_error > target) continue;
    out.reached = true;
    if (recs[i].energy_error == target || i == 0) {
      out.k_chem = recs[i].step;
      out.d_raw = static_cast<double>(recs[i].depth_cum);
      out.p_cum = recs[i].p_cum;
    } else {
      const auto& a = recs[i - 1];
      const auto& b = recs[i];
      const double ya = std::log10(std::max(a.energy_error, 1e-300));
      const double yb = std::log10(std::max(b.energy_error, 1e-300));
      const double yt = std::log10(target);
      const double f = (ya - yt) / (ya - yb);
      out.k_chem = a.step + f * (b.step - a.step);
      out.d_raw = a.depth_cum + f * double(b.depth_cum - a.depth_cum);
      out.p_cum = a.p_cum + f * (b.p_cum - a.p_cum);
    }
    out.d_post = out.p_cum > 0.0 ? out.d_raw / out.p_cum : std::numeric_limits<double>::infinity();
    return out;
  }
  return out;  // not reached; final values already set
}

}  // namespace gsprep
