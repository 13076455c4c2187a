#pragma once

#include "gsprep/dmrg.hpp"
#include "gsprep/encoder.hpp"
#include "gsprep/fits.hpp"
#include "gsprep/io.hpp"
#include "gsprep/pite.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <optional>
#include <thread>

namespace gsprep {

/// Resolved scan configuration with all defaults filled in. The tail windows
/// default to the per-size layer ranges used for the slow-decay fits.
struct ScanConfig {
  std::vector<int> sizes{8, 10, 12};
  std::vector<double> fields{0.0, 0.5};
  std::vector<std::string> initializers{"mps", "neel"};
  std::vector<std::string> backends{"trotter"};
  bool chi_rule_n = true;  // chi = N
  Index chi_fixed = 0;
  double eps = 1e-6;
  double m0 = 0.999;
  bool l_max_auto = true;
  int l_max_fixed = 0;
  bool tail = false;  // extend the encoder through the tail window
  std::map<int, std::pair<int, int>> tail_windows = {
      {8, {20, 100}},   {10, {50, 250}},  {12, {200, 900}}, {14, {100, 400}},
      {16, {1100, 1800}}, {18, {200, 400}}, {20, {1100, 1800}}};
  std::uint64_t seed = 20250810;
  fs::path outdir = "runs/scan";
  double dmrg_e_tol = 1e-10;
  int dmrg_sweep_cap = 30;
  double dtau_min_fraction = 0.02;
  double rank_threshold = 1e-10;

  static ScanConfig from_config(const Config& cfg) {
    ScanConfig sc;
    for (const auto& [key, value] : cfg.values()) validate_key(key);
    sc.sizes.clear();
    for (const auto& s : cfg.get_list("scan.N", "8,10,12")) sc.sizes.push_back(std::stoi(s));
    sc.fields.clear();
    for (const auto& s : cfg.get_list("scan.h_z", "0,0.5")) sc.fields.push_back(std::stod(s));
    sc.initializers = cfg.get_list("scan.initializers", "mps,neel");
    sc.backends = cfg.get_list("scan.backends", "trotter");
    const std::string chi = cfg.get_string("scan.chi", "N");
    if (chi == "N") {
      sc.chi_rule_n = true;
    } else {
      sc.chi_rule_n = false;
      sc.chi_fixed = std::stol(chi);
    }
    sc.eps = cfg.get_double("scan.epsilon", sc.eps);
    sc.m0 = cfg.get_double("scan.m0", sc.m0);
    const std::string lmax = cfg.get_string("scan.L_max", "auto");
    if (lmax == "auto") {
      sc.l_max_auto = true;
    } else {
      sc.l_max_auto = false;
      sc.l_max_fixed = std::stoi(lmax);
    }
    sc.tail = cfg.get_string("scan.tail", "off") == "on";
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("scan.seed", sc.seed));
    sc.outdir = cfg.get_string("scan.outdir", sc.outdir.string());
    sc.dmrg_e_tol = cfg.get_double("dmrg.e_tol", sc.dmrg_e_tol);
    sc.dmrg_sweep_cap = static_cast<int>(cfg.get_int("dmrg.sweep_cap", sc.dmrg_sweep_cap));
    sc.dtau_min_fraction = cfg.get_double("pite.dtau_min_fraction", sc.dtau_min_fraction);
    sc.rank_threshold = cfg.get_double("encoder.rank_threshold", sc.rank_threshold);
    for (int n : {8, 10, 12, 14, 16, 18, 20}) {
      const std::string key = "tail.window." + std::to_string(n);
      if (cfg.has(key)) {
        const auto parts = cfg.get_list(key, "");
        if (parts.size() != 2) throw Error("config key '" + key + "': expected lo,hi");
        sc.tail_windows[n] = {std::stoi(parts[0]), std::stoi(parts[1])};
      }
    }
    sc.validate();
    return sc;
  }

  Config to_config() const {
    Config cfg;
    auto join_i = [](const std::vector<int>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    std::string fields_s;
    for (size_t i = 0; i < fields.size(); ++i)
      fields_s += (i ? "," : "") + fmt_double(fields[i]);
    std::string inits_s, backends_s;
    for (size_t i = 0; i < initializers.size(); ++i) inits_s += (i ? "," : "") + initializers[i];
    for (size_t i = 0; i < backends.size(); ++i) backends_s += (i ? "," : "") + backends[i];
    cfg.set("scan.N", join_i(sizes));
    cfg.set("scan.h_z", fields_s);
    cfg.set("scan.initializers", inits_s);
    cfg.set("scan.backends", backends_s);
    cfg.set("scan.chi", chi_rule_n ? "N" : std::to_string(chi_fixed));
    cfg.set("scan.epsilon", fmt_double(eps));
    cfg.set("scan.m0", fmt_double(m0));
    cfg.set("scan.L_max", l_max_auto ? "auto" : std::to_string(l_max_fixed));
    cfg.set("scan.tail", tail ? "on" : "off");
    cfg.set("scan.seed", std::to_string(seed));
    cfg.set("scan.outdir", outdir.string());
    cfg.set("dmrg.e_tol", fmt_double(dmrg_e_tol));
    cfg.set("dmrg.sweep_cap", std::to_string(dmrg_sweep_cap));
    cfg.set("pite.dtau_min_fraction", fmt_double(dtau_min_fraction));
    cfg.set("encoder.rank_threshold", fmt_double(rank_threshold));
    for (const auto& [n, w] : tail_windows)
      cfg.set("tail.window." + std::to_string(n),
              std::to_string(w.first) + "," + std::to_string(w.second));
    return cfg;
  }

  void validate() const {
    if (sizes.empty()) throw Error("scan.N: empty list");
    for (int n : sizes)
      if (n < 2 || n > 20) throw Error("scan.N: sizes must lie in [2, 20]");
    for (double hz : fields)
      if (hz < 0) throw Error("scan.h_z: fields must be nonnegative");
    for (const auto& i : initializers)
      if (i != "mps" && i != "neel") throw Error("scan.initializers: unknown initializer " + i);
    for (const auto& b : backends)
      if (b != "trotter" && b != "exact") throw Error("scan.backends: unknown backend " + b);
    if (eps <= 0 || eps >= 1) throw Error("scan.epsilon: must lie in (0, 1)");
    if (m0 <= 0 || m0 >= 1) throw Error("scan.m0: must lie in (0, 1)");
  }

  Index chi_for(int n) const { return chi_rule_n ? Index(n) : chi_fixed; }

  static void validate_key(const std::string& key) {
    static const std::vector<std::string> known = {
        "scan.N",      "scan.h_z",  "scan.initializers", "scan.backends",
        "scan.chi",    "scan.epsilon", "scan.m0",        "scan.L_max",
        "scan.tail",   "scan.seed", "scan.outdir",       "dmrg.e_tol",
        "dmrg.sweep_cap", "pite.dtau_min_fraction", "encoder.rank_threshold"};
    for (const auto& k : known)
      if (key == k) return;
    if (key.rfind("tail.window.", 0) == 0) return;
    throw Error("config: unknown key '" + key + "'");
  }
};

struct PointKey {
  int n = 0;
  double hz = 0.0;

  std::string str() const { return "N" + std::to_string(n) + "_hz" + fmt_double(hz); }
  bool operator<(const PointKey& o) const { return std::tie(n, hz) < std::tie(o.n, o.hz); }
};

inline fs::path point_dir(const ScanConfig& cfg, const PointKey& key) {
  return cfg.outdir / "points" / key.str();
}

// ---------------------------------------------------------------------------
// stage drivers; each writes its artifact files into the point directory

inline Json fit_to_json(const LogisticFit& fit) {
  return Json{{"r0", fit.r0},
              {"gamma", fit.gamma},
              {"residual_norm", fit.residual_norm},
              {"converged", fit.converged}};
}

inline fs::path dmrg_json_path(const ScanConfig& cfg, const PointKey& key) {
  return point_dir(cfg, key) / "dmrg.json";
}

inline void run_point_dmrg(const ScanConfig& cfg, const PointKey& key) {
  const HamiltonianSpec spec{key.n, 1.0, key.hz};
  DmrgOptions opts;
  opts.e_tol = cfg.dmrg_e_tol;
  opts.sweep_cap = cfg.dmrg_sweep_cap;
  opts.seed = cfg.seed;
  const DmrgResult dmrg = dmrg_ground(build_mpo(spec), cfg.chi_for(key.n), opts);
  const ReferenceSpectrum ref = reference_spectrum(spec, 1e-12);

  const fs::path dir = point_dir(cfg, key);
  save_mps(dir / "mps.txt", dmrg.state, opts.seed);

  Json j;
  j["tool_version"] = kToolVersion;
  j["bit_convention"] = kBitConvention;
  j["N"] = key.n;
  j["h_z"] = key.hz;
  j["chi"] = static_cast<long>(cfg.chi_for(key.n));
  j["seed"] = cfg.seed;
  j["e0_dmrg"] = dmrg.energy;
  j["sweeps"] = dmrg.sweeps_run;
  j["converged"] = dmrg.converged;
  j["energy_increased_flag"] = dmrg.energy_increased;
  j["sweep_energies"] = dmrg.sweep_energies;
  // exact reference (Lanczos); the excited energy feeds the schedule's gap,
  // a substitution recorded here for every downstream report
  j["e0_exact"] = ref.e0;
  j["e1_exact"] = ref.e1;
  j["gap"] = ref.gap;
  j["gap_source"] = "lanczos";
  j["degenerate_ground"] = ref.degenerate;
  write_file(dir / "dmrg.json", j.dump(2) + "\n");
}

struct EncodeOutputs {
  LstarResult lstar;
  int l_used = 0;
  int l_stop = 0;  // encoder stopping layer for the initializer
};

inline void write_encode_csv(const fs::path& path, const EncodingDiagnostics& diag) {
  CsvWriter csv({"l", "chi_cut", "chi_cut_1e8", "chi_cut_1e12", "chi_ratio", "F", "IF_per_site",
                 "discarded_weight"});
  for (const auto& r : diag.records) {
    csv.row({std::to_string(r.layer), std::to_string(r.chi_cut),
             std::to_string(r.chi_cut_loose), std::to_string(r.chi_cut_tight),
             fmt_double(r.chi_ratio), fmt_double(r.fidelity), fmt_double(r.if_per_site),
             fmt_double(r.discarded_weight)});
  }
  write_file(path, csv.text());
}

inline EncodeOutputs run_point_encode(const ScanConfig& cfg, const PointKey& key) {
  const fs::path dir = point_dir(cfg, key);
  const Mps dmrg_state = load_mps(dir / "mps.txt");
  const HamiltonianSpec spec{key.n, 1.0, key.hz};
  const ReferenceSpectrum ref = reference_spectrum(spec, 1e-12);
  const StateVector psi0 = dmrg_state.to_statevector();

  DisentanglerOptions opts;
  opts.rank_threshold = cfg.rank_threshold;

  // first pass: enough layers to resolve the rank growth and fix L*
  int l_max = cfg.l_max_auto ? 4 * key.n : cfg.l_max_fixed;
  if (cfg.tail) {
    const auto it = cfg.tail_windows.find(key.n);
    if (it != cfg.tail_windows.end()) l_max = std::max(l_max, it->second.second);
  }
  DisentanglerResult result = run_disentangler(psi0, l_max, ref.ground_multiplet, opts);
  LstarResult lstar;
  std::string lstar_error;
  bool have_lstar = true;
  try {
    lstar = find_lstar(result.diagnostics);
  } catch (const Error& e) {
    // rank data saturated or otherwise degenerate: fall back to the
    // nonparametric crossing
    have_lstar = false;
    lstar_error = e.what();
    for (const auto& r : result.diagnostics.records) {
      if (2 * r.chi_cut >= result.diagnostics.chi_max) {
        lstar.l_star_nonparametric = r.layer;
        lstar.crossing_found = true;
        break;
      }
    }
    lstar.l_star = lstar.l_star_nonparametric;
  }

  EncodeOutputs out;
  out.lstar = lstar;
  // default rule: stop resolving once the logistic and the early tail are
  // covered, unless a tail window or an explicit L_max asks for more
  int l_used = l_max;
  if (cfg.l_max_auto && !cfg.tail && lstar.crossing_found) {
    l_used = std::min(l_max, std::max(3 * std::max(lstar.l_star_nonparametric, 1), 8));
  }
  out.l_used = l_used;
  result.layers.resize(l_used);
  result.diagnostics.records.resize(l_used + 1);

  out.l_stop = std::clamp(static_cast<int>(std::lround(lstar.l_star)), 1, l_used);

  write_encode_csv(dir / "encode.csv", result.diagnostics);
  save_layers(dir / "layers.txt", result.layers);

  // rank-floor sensitivity of the logistic fit
  Json sensitivity = Json::array();
  for (const auto& [label, pick] :
       std::vector<std::pair<std::string, int>>{{"1e-8", 0}, {"1e-10", 1}, {"1e-12", 2}}) {
    EncodingDiagnostics alt = result.diagnostics;
    for (auto& r : alt.records) {
      const Index rank = pick == 0 ? r.chi_cut_loose : (pick == 1 ? r.chi_cut : r.chi_cut_tight);
      r.chi_ratio = static_cast<double>(rank) / static_cast<double>(alt.chi_max);
    }
    Json entry;
    entry["threshold"] = label;
    try {
      const LstarResult alt_fit = find_lstar(alt);
      entry["l_star"] = alt_fit.l_star;
      entry["gamma"] = alt_fit.fit.gamma;
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    sensitivity.push_back(entry);
  }

  Json j;
  j["tool_version"] = kToolVersion;
  j["N"] = key.n;
  j["h_z"] = key.hz;
  j["rank_threshold"] = cfg.rank_threshold;
  j["chi_max"] = static_cast<long>(result.diagnostics.chi_max);
  j["l_used"] = l_used;
  j["l_stop"] = out.l_stop;
  j["l_star"] = lstar.l_star;
  j["l_star_nonparametric"] = lstar.l_star_nonparametric;
  j["crossing_found"] = lstar.crossing_found;
  j["fit_window_hi"] = lstar.fit_window_hi;
  if (have_lstar) {
    j["logistic"] = fit_to_json(lstar.fit);
  } else {
    j["logistic_error"] = lstar_error;
  }
  j["if_per_site_at_l_stop"] = result.diagnostics.records[out.l_stop].if_per_site;
  j["rank_floor_sensitivity"] = sensitivity;
  write_file(dir / "encode.json", j.dump(2) + "\n");

  // tail fit over the configured window when the data covers it
  const auto it = cfg.tail_windows.find(key.n);
  if (it != cfg.tail_windows.end() && l_used >= it->second.second) {
    std::vector<double> l, y;
    for (const auto& r : result.diagnostics.records) {
      l.push_back(r.layer);
      y.push_back(r.if_per_site);
    }
    Json tj;
    tj["window_lo"] = it->second.first;
    tj["window_hi"] = it->second.second;
    try {
      const TailFit tail = fit_tail(l, y, it->second.first, it->second.second);
      tj["C"] = tail.c;
      tj["A"] = tail.a;
      tj["k"] = tail.k;
      tj["residual_norm"] = tail.residual_norm;
      tj["active_constraints"] = tail.active_constraints;
      if (tail.k > 0) {
        const DeltaLPrediction pred = predict_delta_l(tail, key.n, cfg.eps);
        tj["delta_l_to_target"] = pred.reachable ? Json(pred.layers) : Json("unreachable");
      }
    } catch (const Error& e) {
      tj["error"] = e.what();
    }
    write_file(dir / "tail.json", tj.dump(2) + "\n");
  }
  return out;
}

inline fs::path pite_base(const ScanConfig& cfg, const PointKey& key, const std::string& init,
                          const std::string& backend) {
  return point_dir(cfg, key) / ("pite_" + init + "_" + backend);
}

inline void run_point_pite(const ScanConfig& cfg, const PointKey& key, const std::string& init,
                           const std::string& backend) {
  const fs::path dir = point_dir(cfg, key);
  const Json dmrg_meta = Json::parse(read_file(dir / "dmrg.json"));
  const HamiltonianSpec spec{key.n, 1.0, key.hz};
  const auto h = build_hamiltonian(spec);
  const TermSplit split = split_terms(spec);
  const ReferenceSpectrum ref = reference_spectrum(spec, 1e-12);
  const Mps dmrg_state = load_mps(dir / "mps.txt");
  const StateVector dmrg_vec = dmrg_state.to_statevector();

  StateVector psi_init;
  int l_stop = 0;
  if (init == "neel") {
    psi_init = neel_state(key.n);
  } else if (init == "mps") {
    const Json encode_meta = Json::parse(read_file(dir / "encode.json"));
    l_stop = encode_meta.at("l_stop").get<int>();
    const std::vector<MpdLayer> layers = load_layers(dir / "layers.txt");
    psi_init = encode_state(layers, l_stop);
  } else {
    throw Error("run_point_pite: unknown initializer " + init);
  }

  // reference ground-state weight against the DMRG state, not the exact one
  const double w0_ref = fidelity(dmrg_vec, psi_init);

  ScheduleOptions sopts;
  sopts.m0 = cfg.m0;
  sopts.dtau_min_fraction = cfg.dtau_min_fraction;
  Schedule sch = make_schedule(dmrg_meta.at("e0_dmrg").get<double>(),
                               dmrg_meta.at("gap").get<double>(), w0_ref, cfg.eps, sopts);

  TrajectoryOptions topts;
  topts.backend = backend == "exact" ? PiteBackend::exact : PiteBackend::trotter;
  Trajectory traj = run_trajectory(psi_init, sch, h, split, ref, topts);
  traj.initializer = init;

  const fs::path base = pite_base(cfg, key, init, backend);
  CsvWriter csv({"k", "dtau", "r_k", "p_k", "P_cum", "IF", "dE", "d_k", "depth_cum"});
  for (const auto& r : traj.records) {
    csv.row({std::to_string(r.step), fmt_double(r.dtau), std::to_string(r.reps),
             fmt_double(r.p), fmt_double(r.p_cum), fmt_double(r.infidelity),
             fmt_double(r.energy_error), std::to_string(r.depth),
             std::to_string(r.depth_cum)});
  }
  write_file(fs::path(base.string() + ".csv"), csv.text());

  const CrossingMetrics cm = crossing_metrics(traj, kChemicalAccuracy);
  Json j;
  j["tool_version"] = kToolVersion;
  j["N"] = key.n;
  j["h_z"] = key.hz;
  j["initializer"] = init;
  j["backend"] = backend;
  j["l_stop"] = l_stop;
  j["w0_ref"] = w0_ref;
  j["depth_convention"] = "D1";
  j["chemical_accuracy"] = kChemicalAccuracy;
  Json sj;
  sj["m0"] = sch.m0;
  sj["s"] = sch.s;
  sj["e_shift"] = sch.e_shift;
  sj["delta_eff"] = sch.delta_eff;
  sj["delta_eff_source"] = "lanczos";
  sj["eps"] = sch.eps;
  sj["eps_alg"] = sch.eps_alg;
  sj["eps_trot"] = sch.eps_trot;
  sj["eps_tilde"] = sch.eps_tilde;
  sj["k_safe"] = sch.k_safe;
  sj["k_safe_clamped"] = sch.k_safe_clamped;
  sj["dtau_min"] = sch.dtau_min;
  sj["dtau_max"] = sch.dtau_max;
  sj["dtau"] = sch.dtau;
  sj["trot_budget"] = sch.trot_budget;
  sj["reps"] = sch.reps;
  j["schedule"] = sj;
  bool cap_hit = false;
  for (const auto& r : traj.records) cap_hit |= r.rep_cap_hit;
  j["rep_cap_hit"] = cap_hit;
  j["reached_target"] = cm.reached;
  j["k_chem"] = cm.k_chem;
  j["d_raw"] = cm.d_raw;
  j["d_post"] = cm.d_post;
  j["p_cum_at_target"] = cm.p_cum;
  j["final_energy_error"] = cm.final_energy_error;
  j["final_depth"] = cm.final_depth;
  write_file(fs::path(base.string() + ".json"), j.dump(2) + "\n");
}

/// Run all three stages for one point and record a completion marker with
/// file checksums (used to skip finished points on resume).
inline void run_point(const ScanConfig& cfg, const PointKey& key) {
  run_point_dmrg(cfg, key);
  run_point_encode(cfg, key);
  for (const auto& init : cfg.initializers)
    for (const auto& backend : cfg.backends) run_point_pite(cfg, key, init, backend);

  const fs::path dir = point_dir(cfg, key);
  Json files = Json::object();
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename() == "point.json") continue;
    files[entry.path().filename().string()] = checksum_file(entry.path());
  }
  Json marker;
  marker["status"] = "complete";
  marker["files"] = files;
  write_file(dir / "point.json", marker.dump(2) + "\n");
}

inline bool point_complete(const ScanConfig& cfg, const PointKey& key) {
  const fs::path marker_path = point_dir(cfg, key) / "point.json";
  if (!fs::exists(marker_path)) return false;
  try {
    const Json marker = Json::parse(read_file(marker_path));
    if (marker.at("status") != "complete") return false;
    for (const auto& [name, sum] : marker.at("files").items()) {
      const fs::path p = point_dir(cfg, key) / name;
      if (!fs::exists(p) || checksum_file(p) != sum.get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// aggregation and reporting

struct PointStatus {
  PointKey key;
  bool ok = false;
  bool skipped = false;  // already complete before this run
  std::string error;
};

inline void aggregate_scan(const ScanConfig& cfg);

/// Run every (N, h_z) point, in a small worker pool when GSPREP_WORKERS > 1,
/// then aggregate. Points that already completed (checksum-verified) are
/// skipped; per-point failures are recorded and aggregation proceeds on the
/// survivors.
inline std::vector<PointStatus> run_scan(const ScanConfig& cfg) {
  std::vector<PointKey> keys;
  for (int n : cfg.sizes)
    for (double hz : cfg.fields) keys.push_back({n, hz});
  std::sort(keys.begin(), keys.end());

  std::vector<PointStatus> status(keys.size());
  int workers = 1;
  if (const char* env = std::getenv("GSPREP_WORKERS")) workers = std::max(1, std::atoi(env));
  workers = std::min<int>(workers, static_cast<int>(keys.size()));

  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= keys.size()) break;
      status[i].key = keys[i];
      try {
        if (point_complete(cfg, keys[i])) {
          status[i].ok = true;
          status[i].skipped = true;
          continue;
        }
        run_point(cfg, keys[i]);
        status[i].ok = true;
      } catch (const std::exception& e) {
        status[i].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // manifest: config snapshot, decided defaults, per-point status, inventory
  Json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["config"] = Json(cfg.to_config().values());
  manifest["conventions"] = Json{{"bit_convention", kBitConvention},
                                 {"depth_convention", "D1"},
                                 {"chemical_accuracy", kChemicalAccuracy},
                                 {"max_trotter_reps", kMaxTrotterReps},
                                 {"rank_threshold_default", 1e-10},
                                 {"gap_source", "lanczos"}};
  Json points = Json::object();
  for (const auto& st : status) {
    Json p;
    p["ok"] = st.ok;
    p["skipped"] = st.skipped;
    if (!st.error.empty()) p["error"] = st.error;
    points[st.key.str()] = p;
  }
  manifest["points"] = points;
  Json inventory = Json::object();
  for (const auto& st : status) {
    if (!st.ok) continue;
    const fs::path dir = point_dir(cfg, st.key);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    Json inv = Json::object();
    for (const auto& f : files) inv[f.filename().string()] = checksum_file(f);
    inventory[st.key.str()] = inv;
  }
  manifest["inventory"] = inventory;
  write_file(cfg.outdir / "manifest.json", manifest.dump(2) + "\n");

  aggregate_scan(cfg);
  return status;
}

inline void aggregate_scan(const ScanConfig& cfg) {
  const fs::path agg = cfg.outdir / "aggregate";
  fs::create_directories(agg);

  // L* and IF(L*)/N versus N, per field
  CsvWriter lstar_csv({"N", "h_z", "l_star", "l_star_np", "r0", "gamma", "if_at_l_stop"});
  CsvWriter resource_csv({"N", "h_z", "initializer", "backend", "reached", "D_raw", "D_post",
                          "P_cum", "K_chem", "w0_ref", "k_safe"});
  CsvWriter tail_csv({"N", "h_z", "C", "A", "k", "window_lo", "window_hi"});

  for (int n : cfg.sizes) {
    for (double hz : cfg.fields) {
      const PointKey key{n, hz};
      const fs::path dir = point_dir(cfg, key);
      if (!fs::exists(dir / "encode.json")) continue;
      const Json enc = Json::parse(read_file(dir / "encode.json"));
      if (enc.contains("logistic")) {
        lstar_csv.row({std::to_string(n), fmt_double(hz),
                       fmt_double(enc.at("l_star").get<double>()),
                       std::to_string(enc.at("l_star_nonparametric").get<int>()),
                       fmt_double(enc.at("logistic").at("r0").get<double>()),
                       fmt_double(enc.at("logistic").at("gamma").get<double>()),
                       fmt_double(enc.at("if_per_site_at_l_stop").get<double>())});
      }
      if (fs::exists(dir / "tail.json")) {
        const Json tj = Json::parse(read_file(dir / "tail.json"));
        if (tj.contains("k")) {
          tail_csv.row({std::to_string(n), fmt_double(hz), fmt_double(tj.at("C").get<double>()),
                        fmt_double(tj.at("A").get<double>()),
                        fmt_double(tj.at("k").get<double>()),
                        std::to_string(tj.at("window_lo").get<int>()),
                        std::to_string(tj.at("window_hi").get<int>())});
        }
      }
      for (const auto& init : cfg.initializers) {
        for (const auto& backend : cfg.backends) {
          const fs::path base = pite_base(cfg, key, init, backend);
          const fs::path jpath = fs::path(base.string() + ".json");
          if (!fs::exists(jpath)) continue;
          const Json pj = Json::parse(read_file(jpath));
          resource_csv.row({std::to_string(n), fmt_double(hz), init, backend,
                            pj.at("reached_target").get<bool>() ? "1" : "0",
                            fmt_double(pj.at("d_raw").get<double>()),
                            fmt_double(pj.at("d_post").get<double>()),
                            fmt_double(pj.at("p_cum_at_target").get<double>()),
                            fmt_double(pj.at("k_chem").get<double>()),
                            fmt_double(pj.at("w0_ref").get<double>()),
                            std::to_string(pj.at("schedule").at("k_safe").get<int>())});
        }
      }
    }
  }
  write_file(agg / "lstar_vs_N.csv", lstar_csv.text());
  write_file(agg / "resources.csv", resource_csv.text());
  write_file(agg / "tailfits.csv", tail_csv.text());

  // power-law fits of the raw depth per (h_z, initializer), Table-style
  Json powerlaws = Json::array();
  const CsvTable res = CsvTable::load(agg / "resources.csv");
  for (double hz : cfg.fields) {
    for (const auto& init : cfg.initializers) {
      std::vector<double> ns, ds;
      for (const auto& row : res.rows) {
        if (std::stod(row[res.column("h_z")]) != hz) continue;
        if (row[res.column("initializer")] != init) continue;
        if (row[res.column("backend")] != "trotter" && cfg.backends.size() > 1) continue;
        if (row[res.column("reached")] != "1") continue;
        ns.push_back(std::stod(row[res.column("N")]));
        ds.push_back(std::stod(row[res.column("D_raw")]));
      }
      Json entry;
      entry["h_z"] = hz;
      entry["initializer"] = init;
      entry["points"] = ns.size();
      if (ns.size() >= 3) {
        const PowerLawFit fit = fit_powerlaw(ns, ds);
        entry["alpha"] = fit.alpha;
        entry["beta"] = fit.beta;
        entry["beta_stderr"] = fit.stderr_defined ? Json(fit.beta_stderr) : Json();
        entry["r2_log"] = fit.r2_log;
      } else {
        entry["error"] = "fewer than 3 points";
      }
      powerlaws.push_back(entry);
    }
  }
  write_file(agg / "powerlaw.json", powerlaws.dump(2) + "\n");
}

/// Four-row scaling summary with the reference exponents {1, 5, 3, 3/2}
/// printed beside the measured values. Empty trees produce a valid report
/// with a warning.
inline Json write_report(const fs::path& outdir) {
  const fs::path agg = outdir / "aggregate";
  Json report;
  report["tool_version"] = kToolVersion;
  Json rows = Json::array();
  std::vector<std::string> warnings;

  // encoder-to-L*: slope of the linear fit of L*(N), reference exponent 1
  if (fs::exists(agg / "lstar_vs_N.csv")) {
    const CsvTable t = CsvTable::load(agg / "lstar_vs_N.csv");
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_field;
    for (const auto& row : t.rows) {
      const double hz = std::stod(row[t.column("h_z")]);
      by_field[hz].first.push_back(std::stod(row[t.column("N")]));
      by_field[hz].second.push_back(std::stod(row[t.column("l_star")]));
    }
    for (const auto& [hz, data] : by_field) {
      const auto& [ns, ls] = data;
      if (ns.size() < 2) continue;
      double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
      const int m = static_cast<int>(ns.size());
      for (int i = 0; i < m; ++i) {
        sx += ns[i];
        sy += ls[i];
        sxx += ns[i] * ns[i];
        sxy += ns[i] * ls[i];
        syy += ls[i] * ls[i];
      }
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      const double intercept = (sy - slope * sx) / m;
      double rss = 0, tss = 0;
      for (int i = 0; i < m; ++i) {
        rss += std::pow(ls[i] - intercept - slope * ns[i], 2);
        tss += std::pow(ls[i] - sy / m, 2);
      }
      Json row;
      row["target"] = "encoder layers to the rank inflection point";
      row["h_z"] = hz;
      row["measured"] = Json{{"kind", "linear slope of L*(N)"},
                             {"slope", slope},
                             {"intercept", intercept},
                             {"r2", tss > 0 ? 1.0 - rss / tss : 1.0}};
      row["reference_exponent"] = 1.0;  // depth linear in N
      rows.push_back(row);
    }
  } else {
    warnings.push_back("no L* table found");
  }

  // encoder tail: log-log slope of k(N), reference exponent 5 (as N^-5)
  if (fs::exists(agg / "tailfits.csv")) {
    const CsvTable t = CsvTable::load(agg / "tailfits.csv");
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_field;
    for (const auto& row : t.rows) {
      const double k = std::stod(row[t.column("k")]);
      if (k <= 0) continue;
      const double hz = std::stod(row[t.column("h_z")]);
      by_field[hz].first.push_back(std::stod(row[t.column("N")]));
      by_field[hz].second.push_back(k);
    }
    for (const auto& [hz, data] : by_field) {
      if (data.first.size() < 2) continue;
      const PowerLawFit fit = fit_powerlaw(data.first, data.second);
      Json row;
      row["target"] = "encoder tail decay rate k(N)";
      row["h_z"] = hz;
      row["measured"] = Json{{"kind", "log-log slope of k(N)"}, {"slope", fit.beta}};
      row["reference_exponent"] = -5.0;
      rows.push_back(row);
    }
  }

  // filter-stage depth exponents, reference 3 (gapless) and 3/2 (gapped)
  if (fs::exists(agg / "powerlaw.json")) {
    const Json pl = Json::parse(read_file(agg / "powerlaw.json"));
    for (const auto& entry : pl) {
      if (!entry.contains("beta")) continue;
      Json row;
      const double hz = entry.at("h_z").get<double>();
      row["target"] = std::string("filter-stage raw depth, ") +
                      (hz == 0.0 ? "gapless chain" : "gapped chain");
      row["h_z"] = hz;
      row["initializer"] = entry.at("initializer");
      row["measured"] = Json{{"kind", "power-law exponent of D_raw(N)"},
                             {"beta", entry.at("beta")},
                             {"alpha", entry.at("alpha")},
                             {"r2_log", entry.at("r2_log")}};
      row["reference_exponent"] = hz == 0.0 ? 3.0 : 1.5;
      rows.push_back(row);
    }
  }

  if (rows.empty()) warnings.push_back("empty result tree: nothing to report");
  report["rows"] = rows;
  report["warnings"] = warnings;
  write_file(agg / "report.json", report.dump(2) + "\n");

  // plain-text rendering
  std::string text = "scaling summary (measured vs reference exponent)\n";
  for (const auto& row : rows) {
    text += "- " + row.at("target").get<std::string>() + " @ h_z=" +
            fmt_double(row.at("h_z").get<double>());
    if (row.contains("initializer"))
      text += " init=" + row.at("initializer").get<std::string>();
    const Json& m = row.at("measured");
    if (m.contains("slope")) text += ": measured " + fmt_double(m.at("slope").get<double>());
    if (m.contains("beta")) text += ": measured " + fmt_double(m.at("beta").get<double>());
    text += " (reference " + fmt_double(row.at("reference_exponent").get<double>()) + ")\n";
  }
  for (const auto& w : warnings) text += "warning: " + w + "\n";
  write_file(agg / "report.txt", text);
  return report;
}

}  // namespace gsprep
