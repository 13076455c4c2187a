// Command-line driver for the ground-state preparation pipeline: variational
// tensor-network stage, staircase encoding stage, probabilistic filter stage,
// full scans, standalone curve fits, and report generation.

#include "gsprep/scan.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitPointFailure = 3;
constexpr int kExitInternalError = 4;

gsprep::ScanConfig load_scan_config(const std::string& path, const std::string& outdir) {
  gsprep::Config cfg =
      path.empty() ? gsprep::Config() : gsprep::Config::load(path);
  gsprep::ScanConfig sc = gsprep::ScanConfig::from_config(cfg);
  if (!outdir.empty()) sc.outdir = outdir;
  return sc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gsprep: DMRG + staircase-encoder + probabilistic-filter toolkit"};
  app.require_subcommand(1);

  std::string config_path, outdir;
  int point_n = 0;
  double point_hz = 0.0;
  bool have_point_n = false, have_point_hz = false;
  std::string init = "mps", backend = "trotter";

  auto add_common = [&](CLI::App* cmd, bool with_point) {
    cmd->add_option("--config", config_path, "configuration file (key = value lines)");
    cmd->add_option("--outdir", outdir, "output directory (overrides the config)");
    if (with_point) {
      cmd->add_option("--n", point_n, "chain length of the point")
          ->each([&](const std::string&) { have_point_n = true; });
      cmd->add_option("--hz", point_hz, "staggered field of the point")
          ->each([&](const std::string&) { have_point_hz = true; });
    }
  };

  auto* cmd_dmrg = app.add_subcommand("dmrg", "run the ground-state stage for points");
  add_common(cmd_dmrg, true);
  auto* cmd_encode = app.add_subcommand("encode", "build the encoding layers for points");
  add_common(cmd_encode, true);
  auto* cmd_pite = app.add_subcommand("pite", "run the filter refinement for points");
  add_common(cmd_pite, true);
  cmd_pite->add_option("--init", init, "initializer: mps or neel");
  cmd_pite->add_option("--backend", backend, "filter backend: trotter or exact");
  auto* cmd_scan = app.add_subcommand("scan", "run every configured point and aggregate");
  add_common(cmd_scan, false);
  auto* cmd_report = app.add_subcommand("report", "regenerate the summary report");
  add_common(cmd_report, false);

  auto* cmd_fit = app.add_subcommand("fit", "fit a curve to columns of a CSV file");
  std::string fit_kind = "logistic", fit_input, fit_x = "l", fit_y, fit_out;
  double fit_lo = 0.0, fit_hi = 0.0;
  cmd_fit->add_option("--kind", fit_kind, "logistic | tail | powerlaw")->required();
  cmd_fit->add_option("--input", fit_input, "CSV file")->required();
  cmd_fit->add_option("--xcol", fit_x, "abscissa column");
  cmd_fit->add_option("--ycol", fit_y, "ordinate column")->required();
  cmd_fit->add_option("--lo", fit_lo, "window lower edge (tail fits)");
  cmd_fit->add_option("--hi", fit_hi, "window upper edge (tail fits)");
  cmd_fit->add_option("--out", fit_out, "write the JSON result here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace gsprep;

    if (cmd_fit->parsed()) {
      const CsvTable table = CsvTable::load(fit_input);
      const std::vector<double> x = table.numeric(fit_x);
      const std::vector<double> y = table.numeric(fit_y);
      Json out;
      if (fit_kind == "logistic") {
        const LogisticFit fit = fit_logistic(x, y);
        out = {{"kind", "logistic"},       {"r0", fit.r0},
               {"gamma", fit.gamma},       {"inflection", fit.inflection()},
               {"residual_norm", fit.residual_norm}, {"converged", fit.converged}};
      } else if (fit_kind == "tail") {
        if (fit_hi <= fit_lo) throw Error("fit: tail fits need --lo and --hi");
        const TailFit fit = fit_tail(x, y, fit_lo, fit_hi);
        out = {{"kind", "tail"},
               {"C", fit.c},
               {"A", fit.a},
               {"k", fit.k},
               {"window", {fit.lo, fit.hi}},
               {"residual_norm", fit.residual_norm},
               {"active_constraints", fit.active_constraints}};
      } else if (fit_kind == "powerlaw") {
        const PowerLawFit fit = fit_powerlaw(x, y);
        out = {{"kind", "powerlaw"},
               {"alpha", fit.alpha},
               {"beta", fit.beta},
               {"beta_stderr", fit.stderr_defined ? Json(fit.beta_stderr) : Json()},
               {"r2_log", fit.r2_log}};
      } else {
        throw Error("fit: unknown kind " + fit_kind);
      }
      out["tool_version"] = kToolVersion;
      if (fit_out.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        write_file(fit_out, out.dump(2) + "\n");
      }
      return kExitOk;
    }

    if (cmd_report->parsed()) {
      ScanConfig sc;
      try {
        sc = load_scan_config(config_path, outdir);
      } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
      }
      write_report(sc.outdir);
      std::cout << read_file(sc.outdir / "aggregate" / "report.txt");
      return kExitOk;
    }

    ScanConfig sc;
    try {
      sc = load_scan_config(config_path, outdir);
    } catch (const Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfigError;
    }

    if (cmd_scan->parsed()) {
      const std::vector<PointStatus> status = run_scan(sc);
      write_report(sc.outdir);
      bool any_failed = false;
      for (const auto& st : status) {
        std::printf("%-12s %s%s\n", st.key.str().c_str(), st.ok ? "ok" : "failed",
                    st.skipped ? " (cached)" : "");
        if (!st.ok) {
          std::fprintf(stderr, "  %s\n", st.error.c_str());
          any_failed = true;
        }
      }
      return any_failed ? kExitPointFailure : kExitOk;
    }

    // stage commands: selected point or every configured point
    std::vector<PointKey> keys;
    if (have_point_n || have_point_hz) {
      if (!have_point_n || !have_point_hz)
        throw Error("stage commands need both --n and --hz (or neither)");
      keys.push_back({point_n, point_hz});
    } else {
      for (int n : sc.sizes)
        for (double hz : sc.fields) keys.push_back({n, hz});
    }

    bool any_failed = false;
    for (const PointKey& key : keys) {
      try {
        if (cmd_dmrg->parsed()) {
          run_point_dmrg(sc, key);
        } else if (cmd_encode->parsed()) {
          run_point_encode(sc, key);
        } else if (cmd_pite->parsed()) {
          run_point_pite(sc, key, init, backend);
        }
        std::printf("%-12s ok\n", key.str().c_str());
      } catch (const std::exception& e) {
        std::fprintf(stderr, "%-12s failed: %s\n", key.str().c_str(), e.what());
        any_failed = true;
      }
    }
    return any_failed ? kExitPointFailure : kExitOk;
  } catch (const gsprep::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternalError;
  }
}
