// Command-line front end: run experiment configs, re-analyze recorded traces,
// compare runs, and emit plot-ready columns.
//
// Exit codes: 0 success, 1 configuration/parse/IO error, 2 divergence.

#include <hotuner/harness.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

fs::path resolve_out_dir(const std::string& flag_value,
                         const hotuner::harness::ExperimentConfig& config) {
  if (!flag_value.empty()) return flag_value;
  if (!config.output.directory.empty()) return config.output.directory;
  if (const char* env = std::getenv("HOTUNER_OUT")) {
    return fs::path(env) / config.name;
  }
  return fs::path("runs") / config.name;
}

int do_run(const std::string& config_path, const std::string& out_flag) {
  namespace hh = hotuner::harness;
  const hh::ExperimentConfig config = hh::load_config(config_path);
  const fs::path out_dir = resolve_out_dir(out_flag, config);

  const hh::RunArtifact art = hh::run_experiment(config);

  std::cout << "run " << config.name << ": horizon " << config.horizon << ", "
            << art.results.size() << " algorithm(s)\n";
  if (art.pe) {
    std::cout << "  excitation over delta_t=" << art.pe->delta_t
              << ": epsilon=" << num(art.pe->epsilon)
              << ", normalized=" << num(art.pe->epsilon_norm) << '\n';
  }
  for (const hh::AlgorithmRunResult& res : art.results) {
    for (const auto& v : res.violations) {
      std::cout << "  note: " << res.algo.label << ": '" << v.constraint
                << "' not satisfied (bound " << num(v.bound) << ", actual "
                << num(v.actual) << ")\n";
    }
    const hh::TraceRecord& last = res.trace.back();
    std::cout << "  " << res.algo.label << ": final |e_y|="
              << num(std::abs(last.e_y)) << ", param_err=" << num(last.param_err);
    if (res.rate) std::cout << ", mu=" << num(res.rate->mu);
    if (res.envelope) {
      if (res.envelope->holds) {
        std::cout << ", envelope holds";
      } else {
        std::cout << ", envelope violated at k="
                  << *res.envelope->first_violation_k;
      }
    }
    if (!res.note.empty()) std::cout << " (" << res.note << ")";
    std::cout << '\n';
  }
  for (const fs::path& p : hh::write_run(art, out_dir)) {
    std::cout << "wrote " << p.string() << '\n';
  }
  return 0;
}

int do_analyze(const std::string& trace_path, std::vector<long> delta_ts,
               double tolerance_flag, bool tolerance_set) {
  namespace hh = hotuner::harness;
  if (delta_ts.empty()) delta_ts.push_back(20);

  // The trace alone does not identify the regressor source, so the sibling
  // report.json from the run directory supplies the experiment description.
  const fs::path tp = trace_path;
  const hh::RunArtifact art = hh::load_run(tp.parent_path());
  const std::string fname = tp.filename().string();

  const hh::AlgorithmRunResult* selected = nullptr;
  for (const hh::AlgorithmRunResult& res : art.results) {
    if (res.algo.label + ".csv" == fname) {
      selected = &res;
      break;
    }
  }
  if (!selected) {
    throw hotuner::ConfigError(trace_path +
                               ": no algorithm in report.json owns this trace file");
  }

  const auto samples = hotuner::regress::regressor_stream(
      art.config.source, art.theta_star, art.config.horizon);
  const bool has_v = selected->algo.hp.algorithm == hotuner::tuners::Algorithm::kHB ||
                     selected->algo.hp.algorithm == hotuner::tuners::Algorithm::kNA;
  const double tolerance =
      tolerance_set ? tolerance_flag : art.config.analysis.tolerance;

  json out;
  out["trace"] = fname;
  out["algorithm"] = to_string(selected->algo.hp.algorithm);
  out["label"] = selected->algo.label;
  json analyses = json::array();
  for (long dt : delta_ts) {
    json entry;
    entry["delta_t"] = dt;
    const auto pe = hotuner::analysis::pe_epsilon(samples, dt);
    entry["pe"] = hh::pe_report_to_json(pe);
    entry["rate"] = nullptr;
    entry["envelope"] = nullptr;
    if (!has_v) {
      entry["note"] = "no Lyapunov trace for " + to_string(selected->algo.hp.algorithm) +
                      "; excitation only";
    } else if (pe.epsilon_norm > 1e-12) {  // same cut as run_experiment
      try {
        const auto rate =
            selected->algo.hp.algorithm == hotuner::tuners::Algorithm::kHB
                ? hotuner::analysis::rate_bound_hb(pe, selected->algo.hp.beta,
                                                   selected->algo.hp.gamma)
                : hotuner::analysis::rate_bound_na(pe, selected->algo.hp.beta,
                                                   selected->algo.hp.gamma, dt);
        entry["rate"] = hh::rate_report_to_json(rate);
        std::vector<double> v_trace;
        v_trace.reserve(selected->trace.size());
        for (const hh::TraceRecord& rec : selected->trace) {
          if (!rec.v) {
            throw hotuner::ConfigError(trace_path +
                                       ": trace is missing Lyapunov values");
          }
          v_trace.push_back(*rec.v);
        }
        entry["envelope"] = hh::envelope_report_to_json(
            hotuner::analysis::check_envelope(v_trace, rate.mu, dt, tolerance));
      } catch (const hotuner::NotPersistentlyExcitingError& e) {
        entry["note"] = std::string("decay certificate unavailable: ") + e.what();
      } catch (const hotuner::InvalidArgumentError& e) {
        entry["note"] = std::string("decay certificate unavailable: ") + e.what();
      }
    } else {
      entry["note"] = "regressor is not persistently exciting over delta_t=" +
                      std::to_string(dt) + "; decay certificate unavailable";
    }
    analyses.push_back(std::move(entry));
  }
  out["analyses"] = analyses;
  std::cout << out.dump(2) << '\n';
  return 0;
}

int do_compare(const std::vector<std::string>& run_dirs, double eps_e,
               double eps_theta, const std::string& out_dir) {
  namespace hh = hotuner::harness;
  std::vector<hh::RunArtifact> runs;
  runs.reserve(run_dirs.size());
  for (const std::string& dir : run_dirs) runs.push_back(hh::load_run(dir));

  const hh::CompareSummary summary = hh::compare(runs, eps_e, eps_theta);
  hh::write_compare_csv(std::cout, summary);

  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
      throw hotuner::InvalidArgumentError("cannot create output directory '" +
                                          out_dir + "': " + ec.message());
    }
    const fs::path csv_path = fs::path(out_dir) / "compare.csv";
    std::ofstream csv(csv_path);
    if (!csv) {
      throw hotuner::InvalidArgumentError("cannot open '" + csv_path.string() +
                                          "' for writing");
    }
    hh::write_compare_csv(csv, summary);
    const fs::path json_path = fs::path(out_dir) / "compare.json";
    std::ofstream js(json_path);
    if (!js) {
      throw hotuner::InvalidArgumentError("cannot open '" + json_path.string() +
                                          "' for writing");
    }
    js << hh::compare_to_json(summary).dump(2) << '\n';
    std::cerr << "wrote " << csv_path.string() << '\n'
              << "wrote " << json_path.string() << '\n';
  }
  return 0;
}

int do_plot(const std::string& trace_path, const std::string& quantity,
            const std::string& scale, const std::string& out_file) {
  namespace hh = hotuner::harness;
  const auto trace = hh::load_trace_csv(trace_path);
  if (trace.empty()) throw hotuner::ParseError(trace_path + ": no data rows");
  const hh::PlotQuantity q = hh::plot_quantity_from_string(quantity);
  const hh::PlotScale s = hh::plot_scale_from_string(scale);
  if (out_file.empty()) {
    hh::write_plot_columns(std::cout, trace, q, s);
  } else {
    std::ofstream out(out_file);
    if (!out) {
      throw hotuner::InvalidArgumentError("cannot open '" + out_file +
                                          "' for writing");
    }
    hh::write_plot_columns(out, trace, q, s);
    std::cout << "wrote " << out_file << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online parameter identification with high-order tuners"};
  app.require_subcommand(1);

  std::string run_config;
  std::string run_out;
  CLI::App* run = app.add_subcommand(
      "run", "execute an experiment config; write traces and report");
  run->add_option("--config", run_config, "experiment config (JSON)")
      ->required();
  run->add_option("--out", run_out,
                  "output directory (overrides the config and HOTUNER_OUT)");

  std::string an_trace;
  std::vector<long> an_delta_ts;
  double an_tolerance = 1e-9;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "recompute excitation/decay/envelope reports for a trace");
  analyze->add_option("--trace", an_trace, "trace CSV inside a run directory")
      ->required();
  analyze->add_option("--delta-t", an_delta_ts,
                      "excitation window length; repeat for a sensitivity sweep "
                      "(default 20)");
  CLI::Option* an_tol_opt =
      analyze->add_option("--tolerance", an_tolerance,
                          "envelope slack (default: the run's configured value)");

  std::vector<std::string> cmp_dirs;
  double cmp_eps_e = 1e-3;
  double cmp_eps_theta = 1e-3;
  std::string cmp_out;
  CLI::App* cmp = app.add_subcommand(
      "compare", "tabulate iterations-to-tolerance and final errors across runs");
  cmp->add_option("runs", cmp_dirs, "run directories (each holding report.json)")
      ->required()
      ->expected(-1);
  cmp->add_option("--eps-e", cmp_eps_e, "output-error tolerance (default 1e-3)");
  cmp->add_option("--eps-theta", cmp_eps_theta,
                  "parameter-error tolerance (default 1e-3)");
  cmp->add_option("--out", cmp_out, "also write compare.csv/compare.json here");

  std::string plot_trace;
  std::string plot_quantity;
  std::string plot_scale = "linear";
  std::string plot_out;
  CLI::App* plot =
      app.add_subcommand("plot", "emit two-column plot data from a trace");
  plot->add_option("--trace", plot_trace, "trace CSV")->required();
  plot->add_option("--quantity", plot_quantity, "e_y | param_err | v")->required();
  plot->add_option("--scale", plot_scale, "linear | log10-abs (default linear)");
  plot->add_option("--out", plot_out, "write to FILE instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return do_run(run_config, run_out);
    if (analyze->parsed()) {
      return do_analyze(an_trace, an_delta_ts, an_tolerance,
                        an_tol_opt->count() > 0);
    }
    if (cmp->parsed()) return do_compare(cmp_dirs, cmp_eps_e, cmp_eps_theta, cmp_out);
    if (plot->parsed()) return do_plot(plot_trace, plot_quantity, plot_scale, plot_out);
  } catch (const hotuner::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
