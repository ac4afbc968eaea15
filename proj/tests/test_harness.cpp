#include <hotuner/harness.hpp>

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hotuner;
using namespace hotuner::harness;
namespace fs = std::filesystem;

namespace {

ParameterVector vec(std::initializer_list<double> xs) {
  ParameterVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

bool exact_eq(const ParameterVector& a, const ParameterVector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

/// Scratch directory removed when the test case ends.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("hotuner_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

/// Constant regressor, three tuners, analysis off: fast and fully predictable.
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.name = "small";
  c.source.kind = regress::RegressorSource::Kind::kConstant;
  c.source.constant_phi = vec({1, -2, 1});
  c.theta_star = vec({20, -3, 1});
  c.horizon = 5;

  AlgorithmConfig ngd;
  ngd.hp.algorithm = tuners::Algorithm::kNGD;
  ngd.hp.alpha = 0.0469;
  ngd.label = "ngd";
  AlgorithmConfig hb;
  hb.hp.algorithm = tuners::Algorithm::kHB;
  hb.hp.beta = 0.5;
  hb.hp.gamma = 0.09;
  hb.label = "hb";
  AlgorithmConfig na;
  na.hp.algorithm = tuners::Algorithm::kNA;
  na.hp.beta = 0.5;
  na.hp.gamma = 0.09;
  na.label = "na";
  c.algorithms = {ngd, hb, na};
  return c;
}

/// Persistently exciting three-sinusoid source with analysis enabled, small
/// enough that the excitation search stays cheap.
ExperimentConfig bank_config() {
  ExperimentConfig c = small_config();
  c.name = "bank";
  c.source.kind = regress::RegressorSource::Kind::kSinusoidBank;
  c.source.constant_phi = ParameterVector();
  c.source.components = {{1.0, 0.0, 0.0, 0.0},
                         {0.0, 2.0, 1.0, 0.0},
                         {0.0, 2.0, 2.0, 0.0}};
  c.horizon = 60;
  c.analysis.enabled = true;
  c.analysis.delta_t = 20;
  c.analysis.tolerance = 1e-9;
  return c;
}

}  // namespace

TEST_CASE("config JSON round-trip is lossless") {
  ExperimentConfig c = bank_config();
  c.init_theta = vec({1, 0, -1});
  c.validation_mode = tuners::ValidationMode::kStrict;
  c.algorithms[1].label = "hb_run";
  c.algorithms[1].allow_violations = true;
  c.output.csv = true;
  c.output.json = false;
  c.output.directory = "runs/somewhere";
  c.notes = "three sinusoids";

  const nlohmann::json j = config_to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.name == c.name);
  CHECK(back.algorithms.size() == 3);
  CHECK(back.algorithms[1].label == "hb_run");
  CHECK(back.algorithms[1].allow_violations);
  CHECK(back.validation_mode == tuners::ValidationMode::kStrict);
  CHECK(exact_eq(back.theta_star, c.theta_star));
  CHECK(exact_eq(back.init_theta, c.init_theta));
  CHECK(back.analysis.enabled);
  CHECK(back.analysis.delta_t == 20);
  CHECK_FALSE(back.output.json);
}

TEST_CASE("config JSON round-trip covers every source kind") {
  // piecewise-constant
  ExperimentConfig pw = small_config();
  pw.source.kind = regress::RegressorSource::Kind::kPiecewiseConstant;
  pw.source.constant_phi = ParameterVector();
  pw.source.segments = {{1, vec({1, -2, 1})}, {4, vec({2, -1, -2})}};
  CHECK(config_to_json(config_from_json(config_to_json(pw))) ==
        config_to_json(pw));

  // file
  ExperimentConfig fc = small_config();
  fc.source.kind = regress::RegressorSource::Kind::kFile;
  fc.source.constant_phi = ParameterVector();
  fc.source.file_path = "/tmp/data.csv";
  CHECK(config_to_json(config_from_json(config_to_json(fc))) ==
        config_to_json(fc));

  // plant (theta_star comes from the coefficients, so none in the config)
  ExperimentConfig pl = small_config();
  pl.source.kind = regress::RegressorSource::Kind::kPlant;
  pl.source.constant_phi = ParameterVector();
  pl.source.plant.a_coeffs = {0.5};
  pl.source.plant.b_coeffs = {2.0};
  pl.source.plant.delay_d = 0;
  pl.source.input.kind = regress::InputSignal::Kind::kConstant;
  pl.source.input.value = 1.0;
  pl.theta_star = ParameterVector();
  const nlohmann::json jp = config_to_json(pl);
  CHECK(config_to_json(config_from_json(jp)) == jp);
  CHECK(exact_eq(effective_theta_star(config_from_json(jp)), vec({-0.5, 2})));
}

TEST_CASE("config parser rejects unknown keys and bad fields") {
  nlohmann::json j = config_to_json(small_config());
  j["typo_field"] = 1;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);

  nlohmann::json j2 = config_to_json(small_config());
  j2["algorithms"][0]["beta"] = 0.5;  // alpha-only algorithm
  CHECK_THROWS_AS(config_from_json(j2), ConfigError);

  nlohmann::json j3 = config_to_json(small_config());
  j3["horizon"] = "many";
  CHECK_THROWS_AS(config_from_json(j3), ConfigError);
}

TEST_CASE("config validation names the offending field") {
  ExperimentConfig dup = small_config();
  dup.algorithms[1].label = "ngd";  // collides with the first entry's label
  CHECK_THROWS_WITH_AS(dup.validate(),
                       doctest::Contains("label"), ConfigError);

  ExperimentConfig charset = small_config();
  charset.algorithms[0].label = "has space";
  CHECK_THROWS_AS(charset.validate(), ConfigError);

  ExperimentConfig nogamma = small_config();
  nogamma.algorithms[1].hp.gamma = 0.0;
  nogamma.algorithms[1].allow_violations = true;  // still rejected: V needs 1/gamma
  CHECK_THROWS_AS(nogamma.validate(), ConfigError);

  ExperimentConfig dim = small_config();
  dim.theta_star = vec({1, 2});
  CHECK_THROWS_AS(dim.validate(), ConfigError);

  ExperimentConfig init = small_config();
  init.init_theta = vec({1});
  CHECK_THROWS_AS(init.validate(), ConfigError);

  ExperimentConfig an = small_config();
  an.analysis.enabled = true;
  an.analysis.delta_t = 6;  // > horizon
  CHECK_THROWS_AS(an.validate(), ConfigError);

  ExperimentConfig out = small_config();
  out.output.csv = false;
  out.output.json = false;
  CHECK_THROWS_AS(out.validate(), ConfigError);

  ExperimentConfig viol = small_config();
  viol.algorithms[1].hp.gamma = 0.2;  // above the certified bound
  CHECK_THROWS_WITH_AS(viol.validate(),
                       doctest::Contains("allow_violations"), ConfigError);
  viol.algorithms[1].allow_violations = true;
  CHECK_NOTHROW(viol.validate());
}

TEST_CASE("trace CSV round-trips exactly") {
  const RunArtifact art = run_experiment(small_config());
  for (const AlgorithmRunResult& res : art.results) {
    std::stringstream ss;
    write_trace_csv(ss, res.trace);
    const auto back = read_trace_csv(ss, res.algo.label + ".csv");
    REQUIRE(back.size() == res.trace.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].k == res.trace[i].k);
      CHECK(back[i].algorithm == res.trace[i].algorithm);
      CHECK(back[i].e_y == res.trace[i].e_y);
      CHECK(back[i].param_err == res.trace[i].param_err);
      CHECK(back[i].v.has_value() == res.trace[i].v.has_value());
      if (back[i].v) CHECK(*back[i].v == *res.trace[i].v);
      CHECK(exact_eq(back[i].theta, res.trace[i].theta));
      CHECK(exact_eq(back[i].vartheta, res.trace[i].vartheta));
    }
  }
}

TEST_CASE("read_trace_csv rejects malformed input") {
  std::stringstream bad_header("k,algo,e\n1,x,2\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header, "t.csv"), ParseError);

  std::stringstream bad_cell(
      "k,algorithm,e_y,param_err,v,theta_1,vartheta_1\n"
      "1,ngd,0.5,oops,,1.0,\n");
  CHECK_THROWS_WITH_AS(read_trace_csv(bad_cell, "t.csv"),
                       doctest::Contains("t.csv:2"), ParseError);
}

TEST_CASE("single-step run logs the initial state and updates past it") {
  ExperimentConfig c = small_config();
  c.horizon = 1;
  c.algorithms.resize(1);  // ngd alpha=0.0469
  const RunArtifact art = run_experiment(c);
  REQUIRE(art.results.size() == 1);
  const auto& res = art.results[0];
  REQUIRE(res.trace.size() == 1);

  // Pre-update row: theta = 0, e_y = 0 - 27, ||theta - theta*|| = sqrt(410).
  CHECK(res.trace[0].k == 1);
  CHECK(res.trace[0].e_y == -27.0);
  CHECK(res.trace[0].param_err == doctest::Approx(std::sqrt(410.0)).epsilon(1e-15));
  CHECK_FALSE(res.trace[0].v.has_value());
  CHECK(exact_eq(res.trace[0].theta, vec({0, 0, 0})));

  // Post-update state: theta - alpha*phi*e/n with n = 1 + 6 = 7.
  const double unit = 0.0469 * 27.0 / 7.0;
  CHECK(res.final_state.k == 2);
  CHECK(res.final_state.theta[0] == doctest::Approx(unit).epsilon(1e-15));
  CHECK(res.final_state.theta[1] == doctest::Approx(-2.0 * unit).epsilon(1e-15));
  CHECK(res.final_state.theta[2] == doctest::Approx(unit).epsilon(1e-15));
}

TEST_CASE("run_experiment is deterministic down to the serialized bytes") {
  const ExperimentConfig c = bank_config();
  const RunArtifact a = run_experiment(c);
  const RunArtifact b = run_experiment(c);

  CHECK(report_to_json(a).dump(2) == report_to_json(b).dump(2));
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    std::stringstream sa, sb;
    write_trace_csv(sa, a.results[i].trace);
    write_trace_csv(sb, b.results[i].trace);
    CHECK(sa.str() == sb.str());
  }
}

TEST_CASE("logged rows are self-consistent with the regenerated stream") {
  const ExperimentConfig c = bank_config();
  const RunArtifact art = run_experiment(c);
  const auto samples =
      regress::regressor_stream(c.source, art.theta_star, c.horizon);

  for (const AlgorithmRunResult& res : art.results) {
    REQUIRE(res.trace.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const TraceRecord& row = res.trace[i];
      CHECK(row.k == samples[i].k);
      const double e = dot_lr(samples[i].phi, row.theta) - samples[i].y;
      CHECK(row.e_y == doctest::Approx(e).epsilon(1e-12));
      CHECK(row.param_err ==
            doctest::Approx(analysis::parameter_error(row.theta, art.theta_star))
                .epsilon(1e-12));
      if (row.v) {
        CHECK(*row.v == doctest::Approx(analysis::lyapunov(
                            row.theta, row.vartheta, art.theta_star,
                            res.algo.hp.gamma))
                            .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("analysis attaches excitation, decay and envelope reports") {
  const RunArtifact art = run_experiment(bank_config());
  REQUIRE(art.pe.has_value());
  CHECK(art.pe->epsilon > 0.0);
  CHECK(art.pe->delta_t == 20);

  for (const AlgorithmRunResult& res : art.results) {
    if (res.algo.hp.algorithm == tuners::Algorithm::kNGD) {
      CHECK_FALSE(res.rate.has_value());
      CHECK_FALSE(res.envelope.has_value());
    } else {
      REQUIRE(res.rate.has_value());
      CHECK(res.rate->mu > 0.0);
      REQUIRE(res.envelope.has_value());
      CHECK(res.envelope->holds);
    }
  }
}

TEST_CASE("a non-exciting source yields a note instead of a certificate") {
  ExperimentConfig c = small_config();  // constant regressor: rank one
  c.analysis.enabled = true;
  c.analysis.delta_t = 5;
  const RunArtifact art = run_experiment(c);
  REQUIRE(art.pe.has_value());
  CHECK(art.pe->epsilon <= 1e-12);
  for (const AlgorithmRunResult& res : art.results) {
    if (res.algo.hp.algorithm == tuners::Algorithm::kNGD) continue;
    CHECK_FALSE(res.rate.has_value());
    CHECK_FALSE(res.envelope.has_value());
    CHECK(res.note.find("not persistently exciting") != std::string::npos);
  }
}

TEST_CASE("write_run then load_run reproduces the artifact") {
  TempDir tmp("roundtrip");
  const RunArtifact art = run_experiment(bank_config());
  const auto written = write_run(art, tmp.path);
  CHECK(written.size() == 4);  // three traces + report.json
  CHECK(fs::exists(tmp.path / "report.json"));
  CHECK(fs::exists(tmp.path / "ngd.csv"));

  const RunArtifact back = load_run(tmp.path);
  CHECK(back.config.name == art.config.name);
  CHECK(back.config.horizon == art.config.horizon);
  CHECK(exact_eq(back.theta_star, art.theta_star));
  REQUIRE(back.pe.has_value());
  CHECK(back.pe->epsilon == art.pe->epsilon);
  REQUIRE(back.results.size() == art.results.size());
  for (std::size_t i = 0; i < art.results.size(); ++i) {
    const auto& ra = art.results[i];
    const auto& rb = back.results[i];
    CHECK(rb.algo.label == ra.algo.label);
    CHECK(rb.algo.hp.algorithm == ra.algo.hp.algorithm);
    REQUIRE(rb.trace.size() == ra.trace.size());
    CHECK(rb.trace.back().e_y == ra.trace.back().e_y);
    CHECK(exact_eq(rb.trace.back().theta, ra.trace.back().theta));
    CHECK(rb.rate.has_value() == ra.rate.has_value());
    if (ra.rate) CHECK(rb.rate->mu == ra.rate->mu);
    CHECK(rb.envelope.has_value() == ra.envelope.has_value());
    if (ra.envelope) CHECK(rb.envelope->holds == ra.envelope->holds);
    CHECK(exact_eq(rb.final_state.theta, ra.final_state.theta));
  }

  CHECK_THROWS_AS(load_run(tmp.path / "nope"), ConfigError);
}

TEST_CASE("write_run honors the output format flags") {
  TempDir tmp("formats");
  ExperimentConfig c = small_config();
  c.output.csv = false;  // report only
  const RunArtifact art = run_experiment(c);
  const auto written = write_run(art, tmp.path);
  CHECK(written.size() == 1);
  CHECK(fs::exists(tmp.path / "report.json"));
  CHECK_FALSE(fs::exists(tmp.path / "ngd.csv"));

  // Trace files are then declared absent in the report.
  std::ifstream in(tmp.path / "report.json");
  nlohmann::json rep = nlohmann::json::parse(in);
  CHECK(rep["algorithms"][0]["trace_file"].is_null());
}

TEST_CASE("compare scans tolerances and flags incompatible runs") {
  const RunArtifact art = run_experiment(bank_config());
  const CompareSummary self = compare({art, art}, 1e-3, 1e-3);
  REQUIRE(self.rows.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const CompareRow& a = self.rows[i];
    const CompareRow& b = self.rows[i + 3];
    CHECK(a.algorithm == b.algorithm);
    CHECK(a.first_k_abs_e == b.first_k_abs_e);
    CHECK(a.final_param_err == b.final_param_err);
    CHECK(a.envelope == b.envelope);
  }

  // 60 steps of a 3-parameter problem do not reach 1e-3; a loose tolerance does.
  const CompareSummary loose = compare({art}, 40.0, 40.0);
  for (const CompareRow& row : loose.rows) {
    REQUIRE(row.first_k_param.has_value());
    CHECK(*row.first_k_param == 1);  // sqrt(410) < 40 already at k=1
  }

  std::stringstream ss;
  const CompareSummary tight = compare({art}, 1e-300, 1e-300);
  write_compare_csv(ss, tight);
  CHECK(ss.str().find("not reached") != std::string::npos);
  const nlohmann::json cj = compare_to_json(tight);
  CHECK(cj["rows"][0]["first_k_abs_e_below"].is_null());

  RunArtifact other = run_experiment(small_config());
  CHECK_THROWS_WITH_AS(compare({art, other}, 1e-3, 1e-3),
                       doctest::Contains("horizon"), IncompatibleRunsError);
}

TEST_CASE("plot emission covers quantities, scales and the log floor") {
  CHECK(plot_quantity_from_string("e_y") == PlotQuantity::kEY);
  CHECK(plot_quantity_from_string("param_err") == PlotQuantity::kParamErr);
  CHECK(plot_quantity_from_string("v") == PlotQuantity::kV);
  CHECK_THROWS_AS(plot_quantity_from_string("energy"), ConfigError);
  CHECK(plot_scale_from_string("linear") == PlotScale::kLinear);
  CHECK(plot_scale_from_string("log10-abs") == PlotScale::kLog10Abs);
  CHECK_THROWS_AS(plot_scale_from_string("log"), ConfigError);

  const RunArtifact art = run_experiment(small_config());

  // Linear output echoes the stored values.
  std::stringstream lin;
  write_plot_columns(lin, art.results[0].trace, PlotQuantity::kEY,
                     PlotScale::kLinear);
  std::string header;
  std::getline(lin, header);
  CHECK(header == "k,e_y");
  long k = 0;
  double val = 0.0;
  char comma = 0;
  lin >> k >> comma >> val;
  CHECK(k == 1);
  CHECK(val == art.results[0].trace[0].e_y);

  // The Lyapunov column only exists for the HB/NA tuners.
  CHECK_THROWS_AS(write_plot_columns(lin, art.results[0].trace, PlotQuantity::kV,
                                     PlotScale::kLinear),
                  UnavailableQuantityError);

  // Exact zeros stay finite on the log axis.
  std::vector<TraceRecord> zero_trace;
  TraceRecord r;
  r.k = 1;
  r.algorithm = "ngd";
  r.e_y = 0.0;
  r.theta = vec({0});
  zero_trace.push_back(r);
  std::stringstream logz;
  write_plot_columns(logz, zero_trace, PlotQuantity::kEY, PlotScale::kLog10Abs);
  std::getline(logz, header);
  CHECK(header == "k,log10_abs_e_y");
  logz >> k >> comma >> val;
  CHECK(val == -300.0);

  TempDir tmp("plots");
  const auto paths = emit_plot_data(art, PlotQuantity::kEY, PlotScale::kLog10Abs,
                                    tmp.path);
  REQUIRE(paths.size() == 3);
  CHECK(fs::exists(tmp.path / "ngd.e_y.log10-abs.csv"));
  CHECK(fs::exists(tmp.path / "hb.e_y.log10-abs.csv"));
  CHECK(fs::exists(tmp.path / "na.e_y.log10-abs.csv"));
}

TEST_CASE("load_config defaults the name and resolves file sources") {
  TempDir tmp("loadcfg");

  std::ofstream data(tmp.path / "stream.csv");
  data << "k,phi_1,y\n";
  for (int k = 1; k <= 4; ++k) data << k << ",2.0,5.0\n";
  data.close();

  nlohmann::json j;
  j["algorithms"] = nlohmann::json::array(
      {{{"algorithm", "ngd"}, {"alpha", 0.5}}});
  j["source"] = {{"kind", "file"}, {"path", "stream.csv"}};
  j["theta_star"] = {2.5};
  j["horizon"] = 4;
  std::ofstream cfg(tmp.path / "relpaths.json");
  cfg << j.dump(2) << "\n";
  cfg.close();

  const ExperimentConfig c = load_config(tmp.path / "relpaths.json");
  CHECK(c.name == "relpaths");  // defaults to the file stem
  const auto samples = regress::regressor_stream(c.source, c.theta_star, 4);
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].phi[0] == 2.0);
  CHECK(samples[0].y == 5.0);

  CHECK_THROWS_AS(load_config(tmp.path / "missing.json"), ParseError);

  std::ofstream bad(tmp.path / "bad.json");
  bad << "{ not json\n";
  bad.close();
  CHECK_THROWS_AS(load_config(tmp.path / "bad.json"), ParseError);
}
