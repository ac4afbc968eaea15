#pragma once

#include <hotuner/analysis.hpp>
#include <hotuner/errors.hpp>
#include <hotuner/numeric.hpp>
#include <hotuner/regress.hpp>
#include <hotuner/tuners.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hotuner::harness {

struct AnalysisConfig {
  bool enabled = false;
  long delta_t = 20;
  double tolerance = 1e-9;
};

struct OutputConfig {
  std::string directory;  // empty: resolved by the caller / CLI
  bool csv = true;
  bool json = true;
};

/// One tuner entry of an experiment. The label names trace files and compare
/// rows; it defaults to the algorithm name and must be unique within a config.
struct AlgorithmConfig {
  tuners::HyperParams hp;
  std::string label;
  /// Accept hyperparameters that fail validate_hyperparams (the violations
  /// are still recorded in the report). Needed for experiments whose γ sits
  /// marginally above the certified bound.
  bool allow_violations = false;
};

/// A complete, serializable experiment description.
struct ExperimentConfig {
  std::string name;
  std::vector<AlgorithmConfig> algorithms;
  regress::RegressorSource source;
  /// Regression target. Must be omitted for plant sources (the plant's
  /// coefficient vector is used instead).
  ParameterVector theta_star;
  long horizon = 0;
  ParameterVector init_theta;  // empty = zeros
  tuners::ValidationMode validation_mode = tuners::ValidationMode::kTheorem;
  AnalysisConfig analysis;
  OutputConfig output;
  std::string notes;

  /// Structural validation; throws ConfigError naming the offending field.
  void validate() const;
};

/// θ* the run actually identifies against: the plant's coefficient vector
/// for plant sources, config.theta_star otherwise.
ParameterVector effective_theta_star(const ExperimentConfig& config);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Reads + validates a config file. A missing "name" defaults to the file
/// stem; a relative file-source path is resolved against the config's
/// directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// One trace row. Iterates are logged BEFORE the update consuming sample k,
/// so the row at k carries θ_k, ϑ_k, e_y = φ_kᵀθ_k − y_k, ‖θ_k − θ*‖ and
/// V_k; the first row of a run holds the initial state (V₀). The state after
/// the final update lives in AlgorithmRunResult::final_state.
struct TraceRecord {
  long k = 0;
  std::string algorithm;
  double e_y = 0.0;
  double param_err = 0.0;
  std::optional<double> v;   // HB/NA only
  ParameterVector theta;
  ParameterVector vartheta;  // empty when the algorithm has no ϑ
};

/// Header `k,algorithm,e_y,param_err,v,theta_1..theta_D,vartheta_1..vartheta_D`,
/// floats at 17 significant digits (lossless round-trip), empty cells for
/// inapplicable columns.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in,
                                        const std::string& name_for_errors);
std::vector<TraceRecord> load_trace_csv(const std::filesystem::path& path);

struct AlgorithmRunResult {
  AlgorithmConfig algo;
  std::vector<tuners::HyperParamViolation> violations;  // informational
  std::vector<TraceRecord> trace;
  tuners::TunerState final_state;  // post-update state after the last step
  std::optional<analysis::RateReport> rate;
  std::optional<analysis::EnvelopeReport> envelope;
  std::string note;  // why analysis results are absent, when they are
};

struct RunArtifact {
  ExperimentConfig config;
  ParameterVector theta_star;  // effective
  std::optional<analysis::PEReport> pe;
  std::vector<AlgorithmRunResult> results;
};

/// Runs every configured algorithm over the generated sample stream and,
/// when analysis is enabled, attaches excitation, decay-constant, and
/// envelope reports. Deterministic: repeated calls produce identical
/// artifacts (and byte-identical files via write_run).
/// Throws ConfigError on validation failure and DivergenceError (carrying
/// the algorithm label and step) when an update law blows up.
RunArtifact run_experiment(const ExperimentConfig& config);

/// Persists traces (<label>.csv) and/or report.json into dir, honoring
/// config.output format flags. Returns the paths written.
std::vector<std::filesystem::path> write_run(const RunArtifact& artifact,
                                             const std::filesystem::path& dir);

/// Reloads a persisted run (report.json + trace files).
RunArtifact load_run(const std::filesystem::path& dir);

/// The report.json payload.
nlohmann::json report_to_json(const RunArtifact& artifact);

nlohmann::json pe_report_to_json(const analysis::PEReport& pe);
nlohmann::json rate_report_to_json(const analysis::RateReport& rate);
nlohmann::json envelope_report_to_json(const analysis::EnvelopeReport& env);

struct CompareRow {
  std::string run;
  std::string algorithm;
  std::optional<long> first_k_abs_e;    // first k with |e_y| < eps_e
  std::optional<long> first_k_param;    // first k with ‖θ̃‖ < eps_theta
  double final_abs_e = 0.0;             // |e_y| at the last logged row
  double final_param_err = 0.0;
  std::string envelope;                 // "holds" / "violated" / "n/a"
};

struct CompareSummary {
  double eps_e = 1e-3;
  double eps_theta = 1e-3;
  std::vector<CompareRow> rows;
};

/// Per-algorithm iterations-to-tolerance and final errors across runs.
/// All runs must share θ* and horizon; throws IncompatibleRunsError otherwise.
CompareSummary compare(const std::vector<RunArtifact>& runs, double eps_e,
                       double eps_theta);

/// CSV columns: run,algorithm,first_k_abs_e_below,first_k_param_err_below,
/// final_abs_e,final_param_err,envelope. Unreached tolerances read
/// "not reached" (null in the JSON form).
void write_compare_csv(std::ostream& out, const CompareSummary& summary);
nlohmann::json compare_to_json(const CompareSummary& summary);

enum class PlotQuantity { kEY, kParamErr, kV };
enum class PlotScale { kLinear, kLog10Abs };

PlotQuantity plot_quantity_from_string(const std::string& name);
PlotScale plot_scale_from_string(const std::string& name);
std::string to_string(PlotQuantity q);
std::string to_string(PlotScale s);

/// Two-column `k,<quantity>` data for one trace. log10-abs maps v to
/// log10(max(|v|, 1e-300)) so zero errors stay finite. Throws
/// UnavailableQuantityError when the trace lacks the quantity (V for NGD
/// and the classical baselines).
void write_plot_columns(std::ostream& out, const std::vector<TraceRecord>& trace,
                        PlotQuantity quantity, PlotScale scale);

/// Writes <label>.<quantity>.<scale>.csv per algorithm into dir; returns the
/// paths. Fails like write_plot_columns if any selected trace lacks the
/// quantity.
std::vector<std::filesystem::path> emit_plot_data(const RunArtifact& artifact,
                                                  PlotQuantity quantity,
                                                  PlotScale scale,
                                                  const std::filesystem::path& dir);

}  // namespace hotuner::harness
