#pragma once

#include <hotuner/errors.hpp>
#include <hotuner/numeric.hpp>

#include <string>
#include <vector>

namespace hotuner::regress {

/// One term of the regression: iteration index k, regressor φ_k, output y_k,
/// plus the cached normalizer N_k = 1 + ‖φ_k‖². Samples are immutable once
/// built; construct them through make_sample so n_k is always consistent.
struct RegressorSample {
  long k = 0;
  ParameterVector phi;
  double y = 0.0;
  double norm_sq = 0.0;  // ‖φ_k‖², left-to-right accumulation
  double n_k = 1.0;      // 1 + norm_sq, recomputable exactly
};

/// Builds a sample and fills in norm_sq / n_k from phi.
RegressorSample make_sample(long k, ParameterVector phi, double y);

/// Reference into the lagged signals feeding a basis function.
/// `lag` counts backwards from the current step: output lag i means y_{k-i}
/// (valid i in [1, n]), input lag j means u_{k-j} (valid j in [1+d, m+d] so
/// that it lands on one of the delayed inputs the regressor already carries).
struct LagRef {
  enum class Signal { kOutput, kInput };
  Signal signal = Signal::kOutput;
  long lag = 1;
  long exponent = 1;  // used by monomial products only; must be >= 1
};

/// A nonlinear feature of the lagged signals. The closed set below stands in
/// for arbitrary analytic features while keeping configs serializable:
///   - monomial-product: Π value(ref)^exponent, empty ref list == constant 1
///   - sine-of-lag:      sin(scale · value(ref)), exactly one ref
///   - saturation-of-lag: clamp(scale · value(ref), -1, 1), exactly one ref
struct BasisFn {
  enum class Kind { kMonomialProduct, kSineOfLag, kSaturationOfLag };
  Kind kind = Kind::kMonomialProduct;
  std::vector<LagRef> lag_refs;
  double scale = 1.0;
};

/// Difference-equation plant with output lags a, input lags b, and nonlinear
/// features c:
///
///   y_k = -Σ a_i y_{k-i} + Σ b_j u_{k-j-d} + Σ c_l f_l(lagged y, lagged u)
///
/// The regression target is theta_star() = [-a_1..-a_n, b_1..b_m, c_1..c_p]:
/// the a-block is negated at construction so that y_k = φ_kᵀθ* holds with
/// φ_k = [y_{k-1}..y_{k-n}, u_{k-1-d}..u_{k-m-d}, f_1..f_p].
struct PlantSpec {
  std::vector<double> a_coeffs;
  std::vector<double> b_coeffs;
  std::vector<double> c_coeffs;
  long delay_d = 0;
  std::vector<BasisFn> basis;
  std::vector<double> initial_outputs;  // [y_0, y_{-1}, ..., y_{1-n}]

  long n() const { return static_cast<long>(a_coeffs.size()); }
  long m() const { return static_cast<long>(b_coeffs.size()); }
  long p() const { return static_cast<long>(c_coeffs.size()); }
  long dimension() const { return n() + m() + p(); }

  /// Coefficient vector of the regression form (a-block negated).
  ParameterVector theta_star() const;

  /// Throws InvalidSpecError on structural problems: |c| != |basis|,
  /// wrong initial_outputs size, negative delay, out-of-range lag refs,
  /// non-positive exponents, wrong ref counts for sine/saturation.
  void validate() const;
};

/// Deterministic input sequence u_k for plant simulation. u_k is defined for
/// every k >= 1; lags reaching k <= 0 read as 0 (quiescent past).
struct InputSignal {
  enum class Kind { kConstant, kSamples, kSinusoid };
  Kind kind = Kind::kConstant;
  double value = 0.0;                 // constant
  std::vector<double> samples;        // samples: u_1, u_2, ...
  double offset = 0.0;                // sinusoid: offset + amplitude*sin(omega*k + phase)
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  /// Throws InvalidSpecError for a samples signal read past its end.
  double eval(long k) const;
};

/// One additive sinusoid component of a synthesized regressor:
/// offset + amplitude·sin(omega·k + phase), evaluated at integer k.
struct Sinusoid {
  double offset = 0.0;
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  double eval(long k) const;
};

struct PiecewiseSegment {
  long start_k = 1;
  ParameterVector phi;
};

/// Where the (φ_k, y_k) stream comes from. A tagged union: `kind` selects
/// which payload below is meaningful.
struct RegressorSource {
  enum class Kind { kConstant, kPiecewiseConstant, kSinusoidBank, kPlant, kFile };
  Kind kind = Kind::kConstant;

  ParameterVector constant_phi;            // kConstant
  std::vector<PiecewiseSegment> segments;  // kPiecewiseConstant
  std::vector<Sinusoid> components;        // kSinusoidBank
  PlantSpec plant;                         // kPlant
  InputSignal input;                       // kPlant
  std::string file_path;                   // kFile

  /// Emitted regressor dimension, or -1 for file sources (known only after
  /// the header is read).
  long dimension() const;

  /// Structural checks that do not require generating anything: segment
  /// ordering, matching dimensions, plant validity.
  void validate() const;
};

/// Assembles φ = [z_lags, v_lags, f_1(z,v), ..., f_p(z,v)] where
/// z_lags[i-1] = y_{k-i} and v_lags[j-1] = u_{k-j-d}. `delay_d` is needed to
/// translate basis input-lag references into v_lags positions.
/// Throws InvalidSpecError when a basis function references a lag outside
/// the provided vectors.
ParameterVector build_regressor(const ParameterVector& z_lags,
                                const ParameterVector& v_lags,
                                const std::vector<BasisFn>& basis,
                                long delay_d = 0);

/// Iterates the plant difference equation for k = 1..horizon, emitting one
/// sample per step with y_k = φ_kᵀ·theta_star(). Throws DivergenceError
/// naming the step if any intermediate value leaves the finite range.
std::vector<RegressorSample> simulate_plant(const PlantSpec& spec,
                                            const InputSignal& input,
                                            long horizon);

/// Produces the sample stream for any source kind, k = 1..horizon.
/// For closed-form sources y_k = φ_kᵀθ* is synthesized; plant sources carry
/// their own θ* and ignore the argument; file sources use the file's y
/// column when present and synthesize from θ* otherwise.
/// Pure: identical inputs give bit-identical output.
std::vector<RegressorSample> regressor_stream(const RegressorSource& source,
                                              const ParameterVector& theta_star,
                                              long horizon);

/// Reads `k,phi_1,...,phi_D,y` CSV (y column optional). Returns samples with
/// y = 0 and a flag when the file has no y column.
struct FileRegressorData {
  std::vector<RegressorSample> samples;  // y filled only if has_y
  bool has_y = false;
};
FileRegressorData read_regressor_csv(const std::string& path);

}  // namespace hotuner::regress
