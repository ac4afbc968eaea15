#pragma once

#include <hotuner/errors.hpp>
#include <hotuner/numeric.hpp>
#include <hotuner/regress.hpp>

#include <string>
#include <utility>
#include <vector>

namespace hotuner::tuners {

enum class Algorithm {
  kNGD,          // normalized gradient descent
  kHB,           // Heavy-Ball high-order tuner (gradient at the updated iterate)
  kNA,           // Nesterov high-order tuner (extra look-ahead iterate)
  kHBClassical,  // textbook momentum (no stability guarantee)
  kNAClassical,  // textbook look-ahead momentum (no stability guarantee)
};

/// "ngd", "hb", "na", "hb-classical", "na-classical"
std::string to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);

/// Step-size bundle. Which fields matter depends on the algorithm:
/// NGD uses alpha; HB/NA use (beta, gamma); the classical baselines read
/// beta/gamma as their momentum/step weights.
struct HyperParams {
  Algorithm algorithm = Algorithm::kNGD;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Iterate bundle shared by all five update laws. Every vector has the same
/// dimension; fields an algorithm does not use simply ride along unchanged.
///   theta          θ_k, the parameter estimate
///   vartheta       ϑ_k, the auxiliary iterate (HB/NA)
///   theta_prev     θ_{k-1} (classical baselines)
///   theta_bar_last θ̄_k, the look-ahead iterate of the last NA step
struct TunerState {
  long k = 1;
  ParameterVector theta;
  ParameterVector vartheta;
  ParameterVector theta_prev;
  ParameterVector theta_bar_last;
};

/// Fresh state with no prior information: every iterate equals theta0, so the
/// classical momentum term vanishes on the first step.
TunerState make_state(const ParameterVector& theta0);

/// Per-step observability: the prediction error at the pre-update iterate,
/// the squared loss there, and the norm of the last gradient the update
/// consumed (evaluated at θ_{k+1} for HB/NA, at the look-ahead point for the
/// classical Nesterov baseline, at θ_k otherwise).
struct StepDiagnostics {
  double e_y = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

using StepResult = std::pair<TunerState, StepDiagnostics>;

/// Squared prediction loss and its gradient at theta:
/// loss = ½(φᵀθ − y)², grad = φ·(φᵀθ − y).
std::pair<double, ParameterVector> loss_and_gradient(
    const ParameterVector& theta, const regress::RegressorSample& sample);

/// θ_{k+1} = θ_k − α·∇L_k(θ_k)/N_k
StepResult ngd_step(const TunerState& state, const regress::RegressorSample& sample,
                    const HyperParams& hp);

/// θ_{k+1} = θ_k − β(θ_k − ϑ_k), then ϑ_{k+1} = ϑ_k − γ·∇L_k(θ_{k+1})/N_k.
/// The θ-update runs first so the gradient can be taken at θ_{k+1}.
StepResult hb_step(const TunerState& state, const regress::RegressorSample& sample,
                   const HyperParams& hp);

/// θ̄_k = θ_k − γβ·∇L_k(θ_k)/N_k, θ_{k+1} = θ̄_k − β(θ̄_k − ϑ_k),
/// ϑ_{k+1} = ϑ_k − γ·∇L_k(θ_{k+1})/N_k — evaluated in exactly that order.
/// θ̄_k is kept in theta_bar_last for analysis.
StepResult na_step(const TunerState& state, const regress::RegressorSample& sample,
                   const HyperParams& hp);

/// θ_{k+1} = θ_k − γ̄·∇L_k(θ_k)/N_k + β̄(θ_k − θ_{k−1})
StepResult classical_hb_step(const TunerState& state,
                             const regress::RegressorSample& sample,
                             const HyperParams& hp);

/// θ_{k+1} = θ_k − γ̄·∇L_k(θ_k + β̄(θ_k − θ_{k−1}))/N_k + β̄(θ_k − θ_{k−1})
StepResult classical_nesterov_step(const TunerState& state,
                                   const regress::RegressorSample& sample,
                                   const HyperParams& hp);

/// Dispatches to the step operation matching hp.algorithm.
StepResult step(const TunerState& state, const regress::RegressorSample& sample,
                const HyperParams& hp);

/// The γ bound is checkable at two strengths.
/// Theorem mode: γ ≤ β(2−β)/8 (HB), γ ≤ β(2−β)/(8+β²) (NA).
/// Strict mode:  γ ≤ β(2−β)/16 (HB), γ ≤ β(2−β)/(16+β²) (NA).
enum class ValidationMode { kTheorem, kStrict };

/// One failed constraint: the human-readable inequality, the boundary value
/// it was checked against, and the offending actual value.
struct HyperParamViolation {
  std::string constraint;
  double bound = 0.0;
  double actual = 0.0;
};

/// Checks every constraint for hp.algorithm and returns all violations
/// (empty result == valid). Violations are data, not errors: callers decide
/// whether to proceed (e.g. to rerun a recorded experiment whose γ sits
/// marginally out of bounds).
std::vector<HyperParamViolation> validate_hyperparams(const HyperParams& hp,
                                                      ValidationMode mode);

}  // namespace hotuner::tuners
