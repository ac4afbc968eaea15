#include <hotuner/tuners.hpp>

#include <cmath>

namespace hotuner::tuners {

std::string to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::kNGD:
      return "ngd";
    case Algorithm::kHB:
      return "hb";
    case Algorithm::kNA:
      return "na";
    case Algorithm::kHBClassical:
      return "hb-classical";
    case Algorithm::kNAClassical:
      return "na-classical";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "ngd") return Algorithm::kNGD;
  if (name == "hb") return Algorithm::kHB;
  if (name == "na") return Algorithm::kNA;
  if (name == "hb-classical") return Algorithm::kHBClassical;
  if (name == "na-classical") return Algorithm::kNAClassical;
  throw ConfigError("unknown algorithm '" + name +
                    "' (expected ngd, hb, na, hb-classical, na-classical)");
}

TunerState make_state(const ParameterVector& theta0) {
  TunerState s;
  s.k = 1;
  s.theta = theta0;
  s.vartheta = theta0;
  s.theta_prev = theta0;
  s.theta_bar_last = theta0;
  return s;
}

namespace {

void check_step_inputs(const TunerState& state,
                       const regress::RegressorSample& sample,
                       const HyperParams& hp, Algorithm expected) {
  if (hp.algorithm != expected) {
    throw InvalidArgumentError("step called with hyperparameters for '" +
                               to_string(hp.algorithm) + "', expected '" +
                               to_string(expected) + "'");
  }
  if (state.theta.size() != sample.phi.size()) {
    throw InvalidSpecError("state dimension " + std::to_string(state.theta.size()) +
                           " does not match regressor dimension " +
                           std::to_string(sample.phi.size()));
  }
}

void check_finite(const ParameterVector& v, Algorithm alg, long k) {
  if (!all_finite(v)) throw DivergenceError(to_string(alg), k);
}

}  // namespace

std::pair<double, ParameterVector> loss_and_gradient(
    const ParameterVector& theta, const regress::RegressorSample& sample) {
  if (theta.size() != sample.phi.size()) {
    throw InvalidSpecError("theta dimension " + std::to_string(theta.size()) +
                           " does not match regressor dimension " +
                           std::to_string(sample.phi.size()));
  }
  const double e = dot_lr(sample.phi, theta) - sample.y;
  ParameterVector grad(sample.phi.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i) grad[i] = sample.phi[i] * e;
  return {0.5 * e * e, grad};
}

StepResult ngd_step(const TunerState& state, const regress::RegressorSample& sample,
                    const HyperParams& hp) {
  check_step_inputs(state, sample, hp, Algorithm::kNGD);
  const Eigen::Index n = state.theta.size();
  const double e = dot_lr(sample.phi, state.theta) - sample.y;

  ParameterVector grad(n);
  for (Eigen::Index i = 0; i < n; ++i) grad[i] = sample.phi[i] * e;

  TunerState next = state;
  for (Eigen::Index i = 0; i < n; ++i) {
    next.theta[i] = state.theta[i] - hp.alpha * grad[i] / sample.n_k;
  }
  check_finite(next.theta, Algorithm::kNGD, state.k);
  next.k = state.k + 1;

  return {std::move(next), StepDiagnostics{e, 0.5 * e * e, norm_lr(grad)}};
}

StepResult hb_step(const TunerState& state, const regress::RegressorSample& sample,
                   const HyperParams& hp) {
  check_step_inputs(state, sample, hp, Algorithm::kHB);
  const Eigen::Index n = state.theta.size();
  const double e = dot_lr(sample.phi, state.theta) - sample.y;

  TunerState next = state;
  // θ first: the gradient below is taken at the already-updated iterate.
  for (Eigen::Index i = 0; i < n; ++i) {
    next.theta[i] = state.theta[i] - hp.beta * (state.theta[i] - state.vartheta[i]);
  }
  const double e_next = dot_lr(sample.phi, next.theta) - sample.y;
  ParameterVector grad(n);
  for (Eigen::Index i = 0; i < n; ++i) grad[i] = sample.phi[i] * e_next;
  for (Eigen::Index i = 0; i < n; ++i) {
    next.vartheta[i] = state.vartheta[i] - hp.gamma * grad[i] / sample.n_k;
  }
  check_finite(next.theta, Algorithm::kHB, state.k);
  check_finite(next.vartheta, Algorithm::kHB, state.k);
  next.k = state.k + 1;

  return {std::move(next), StepDiagnostics{e, 0.5 * e * e, norm_lr(grad)}};
}

StepResult na_step(const TunerState& state, const regress::RegressorSample& sample,
                   const HyperParams& hp) {
  check_step_inputs(state, sample, hp, Algorithm::kNA);
  const Eigen::Index n = state.theta.size();
  const double e = dot_lr(sample.phi, state.theta) - sample.y;

  ParameterVector grad0(n);
  for (Eigen::Index i = 0; i < n; ++i) grad0[i] = sample.phi[i] * e;

  TunerState next = state;
  // Order matters: θ̄ from θ, then θ from θ̄ and ϑ, then ϑ from ∇L(θ_{k+1}).
  ParameterVector theta_bar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta_bar[i] = state.theta[i] - hp.gamma * hp.beta * grad0[i] / sample.n_k;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    next.theta[i] = theta_bar[i] - hp.beta * (theta_bar[i] - state.vartheta[i]);
  }
  const double e_next = dot_lr(sample.phi, next.theta) - sample.y;
  ParameterVector grad(n);
  for (Eigen::Index i = 0; i < n; ++i) grad[i] = sample.phi[i] * e_next;
  for (Eigen::Index i = 0; i < n; ++i) {
    next.vartheta[i] = state.vartheta[i] - hp.gamma * grad[i] / sample.n_k;
  }
  next.theta_bar_last = std::move(theta_bar);
  check_finite(next.theta, Algorithm::kNA, state.k);
  check_finite(next.vartheta, Algorithm::kNA, state.k);
  next.k = state.k + 1;

  return {std::move(next), StepDiagnostics{e, 0.5 * e * e, norm_lr(grad)}};
}

StepResult classical_hb_step(const TunerState& state,
                             const regress::RegressorSample& sample,
                             const HyperParams& hp) {
  check_step_inputs(state, sample, hp, Algorithm::kHBClassical);
  const Eigen::Index n = state.theta.size();
  const double e = dot_lr(sample.phi, state.theta) - sample.y;

  ParameterVector grad(n);
  for (Eigen::Index i = 0; i < n; ++i) grad[i] = sample.phi[i] * e;

  TunerState next = state;
  for (Eigen::Index i = 0; i < n; ++i) {
    next.theta[i] = state.theta[i] - hp.gamma * grad[i] / sample.n_k +
                    hp.beta * (state.theta[i] - state.theta_prev[i]);
  }
  next.theta_prev = state.theta;
  check_finite(next.theta, Algorithm::kHBClassical, state.k);
  next.k = state.k + 1;

  return {std::move(next), StepDiagnostics{e, 0.5 * e * e, norm_lr(grad)}};
}

StepResult classical_nesterov_step(const TunerState& state,
                                   const regress::RegressorSample& sample,
                                   const HyperParams& hp) {
  check_step_inputs(state, sample, hp, Algorithm::kNAClassical);
  const Eigen::Index n = state.theta.size();
  const double e = dot_lr(sample.phi, state.theta) - sample.y;

  // Gradient at the look-ahead point θ_k + β̄(θ_k − θ_{k-1}).
  ParameterVector look(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    look[i] = state.theta[i] + hp.beta * (state.theta[i] - state.theta_prev[i]);
  }
  const double e_look = dot_lr(sample.phi, look) - sample.y;
  ParameterVector grad(n);
  for (Eigen::Index i = 0; i < n; ++i) grad[i] = sample.phi[i] * e_look;

  TunerState next = state;
  for (Eigen::Index i = 0; i < n; ++i) {
    next.theta[i] = state.theta[i] - hp.gamma * grad[i] / sample.n_k +
                    hp.beta * (state.theta[i] - state.theta_prev[i]);
  }
  next.theta_prev = state.theta;
  check_finite(next.theta, Algorithm::kNAClassical, state.k);
  next.k = state.k + 1;

  return {std::move(next), StepDiagnostics{e, 0.5 * e * e, norm_lr(grad)}};
}

StepResult step(const TunerState& state, const regress::RegressorSample& sample,
                const HyperParams& hp) {
  switch (hp.algorithm) {
    case Algorithm::kNGD:
      return ngd_step(state, sample, hp);
    case Algorithm::kHB:
      return hb_step(state, sample, hp);
    case Algorithm::kNA:
      return na_step(state, sample, hp);
    case Algorithm::kHBClassical:
      return classical_hb_step(state, sample, hp);
    case Algorithm::kNAClassical:
      return classical_nesterov_step(state, sample, hp);
  }
  throw InvalidArgumentError("step: unknown algorithm");
}

std::vector<HyperParamViolation> validate_hyperparams(const HyperParams& hp,
                                                      ValidationMode mode) {
  std::vector<HyperParamViolation> v;
  switch (hp.algorithm) {
    case Algorithm::kNGD:
      if (!(hp.alpha > 0.0)) v.push_back({"alpha > 0", 0.0, hp.alpha});
      if (!(hp.alpha < 2.0)) v.push_back({"alpha < 2", 2.0, hp.alpha});
      break;

    case Algorithm::kHB: {
      if (!(hp.beta > 0.0)) v.push_back({"beta > 0", 0.0, hp.beta});
      if (!(hp.beta < 2.0)) v.push_back({"beta < 2", 2.0, hp.beta});
      if (!(hp.gamma > 0.0)) v.push_back({"gamma > 0", 0.0, hp.gamma});
      if (hp.beta > 0.0 && hp.beta < 2.0) {
        const double div = mode == ValidationMode::kTheorem ? 8.0 : 16.0;
        const double bound = hp.beta * (2.0 - hp.beta) / div;
        if (!(hp.gamma <= bound)) {
          v.push_back({mode == ValidationMode::kTheorem
                           ? "gamma <= beta*(2-beta)/8"
                           : "gamma <= beta*(2-beta)/16",
                       bound, hp.gamma});
        }
      }
      break;
    }

    case Algorithm::kNA: {
      if (!(hp.beta > 0.0)) v.push_back({"beta > 0", 0.0, hp.beta});
      if (!(hp.beta < 1.0)) v.push_back({"beta < 1", 1.0, hp.beta});
      if (!(hp.gamma > 0.0)) v.push_back({"gamma > 0", 0.0, hp.gamma});
      if (hp.beta > 0.0 && hp.beta < 1.0) {
        const double add = mode == ValidationMode::kTheorem ? 8.0 : 16.0;
        const double bound = hp.beta * (2.0 - hp.beta) / (add + hp.beta * hp.beta);
        if (!(hp.gamma <= bound)) {
          v.push_back({mode == ValidationMode::kTheorem
                           ? "gamma <= beta*(2-beta)/(8+beta^2)"
                           : "gamma <= beta*(2-beta)/(16+beta^2)",
                       bound, hp.gamma});
        }
      }
      break;
    }

    case Algorithm::kHBClassical:
    case Algorithm::kNAClassical:
      // No stability guarantee exists for these baselines; only structural
      // positivity is checkable.
      if (!(hp.gamma > 0.0)) v.push_back({"gamma > 0", 0.0, hp.gamma});
      if (!(hp.beta >= 0.0)) v.push_back({"beta >= 0", 0.0, hp.beta});
      break;
  }
  return v;
}

}  // namespace hotuner::tuners
