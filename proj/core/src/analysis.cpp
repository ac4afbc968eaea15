#include <hotuner/analysis.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hotuner::analysis {

double lyapunov(const ParameterVector& theta, const ParameterVector& vartheta,
                const ParameterVector& theta_star, double gamma) {
  if (!(gamma > 0.0)) {
    throw InvalidArgumentError("lyapunov: gamma must be > 0, got " +
                               std::to_string(gamma));
  }
  if (theta.size() != vartheta.size() || theta.size() != theta_star.size()) {
    throw InvalidSpecError("lyapunov: dimension mismatch");
  }
  double d1 = 0.0, d2 = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double a = vartheta[i] - theta_star[i];
    d1 += a * a;
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double b = theta[i] - vartheta[i];
    d2 += b * b;
  }
  return d1 / gamma + d2 / gamma;
}

double parameter_error(const ParameterVector& theta,
                       const ParameterVector& theta_star) {
  if (theta.size() != theta_star.size()) {
    throw InvalidSpecError("parameter_error: dimension mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double d = theta[i] - theta_star[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// ---- persistent excitation ----------------------------------------------------

namespace {

/// (1/ΔT) Σ_rows |row·w|, rows and components scanned in order.
double window_objective(const Eigen::MatrixXd& w_rows, const ParameterVector& w) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < w_rows.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < w_rows.cols(); ++c) s += w_rows(r, c) * w[c];
    total += std::abs(s);
  }
  return total / static_cast<double>(w_rows.rows());
}

/// Projected subgradient descent of the window objective on the unit sphere.
/// Evaluates feasible points only; returns the best value seen.
double sphere_descent(const Eigen::MatrixXd& w_rows, ParameterVector w,
                      const PESearchOptions& opts) {
  const Eigen::Index dt = w_rows.rows();
  const Eigen::Index dim = w_rows.cols();

  double nw = norm_lr(w);
  if (nw < 1e-300) return std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < dim; ++i) w[i] /= nw;

  double best = window_objective(w_rows, w);
  double step = opts.initial_step;

  ParameterVector signs(dt), sg(dim), cand(dim);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // Subgradient: Wᵀ·sign(W·w)/ΔT, with sign(0) = 0.
    for (Eigen::Index r = 0; r < dt; ++r) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < dim; ++c) s += w_rows(r, c) * w[c];
      signs[r] = (s > 0.0) ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < dt; ++r) s += w_rows(r, c) * signs[r];
      sg[c] = s / static_cast<double>(dt);
    }
    // Project onto the tangent plane at w.
    double along = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) along += sg[c] * w[c];
    for (Eigen::Index c = 0; c < dim; ++c) sg[c] -= along * w[c];

    const double gn = norm_lr(sg);
    if (gn < 1e-15) break;  // w is (numerically) a critical point

    for (Eigen::Index c = 0; c < dim; ++c) cand[c] = w[c] - (step / gn) * sg[c];
    const double cn = norm_lr(cand);
    if (cn < 1e-15) {
      step *= 0.5;
      continue;
    }
    for (Eigen::Index c = 0; c < dim; ++c) cand[c] /= cn;

    const double val = window_objective(w_rows, cand);
    if (val < best) {
      best = val;
      w = cand;
    } else {
      step *= 0.7;
      if (step < 1e-12) break;
    }
  }
  return best;
}

}  // namespace

PEReport pe_epsilon(const std::vector<regress::RegressorSample>& samples,
                    long delta_t, const PESearchOptions& opts) {
  if (samples.empty()) {
    throw InvalidArgumentError("pe_epsilon: empty sample window");
  }
  if (delta_t < 1) {
    throw InvalidArgumentError("pe_epsilon: delta_t must be >= 1, got " +
                               std::to_string(delta_t));
  }
  const long n = static_cast<long>(samples.size());
  if (n < delta_t) {
    throw InvalidArgumentError("pe_epsilon: window of " + std::to_string(n) +
                               " samples is shorter than delta_t = " +
                               std::to_string(delta_t));
  }
  const Eigen::Index dim = samples[0].phi.size();
  if (dim < 1) throw InvalidSpecError("pe_epsilon: zero-dimension regressors");
  for (const regress::RegressorSample& s : samples) {
    if (s.phi.size() != dim) {
      throw InvalidSpecError("pe_epsilon: samples disagree on dimension");
    }
  }

  PEReport rep;
  rep.delta_t = delta_t;
  rep.max_sqrt_nk = 0.0;
  for (const regress::RegressorSample& s : samples) {
    rep.max_sqrt_nk = std::max(rep.max_sqrt_nk, std::sqrt(s.n_k));
  }

  const double dtd = static_cast<double>(delta_t);
  double eps = std::numeric_limits<double>::infinity();
  double lb = std::numeric_limits<double>::infinity();

  if (dim == 1) {
    // Scalar case in closed form: the objective is (1/ΔT)Σ|φ_i| for w = ±1.
    for (long j = 0; j + delta_t <= n; ++j) {
      double abs_sum = 0.0, sq_sum = 0.0, max_abs = 0.0;
      for (long i = 0; i < delta_t; ++i) {
        const double v = samples[j + i].phi[0];
        abs_sum += std::abs(v);
        sq_sum += v * v;
        max_abs = std::max(max_abs, std::abs(v));
      }
      eps = std::min(eps, abs_sum / dtd);
      lb = std::min(lb, max_abs > 0.0 ? sq_sum / (dtd * max_abs) : 0.0);
    }
  } else {
    Eigen::MatrixXd w_rows(delta_t, dim);
    Eigen::MatrixXd info(dim, dim);
    ParameterVector seed(dim);
    for (long j = 0; j + delta_t <= n; ++j) {
      // Normalize the window by its largest ‖φ‖ so the descent geometry is
      // scale-free; multiply the scale back into the reported values.
      double scale = 0.0;
      for (long i = 0; i < delta_t; ++i) {
        scale = std::max(scale, norm_lr(samples[j + i].phi));
      }
      if (scale == 0.0) {
        eps = 0.0;
        lb = 0.0;
        continue;
      }
      for (long i = 0; i < delta_t; ++i) {
        for (Eigen::Index c = 0; c < dim; ++c) {
          w_rows(i, c) = samples[j + i].phi[c] / scale;
        }
      }

      // Information matrix of the normalized window, accumulated in row order.
      info.setZero();
      for (long i = 0; i < delta_t; ++i) {
        for (Eigen::Index a = 0; a < dim; ++a) {
          for (Eigen::Index b = 0; b < dim; ++b) {
            info(a, b) += w_rows(i, a) * w_rows(i, b);
          }
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
      const double lam_min = std::max(0.0, es.eigenvalues()(0));
      lb = std::min(lb, scale * (lam_min / dtd));

      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < dim; ++c) {
        best = std::min(best, sphere_descent(w_rows, es.eigenvectors().col(c), opts));
      }
      SplitMix64 rng(opts.seed + static_cast<std::uint64_t>(j));
      for (int r = 0; r < opts.random_restarts; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) seed[c] = rng.next_normal();
        best = std::min(best, sphere_descent(w_rows, seed, opts));
      }
      eps = std::min(eps, scale * best);
    }
  }

  rep.epsilon = eps;
  rep.epsilon_lb = std::min(lb, eps);  // guard eigensolver round-off
  rep.epsilon_norm = rep.epsilon / rep.max_sqrt_nk;
  return rep;
}

// ---- decay-constant certificates ----------------------------------------------

RateReport rate_bound_hb(const PEReport& pe, double beta, double gamma,
                         const RateSearchOptions& opts) {
  if (!(pe.epsilon_norm > 0.0)) {
    throw NotPersistentlyExcitingError(
        "rate_bound_hb: normalized excitation is zero; no decay certificate exists");
  }
  if (!(beta > 0.0 && beta < 2.0)) {
    throw InvalidArgumentError("rate_bound_hb: beta must lie in (0, 2), got " +
                               std::to_string(beta));
  }
  if (!(gamma > 0.0)) {
    throw InvalidArgumentError("rate_bound_hb: gamma must be > 0");
  }
  if (pe.delta_t < 1) {
    throw InvalidArgumentError("rate_bound_hb: report carries delta_t < 1");
  }

  const double c1 = 11.0 / 8.0;
  const double c2 = 21.0 / 32.0;
  const double eps1 = pe.epsilon_norm;
  const double dtd = static_cast<double>(pe.delta_t);
  const double ab = std::abs(1.0 - beta);
  const double eta_hi =
      beta == 1.0 ? opts.eta_cap_for_beta_one : eps1 / (gamma * ab);
  const double den2 = (1.0 + gamma * dtd) * (1.0 + gamma * dtd);
  const int g = opts.grid_points;

  RateReport best;
  best.algorithm = tuners::Algorithm::kHB;
  best.delta_t = pe.delta_t;
  best.c_consts = {c1, c2};
  best.mu = -1.0;

  for (int i = 0; i < g; ++i) {
    const double lambda = (i + 0.5) / g;
    const double mu3 = c1 * (1.0 - lambda) * gamma / dtd;
    for (int j = 0; j < g; ++j) {
      const double eta = eta_hi * (j + 0.5) / g;
      const double mu1 = c1 * lambda * gamma * eta * eta / dtd;
      const double rem = eps1 - gamma * eta * ab;
      const double mu2 = c2 * dtd * rem * rem * lambda * gamma / den2;
      const double mu = std::min(mu1, std::min(mu2, mu3));
      if (mu > best.mu) {
        best.lambda = lambda;
        best.eta = eta;
        best.mu_terms = {mu1, mu2, mu3};
        best.mu = mu;
      }
    }
  }
  return best;
}

RateReport rate_bound_na(const PEReport& pe, double beta, double gamma,
                         long delta_t, const RateSearchOptions& opts) {
  if (!(pe.epsilon_norm > 0.0)) {
    throw NotPersistentlyExcitingError(
        "rate_bound_na: normalized excitation is zero; no decay certificate exists");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw InvalidArgumentError("rate_bound_na: beta must lie in (0, 1), got " +
                               std::to_string(beta));
  }
  if (!(gamma > 0.0)) {
    throw InvalidArgumentError("rate_bound_na: gamma must be > 0");
  }
  if (!(gamma * beta < 1.0)) {
    throw InvalidArgumentError("rate_bound_na: requires gamma*beta < 1, got " +
                               std::to_string(gamma * beta));
  }
  if (delta_t < 1) {
    throw InvalidArgumentError("rate_bound_na: delta_t must be >= 1");
  }

  const double c3 = 7.0 / 4.0;
  const double c4 = 9.0 / 16.0;
  const double eps2 = pe.epsilon_norm;
  const double dtd = static_cast<double>(delta_t);
  const double eta_hi = eps2 / (gamma * (1.0 - beta));
  const double zeta_hi = (1.0 - gamma * beta) / (gamma * (1.0 + beta - gamma * beta));
  const double den2 = (1.0 + gamma * dtd) * (1.0 + gamma * dtd);
  // ξ(ζ) = (ΔT − ζ(γΔT + B)) / (den_base + ζB) with B = γβ(1+ΔT)/(1−γβ).
  const double b_term = gamma * beta * (1.0 + dtd) / (1.0 - gamma * beta);
  const double den_base = 1.0 + gamma * (1.0 - beta) * dtd + beta * dtd;
  const int g = opts.grid_points;

  RateReport best;
  best.algorithm = tuners::Algorithm::kNA;
  best.delta_t = delta_t;
  best.c_consts = {c3, c4};
  best.mu = -1.0;

  // For fixed λ the four terms split into an η-only pair and a ζ-only pair,
  // so max over (η, ζ) of min{μ₁..μ₄} = min(max_η min{μ₁,μ₂}, max_ζ min{μ₃,μ₄}).
  for (int i = 0; i < g; ++i) {
    const double lambda = (i + 0.5) / g;

    double best_a = -1.0, eta_a = 0.0, mu1_a = 0.0, mu2_a = 0.0;
    for (int j = 0; j < g; ++j) {
      const double eta = eta_hi * (j + 0.5) / g;
      const double mu1 = c3 * lambda * gamma * eta * eta / dtd;
      const double rem = eps2 - gamma * eta * (1.0 - beta);
      const double mu2 = c4 * dtd * rem * rem * lambda * gamma / den2;
      const double cand = std::min(mu1, mu2);
      if (cand > best_a) {
        best_a = cand;
        eta_a = eta;
        mu1_a = mu1;
        mu2_a = mu2;
      }
    }

    double best_b = -1.0, zeta_b = 0.0, xi_b = 0.0, mu3_b = 0.0, mu4_b = 0.0;
    for (int j = 0; j < g; ++j) {
      const double zeta = zeta_hi * (j + 0.5) / g;
      const double xi =
          (dtd - zeta * (gamma * dtd + b_term)) / (den_base + zeta * b_term);
      if (xi <= 0.0) continue;  // outside the certificate's validity range
      const double mu3 = c4 * gamma * zeta * zeta * (1.0 - lambda) / dtd;
      const double mu4 = c3 * xi * xi * (1.0 - lambda) * gamma / dtd;
      const double cand = std::min(mu3, mu4);
      if (cand > best_b) {
        best_b = cand;
        zeta_b = zeta;
        xi_b = xi;
        mu3_b = mu3;
        mu4_b = mu4;
      }
    }
    if (best_b < 0.0) continue;  // no admissible ζ at this λ

    const double mu = std::min(best_a, best_b);
    if (mu > best.mu) {
      best.lambda = lambda;
      best.eta = eta_a;
      best.zeta = zeta_b;
      best.xi = xi_b;
      best.mu_terms = {mu1_a, mu2_a, mu3_b, mu4_b};
      best.mu = mu;
    }
  }
  if (best.mu < 0.0) {
    throw InvalidArgumentError(
        "rate_bound_na: no admissible (lambda, eta, zeta) grid point");
  }
  return best;
}

EnvelopeReport check_envelope(const std::vector<double>& v_trace, double mu,
                              long delta_t, double tolerance) {
  if (v_trace.empty()) {
    throw InvalidArgumentError("check_envelope: empty trace");
  }
  if (!(mu > 0.0 && mu < 1.0)) {
    throw InvalidArgumentError("check_envelope: mu must lie in (0, 1), got " +
                               std::to_string(mu));
  }
  if (delta_t < 1) {
    throw InvalidArgumentError("check_envelope: delta_t must be >= 1");
  }
  if (tolerance < 0.0) {
    throw InvalidArgumentError("check_envelope: tolerance must be >= 0");
  }

  EnvelopeReport rep;
  const double v0 = v_trace[0];
  if (v0 < 0.0 || !std::isfinite(v0)) {
    throw InvalidArgumentError("check_envelope: V_0 must be finite and >= 0");
  }

  if (v0 == 0.0) {
    // Degenerate start at the optimum: the envelope is identically zero.
    rep.max_ratio = 0.0;
    rep.holds = true;
    for (std::size_t k = 0; k < v_trace.size(); ++k) {
      if (v_trace[k] != 0.0) {
        rep.holds = false;
        rep.max_ratio = std::numeric_limits<double>::infinity();
        rep.first_violation_k = static_cast<long>(k);
        break;
      }
    }
    return rep;
  }

  rep.max_ratio = 0.0;
  rep.holds = true;
  for (std::size_t k = 0; k < v_trace.size(); ++k) {
    const long buckets = static_cast<long>(k) / delta_t;
    const double envelope = std::exp(-mu * static_cast<double>(buckets)) * v0;
    const double ratio = v_trace[k] / envelope;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > 1.0 + tolerance && !rep.first_violation_k) {
      rep.first_violation_k = static_cast<long>(k);
    }
  }
  rep.holds = rep.max_ratio <= 1.0 + tolerance;
  return rep;
}

}  // namespace hotuner::analysis
