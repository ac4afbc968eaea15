#pragma once

#include <hotuner/errors.hpp>
#include <hotuner/numeric.hpp>
#include <hotuner/regress.hpp>
#include <hotuner/tuners.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace hotuner::analysis {

/// V = (1/γ)‖ϑ − θ*‖² + (1/γ)‖θ − ϑ‖², the certificate whose monotone
/// decrease establishes boundedness of the HB/NA iterates and whose
/// geometric decay establishes exponential learning.
double lyapunov(const ParameterVector& theta, const ParameterVector& vartheta,
                const ParameterVector& theta_star, double gamma);

/// ‖θ − θ*‖ (Euclidean).
double parameter_error(const ParameterVector& theta,
                       const ParameterVector& theta_star);

/// Measured excitation of a recorded window.
///   epsilon      min over length-ΔT windows of min over unit w of (1/ΔT)Σ|φ_iᵀw|
///   epsilon_lb   certified lower bound λ_min(Σφφᵀ)/(ΔT·max‖φ‖) per window,
///                minimized over windows — valid because |φᵀw| ≥ (φᵀw)²/‖φ‖
///   epsilon_norm epsilon / max_k √N_k, the quantity the decay bounds consume
struct PEReport {
  long delta_t = 0;
  double epsilon = 0.0;
  double epsilon_lb = 0.0;
  double max_sqrt_nk = 1.0;
  double epsilon_norm = 0.0;
};

/// Knobs for the inner sphere minimization. The defaults are deterministic:
/// fixed seed, fixed restart count, fixed iteration budget.
struct PESearchOptions {
  int random_restarts = 64;
  int max_iterations = 80;
  double initial_step = 0.5;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

/// Scans every window of length delta_t and solves the inner minimization by
/// multi-start projected subgradient descent on the unit sphere (seeded with
/// the eigenvectors of the window's information matrix plus random
/// directions). The descent evaluates feasible points only, so epsilon is an
/// upper bound on the true window minimum while epsilon_lb is a certified
/// lower bound; both are reported.
PEReport pe_epsilon(const std::vector<regress::RegressorSample>& samples,
                    long delta_t, const PESearchOptions& opts = {});

/// Decay-constant certificate: the contraction exponent μ such that
/// V_k ≤ exp(−μ⌊k/ΔT⌋)·V₀, together with the free parameters (λ, η and for
/// the Nesterov tuner ζ, ξ) that were chosen to maximize it.
struct RateReport {
  tuners::Algorithm algorithm = tuners::Algorithm::kHB;
  long delta_t = 0;
  double lambda = 0.0;
  double eta = 0.0;
  double zeta = 0.0;  // Nesterov only
  double xi = 0.0;    // Nesterov only
  std::vector<double> mu_terms;
  double mu = 0.0;  // min(mu_terms), always
  std::vector<double> c_consts;
};

struct RateSearchOptions {
  /// Grid points per free parameter axis; samples sit at (i+0.5)/G so the
  /// open-interval endpoints are never touched.
  int grid_points = 200;
  /// With β = 1 the Heavy-Ball η constraint is vacuous (|1−β| = 0); the η
  /// search is capped at this value instead.
  double eta_cap_for_beta_one = 1e3;
};

/// Decay constant for the Heavy-Ball tuner:
///   μ = min{μ₁, μ₂, μ₃},   c₁ = 11/8, c₂ = 21/32
///   μ₁ = c₁λγη²/ΔT
///   μ₂ = c₂ΔT(ε₁ − γη|1−β|)²λγ/(1+γΔT)²
///   μ₃ = c₁(1−λ)γ/ΔT
/// maximized over λ ∈ (0,1), η ∈ (0, ε₁/(γ|1−β|)).
/// Throws NotPersistentlyExcitingError when pe.epsilon_norm = 0.
RateReport rate_bound_hb(const PEReport& pe, double beta, double gamma,
                         const RateSearchOptions& opts = {});

/// Decay constant for the Nesterov tuner:
///   μ = min{μ₁, μ₂, μ₃, μ₄},   c₃ = 7/4, c₄ = 9/16
///   μ₁ = c₃λγη²/ΔT
///   μ₂ = c₄ΔT[ε₂ − γη(1−β)]²λγ/(1+γΔT)²
///   μ₃ = c₄γζ²(1−λ)/ΔT
///   μ₄ = c₃ξ²(1−λ)γ/ΔT
/// with ξ = (ΔT − γζΔT − ζγβ(1+ΔT)/(1−γβ))
///        / (1 + γ(1−β)ΔT + βΔT + ζγβ(1+ΔT)/(1−γβ)),
/// maximized over λ ∈ (0,1), η ∈ (0, ε₂/(γ(1−β))),
/// ζ ∈ (0, (1−γβ)/(γ(1+β−γβ))); ζ candidates with ξ ≤ 0 are rejected.
/// Requires γβ < 1. Throws NotPersistentlyExcitingError when ε₂ = 0.
RateReport rate_bound_na(const PEReport& pe, double beta, double gamma,
                         long delta_t, const RateSearchOptions& opts = {});

/// Result of checking V_k ≤ exp(−μ⌊k/ΔT⌋)·V₀·(1+tolerance). Index k is the
/// position in v_trace, so v_trace[0] must be V₀.
struct EnvelopeReport {
  bool holds = false;
  std::optional<long> first_violation_k;
  double max_ratio = 0.0;  // max over k of V_k / envelope_k
};

EnvelopeReport check_envelope(const std::vector<double>& v_trace, double mu,
                              long delta_t, double tolerance);

}  // namespace hotuner::analysis
