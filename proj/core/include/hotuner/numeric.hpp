#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace hotuner {

/// Parameter / regressor vectors are dense column vectors of double.
using ParameterVector = Eigen::VectorXd;

/// Strict left-to-right dot product.
///
/// All inner products on the sample/step hot path go through this helper
/// instead of Eigen's reductions so that results are reproducible: Eigen is
/// free to vectorize and re-associate, which changes the rounding of the
/// accumulation and with it every downstream iterate.
inline double dot_lr(const ParameterVector& a, const ParameterVector& b) {
  double acc = 0.0;
  const Eigen::Index n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

/// Left-to-right squared Euclidean norm (same rationale as dot_lr).
inline double squared_norm_lr(const ParameterVector& a) {
  double acc = 0.0;
  const Eigen::Index n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += a[i] * a[i];
  }
  return acc;
}

/// Left-to-right Euclidean norm.
inline double norm_lr(const ParameterVector& a) {
  return std::sqrt(squared_norm_lr(a));
}

/// True iff every component is finite (no NaN, no Inf).
inline bool all_finite(const ParameterVector& a) {
  const Eigen::Index n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(a[i])) return false;
  }
  return true;
}

/// SplitMix64: tiny, seedable, platform-independent PRNG. Used wherever the
/// library needs "random" restarts so results do not depend on the standard
/// library's distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (deterministic across platforms up to
  /// libm rounding; no rejection loop, so the consumption pattern is fixed).
  double next_normal() {
    // Shift u1 away from zero so the log is always finite.
    const double u1 = next_double() + 0x1.0p-54;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace hotuner
