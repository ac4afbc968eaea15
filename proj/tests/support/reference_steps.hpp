#pragma once

// Straight-line restatements of the five update laws, written directly against
// Eigen expressions. They intentionally share no code with the library (whose
// steppers use explicit left-to-right loops) so that agreement between the two
// is meaningful evidence, not tautology.

#include <Eigen/Dense>

namespace refimpl {

using Vec = Eigen::VectorXd;

inline double nk(const Vec& phi) { return 1.0 + phi.squaredNorm(); }

inline Vec grad(const Vec& theta, const Vec& phi, double y) {
  return phi * (phi.dot(theta) - y);
}

inline Vec ngd(const Vec& theta, const Vec& phi, double y, double alpha) {
  return theta - alpha / nk(phi) * grad(theta, phi, y);
}

struct Pair {
  Vec theta;
  Vec vartheta;
};

inline Pair hb(const Vec& theta, const Vec& vartheta, const Vec& phi, double y,
               double beta, double gamma) {
  const Vec theta_next = theta - beta * (theta - vartheta);
  const Vec vartheta_next = vartheta - gamma / nk(phi) * grad(theta_next, phi, y);
  return {theta_next, vartheta_next};
}

struct NaTriple {
  Vec theta;
  Vec vartheta;
  Vec theta_bar;
};

inline NaTriple na(const Vec& theta, const Vec& vartheta, const Vec& phi, double y,
                   double beta, double gamma) {
  const Vec theta_bar = theta - gamma * beta / nk(phi) * grad(theta, phi, y);
  const Vec theta_next = theta_bar - beta * (theta_bar - vartheta);
  const Vec vartheta_next = vartheta - gamma / nk(phi) * grad(theta_next, phi, y);
  return {theta_next, vartheta_next, theta_bar};
}

inline Vec hb_classical(const Vec& theta, const Vec& theta_prev, const Vec& phi,
                        double y, double beta_bar, double gamma_bar) {
  return theta - gamma_bar / nk(phi) * grad(theta, phi, y) +
         beta_bar * (theta - theta_prev);
}

inline Vec nesterov_classical(const Vec& theta, const Vec& theta_prev,
                              const Vec& phi, double y, double beta_bar,
                              double gamma_bar) {
  const Vec lookahead = theta + beta_bar * (theta - theta_prev);
  return theta - gamma_bar / nk(phi) * grad(lookahead, phi, y) +
         beta_bar * (theta - theta_prev);
}

}  // namespace refimpl
