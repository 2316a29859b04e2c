// C1 proximity scoring window s(d) for the continuous refinement stage:
// cosine-squared reward outside, cubic blend through shallow penetration,
// linear penalty past the inner threshold.

#pragma once

#include "sweptdock/core.hpp"

namespace sweptdock {

struct ScoringParams {
  double tau_out = 0.2;  // outer threshold, mm
  double tau_in = 0.03;  // inner threshold (penalty onset depth), mm
  double slope = 15.0;   // linear penalty slope k

  // Audit switch: the uncorrected published cubic coefficients, which break
  // the C1 joint at t = -r. Kept only so the regression test can document
  // the discontinuity; never use in production.
  bool printed_coefficients = false;

  double ratio() const { return tau_in / tau_out; }

  void validate() const {
    if (tau_out <= 0.0 || tau_in <= 0.0) throw invalid_input("scoring thresholds must be positive");
    if (slope <= 0.0) throw invalid_input("scoring penalty slope must be positive");
  }

  /// Cubic branch coefficients for s(t) = A t^3 + B t^2 + 1 on (-r, 0].
  /// Solving {s(-r) = 0, s'(-r) = k} gives A = k/r^2 - 2/r^3 and
  /// B = k/r - 3/r^2; both joints at t = 0 are C1 for any A, B.
  void cubic_coefficients(double& A, double& B) const {
    const double r = ratio();
    if (printed_coefficients) {
      A = slope / (r * r) + 2.0 / (r * r * r);
      B = -slope / r - 3.0 / (r * r);
    } else {
      A = slope / (r * r) - 2.0 / (r * r * r);
      B = slope / r - 3.0 / (r * r);
    }
  }
};

struct ScoreValue {
  double s = 0.0;
  double ds_dd = 0.0;  // derivative w.r.t. the distance in mm
};

/// Value and derivative of the scoring window at signed distance d.
inline ScoreValue score(double d, const ScoringParams& params) {
  const double t = d / params.tau_out;
  const double r = params.ratio();
  ScoreValue out;
  if (t > 1.0) {
    return out;
  }
  if (t > 0.0) {
    const double half_pi_t = 0.5 * kPi * t;
    const double c = std::cos(half_pi_t);
    out.s = c * c;
    out.ds_dd = -0.5 * kPi * std::sin(kPi * t) / params.tau_out;
    return out;
  }
  if (t > -r) {
    double A, B;
    params.cubic_coefficients(A, B);
    out.s = (A * t + B) * t * t + 1.0;
    out.ds_dd = (3.0 * A * t + 2.0 * B) * t / params.tau_out;
    return out;
  }
  out.s = params.slope * (t + r);
  out.ds_dd = params.slope / params.tau_out;
  return out;
}

}  // namespace sweptdock
