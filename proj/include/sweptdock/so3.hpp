// Low-discrepancy orientation sampling: the Super-Fibonacci sequence on the
// full quaternion 3-sphere for the global stage, and a geodesic-ball sampler
// for the local stage that replaces the radial law with inverse-transform
// sampling of the ball's true radial marginal so uniformity survives the
// restriction to a neighborhood.

#pragma once

#include "sweptdock/core.hpp"
#include "sweptdock/se3.hpp"

#include <algorithm>
#include <vector>

namespace sweptdock {

/// Irrational bases. phi/psi are the Super-Fibonacci pair; gamma (the
/// plastic number) drives the radial coordinate of the ball sampler.
struct SamplerBases {
  double phi = 1.41421356237309504880;      // sqrt(2)
  double psi = 1.533751168755204288118041;  // positive root of x^4 = x + 4
  double gamma = 1.32471795724474602596;    // plastic number, x^3 = x + 1
};

namespace so3detail {

inline double fract(double x) { return x - std::floor(x); }

}  // namespace so3detail

/// i-th of n Super-Fibonacci quaternions (deterministic, chunkable by index).
inline Quat super_fibonacci_sample(std::size_t i, std::size_t n,
                                   const SamplerBases& bases = {}) {
  const double s = static_cast<double>(i) + 0.5;
  const double t = s / static_cast<double>(n);
  const double d = 2.0 * kPi * s;
  const double r = std::sqrt(t);
  const double big_r = std::sqrt(1.0 - t);
  const double alpha = d / bases.phi;
  const double beta = d / bases.psi;
  return Quat(r * std::sin(alpha), r * std::cos(alpha), big_r * std::sin(beta),
              big_r * std::cos(beta));
}

/// n unit quaternions with low discrepancy on the full 3-sphere.
inline std::vector<Quat> super_fibonacci(std::size_t n, const SamplerBases& bases = {}) {
  if (n < 1) throw invalid_input("super_fibonacci: n must be >= 1");
  std::vector<Quat> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(super_fibonacci_sample(i, n, bases));
  return out;
}

/// Tabulated CDF of the ball's radial marginal rho(r) ~ r * L(r), with
/// L(r) = 2 acos(cos(theta) / sqrt(1 - r^2)) the admissible axial-angle
/// range at radius r. Supports inverse lookup for inverse-transform
/// sampling. The trapezoid cumulative makes F piecewise quadratic, so the
/// inverse solves the quadratic inside the bracketing interval instead of
/// interpolating linearly; that keeps the inverse within 1e-6 of the exact
/// radius even in the last interval where dF/dr vanishes like a square root.
class RadialCdfTable {
 public:
  RadialCdfTable(double theta, int table_size = 4096) : theta_(theta) {
    if (!(theta > 0.0 && theta < 0.5 * kPi)) {
      throw invalid_input("geodesic ball radius must satisfy 0 < theta < pi/2");
    }
    if (table_size < 8) throw invalid_input("radial CDF table too small");
    const double r_max = std::sin(theta);
    const double cos_theta = std::cos(theta);
    const std::size_t n = static_cast<std::size_t>(table_size);
    radius_.resize(n);
    density_.resize(n);
    cdf_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double r = r_max * static_cast<double>(i) / static_cast<double>(n - 1);
      radius_[i] = r;
      double big_r = std::sqrt(std::max(0.0, 1.0 - r * r));
      double ratio = big_r > 0.0 ? std::min(1.0, cos_theta / big_r) : 1.0;
      density_[i] = r * 2.0 * std::acos(ratio);
    }
    cdf_[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      cdf_[i] = cdf_[i - 1] +
                0.5 * (density_[i - 1] + density_[i]) * (radius_[i] - radius_[i - 1]);
    }
    const double z = cdf_.back();
    for (auto& f : cdf_) f /= z;
    for (auto& d : density_) d /= z;
    cdf_.back() = 1.0;
  }

  double theta() const { return theta_; }
  double max_radius() const { return radius_.back(); }

  /// F(r) consistent with the tabulated cumulative (piecewise quadratic).
  double cdf(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= radius_.back()) return 1.0;
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(radius_.begin(), radius_.end(), r) - radius_.begin());
    std::size_t lo = hi - 1;
    double dr = r - radius_[lo];
    double slope = (density_[hi] - density_[lo]) / (radius_[hi] - radius_[lo]);
    return cdf_[lo] + density_[lo] * dr + 0.5 * slope * dr * dr;
  }

  /// r = F^-1(u).
  double inverse(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return radius_.back();
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    if (hi == 0) return radius_.front();
    if (hi >= cdf_.size()) return radius_.back();
    std::size_t lo = hi - 1;
    const double target = u - cdf_[lo];
    const double width = radius_[hi] - radius_[lo];
    const double a = 0.5 * (density_[hi] - density_[lo]) / width;
    const double b = density_[lo];
    // Solve a dr^2 + b dr = target for dr in [0, width].
    double dr;
    if (std::abs(a) < 1e-300) {
      dr = b > 0.0 ? target / b : 0.0;
    } else {
      double disc = b * b + 4.0 * a * target;
      dr = disc <= 0.0 ? -b / (2.0 * a) : (2.0 * target) / (b + std::sqrt(disc));
    }
    return radius_[lo] + std::clamp(dr, 0.0, width);
  }

 private:
  double theta_;
  std::vector<double> radius_;
  std::vector<double> density_;  // normalized rho at the nodes
  std::vector<double> cdf_;
};

inline RadialCdfTable build_radial_cdf(double theta, int table_size = 4096) {
  return RadialCdfTable(theta, table_size);
}

/// i-th sample of the geodesic-ball sequence around q0 (radius theta in
/// quaternion geodesic distance, i.e. rotations up to 2*theta from q0).
inline Quat geoball_sf_sample(std::size_t i, const Quat& q0, const RadialCdfTable& table,
                              const SamplerBases& bases = {}) {
  const double theta = table.theta();
  const double s = static_cast<double>(i) + 0.5;
  const double u1 = so3detail::fract(s / bases.gamma);
  const double u2 = so3detail::fract(s / bases.phi);
  const double u3 = so3detail::fract(s / bases.psi);
  const double r = table.inverse(u1);
  const double big_r = std::sqrt(std::max(0.0, 1.0 - r * r));
  const double axial_range = 2.0 * std::acos(std::min(1.0, std::cos(theta) / big_r));
  const double alpha = (u2 - 0.5) * axial_range;
  const double beta = 2.0 * kPi * u3;
  Quat local(big_r * std::cos(alpha), big_r * std::sin(alpha), r * std::cos(beta),
             r * std::sin(beta));
  return q0 * local;
}

/// n quaternions inside the geodesic ball B(q0, theta); theta must match the
/// table's radius.
inline std::vector<Quat> geoball_sf(std::size_t n, const Quat& q0, double theta,
                                    const RadialCdfTable& table, const SamplerBases& bases = {}) {
  if (std::abs(theta - table.theta()) > 1e-12) {
    throw invalid_input("geoball_sf: theta does not match the radial CDF table");
  }
  Quat center = q0.normalized();
  std::vector<Quat> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(geoball_sf_sample(i, center, table, bases));
  return out;
}

/// Mean nearest-neighbor distance of a quaternion set, reported as rotation
/// angle (2x the quaternion geodesic distance). Brute force; used by the
/// sampler statistics checks and the dump-samples tooling.
inline double mean_nn_rotation_angle(const std::vector<Quat>& qs) {
  if (qs.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    double best = -1.0;  // max |dot| over neighbors
    for (std::size_t j = 0; j < qs.size(); ++j) {
      if (i == j) continue;
      double dot = std::abs(qs[i].w() * qs[j].w() + qs[i].x() * qs[j].x() +
                            qs[i].y() * qs[j].y() + qs[i].z() * qs[j].z());
      if (dot > best) best = dot;
    }
    total += 2.0 * std::acos(std::min(1.0, best));
  }
  return total / static_cast<double>(qs.size());
}

}  // namespace sweptdock
