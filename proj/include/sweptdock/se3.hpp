// Quaternion and SE(3) / Lie-algebra operations used by every stage:
// geodesic distance on the quaternion sphere, the se(3) exponential with the
// SO(3) left Jacobian, and the anchored left-perturbation pose update.

#pragma once

#include "sweptdock/core.hpp"

namespace sweptdock {

/// Sign-canonical representative of a rotation: w >= 0, and if w == 0 the
/// first nonzero vector component is positive. Used on all serialization
/// paths so the double cover never leaks into output files.
inline Quat canonicalized(const Quat& q) {
  const double c[4] = {q.w(), q.x(), q.y(), q.z()};
  for (int i = 0; i < 4; ++i) {
    if (c[i] > 0.0) break;
    if (c[i] < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

/// Geodesic distance on S^3 modulo the double cover: arccos(|<q1,q2>|),
/// i.e. half the relative rotation angle. Range [0, pi/2].
inline double quat_geodesic_distance(const Quat& q1, const Quat& q2) {
  Quat a = q1.normalized();
  Quat b = q2.normalized();
  double dot = std::abs(a.w() * b.w() + a.x() * b.x() + a.y() * b.y() + a.z() * b.z());
  return std::acos(std::min(dot, 1.0));
}

/// Twist xi = [upsilon; omega], translation in mm and rotation in rad.
struct Twist {
  Vec3 upsilon = Vec3::Zero();
  Vec3 omega = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 v;
    v << upsilon, omega;
    return v;
  }

  static Twist from_stacked(const Vec6& v) {
    return Twist{v.head<3>(), v.tail<3>()};
  }
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

inline Quat so3_exp(const Vec3& omega) {
  double angle = omega.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
    q.normalize();
    return q;
  }
  double half = 0.5 * angle;
  double s = std::sin(half) / angle;
  return Quat(std::cos(half), s * omega.x(), s * omega.y(), s * omega.z());
}

/// SO(3) left Jacobian V(omega) = I + (1-cos t)/t^2 W + (t-sin t)/t^3 W^2.
/// Below 1e-4 rad the closed form loses digits to cancellation, so the
/// series expansion is used; both branches agree to ~1e-12 at the switch.
inline Mat3 left_jacobian(const Vec3& omega) {
  double t = omega.norm();
  Mat3 w = skew(omega);
  double a, b;
  if (t < 1e-4) {
    double t2 = t * t;
    a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    double t2 = t * t;
    a = (1.0 - std::cos(t)) / t2;
    b = (t - std::sin(t)) / (t2 * t);
  }
  return Mat3::Identity() + a * w + b * w * w;
}

/// se(3) exponential: rotation exp(omega^) and translation V(omega) upsilon.
inline std::pair<Quat, Vec3> exp_se3(const Twist& xi) {
  return {so3_exp(xi.omega), left_jacobian(xi.omega) * xi.upsilon};
}

/// Rigid transform, rotation stored as a unit quaternion. x_world = R x + p.
struct Pose {
  Quat q = Quat::Identity();
  Vec3 p = Vec3::Zero();

  Pose() = default;
  Pose(const Quat& rotation, const Vec3& translation) : q(rotation.normalized()), p(translation) {}

  static Pose identity() { return Pose(); }

  Vec3 operator*(const Vec3& x) const { return q * x + p; }

  Pose operator*(const Pose& other) const { return Pose(q * other.q, q * other.p + p); }

  Pose inverse() const {
    Quat qi = q.conjugate();
    return Pose(qi, qi * (-p));
  }

  Mat3 rotation_matrix() const { return q.toRotationMatrix(); }
};

/// Left perturbation of T0 by exp(xi), pivoted at the object-frame anchor a:
///   R = dR R0,  p = p0 + dp + (I - dR) R0 a.
/// With xi = 0 this returns T0 exactly; a pure rotation leaves the world
/// position of the anchor fixed.
inline Pose anchored_update(const Pose& T0, const Twist& xi, const Vec3& anchor) {
  auto [dq, dp] = exp_se3(xi);
  Vec3 r0a = T0.q * anchor;
  Vec3 p = T0.p + dp + (r0a - dq * r0a);
  return Pose(dq * T0.q, p);
}

/// Rotation angle (rad) of the relative rotation between two quaternions.
inline double rotation_angle_between(const Quat& q1, const Quat& q2) {
  return 2.0 * quat_geodesic_distance(q1, q2);
}

}  // namespace sweptdock
