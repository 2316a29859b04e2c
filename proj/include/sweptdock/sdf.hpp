// Signed-distance representation of the probe. The registration pipeline
// only needs the capped cylinder, but the interface is shape-agnostic so a
// sphere or capsule probe drops in without touching callers.

#pragma once

#include "sweptdock/core.hpp"

#include <memory>
#include <sstream>

namespace sweptdock {

struct SdfSample {
  double value = 0.0;   // signed distance, mm
  Vec3 gradient = Vec3::UnitZ();  // unit, except on the measure-zero medial axis
};

class SdfShape {
 public:
  virtual ~SdfShape() = default;

  /// Signed distance and gradient at a point in the shape's local frame.
  virtual SdfSample eval(const Vec3& x) const = 0;

  double value(const Vec3& x) const { return eval(x).value; }

  /// Radius of a sphere around the local origin containing the shape.
  virtual double bounding_radius() const = 0;

  /// Tight local-frame box around the shape's interior.
  virtual Aabb local_aabb() const = 0;

  /// Human-readable spec string, e.g. "cylinder:r=0.7,l=20".
  virtual std::string describe() const = 0;
};

/// 1 iff the point is inside or on the surface (value <= 0). The swept
/// volume must cover boundary contacts, so the boundary counts as occupied.
inline int occupancy(const SdfShape& shape, const Vec3& x) {
  return shape.value(x) <= 0.0 ? 1 : 0;
}

/// Finite capped cylinder, axis along local +z, centered at the origin.
class CylinderProbe final : public SdfShape {
 public:
  CylinderProbe(double radius, double half_length) : radius_(radius), half_length_(half_length) {
    if (radius <= 0.0 || half_length <= 0.0) {
      throw invalid_input("cylinder probe requires radius > 0 and half_length > 0");
    }
  }

  double radius() const { return radius_; }
  double half_length() const { return half_length_; }

  SdfSample eval(const Vec3& x) const override {
    const double lateral = std::hypot(x.x(), x.y());
    const double rho_r = lateral - radius_;
    const double rho_z = std::abs(x.z()) - half_length_;
    const double sz = x.z() >= 0.0 ? 1.0 : -1.0;
    // Radial direction; the axis itself is a medial-axis point, pick +x there.
    Vec3 radial = lateral > 1e-15 ? Vec3(x.x() / lateral, x.y() / lateral, 0.0) : Vec3(1.0, 0.0, 0.0);

    SdfSample s;
    if (rho_r > 0.0 && rho_z > 0.0) {
      // Outside the rim edge.
      s.value = std::hypot(rho_r, rho_z);
      s.gradient = (rho_r * radial + Vec3(0.0, 0.0, rho_z * sz)) / s.value;
    } else if (rho_r > 0.0) {
      s.value = rho_r;
      s.gradient = radial;
    } else if (rho_z > 0.0) {
      s.value = rho_z;
      s.gradient = Vec3(0.0, 0.0, sz);
    } else if (rho_r >= rho_z) {
      // Inside, lateral wall nearest (ties go radial; the tie set has measure zero).
      s.value = rho_r;
      s.gradient = radial;
    } else {
      s.value = rho_z;
      s.gradient = Vec3(0.0, 0.0, sz);
    }
    return s;
  }

  double bounding_radius() const override { return std::hypot(radius_, half_length_); }

  Aabb local_aabb() const override {
    Aabb box;
    box.expand(Vec3(-radius_, -radius_, -half_length_));
    box.expand(Vec3(radius_, radius_, half_length_));
    return box;
  }

  std::string describe() const override {
    std::ostringstream ss;
    ss << "cylinder:r=" << radius_ << ",l=" << 2.0 * half_length_;
    return ss.str();
  }

 private:
  double radius_;
  double half_length_;
};

/// Parses the CLI probe spec "cylinder:r=<mm>,l=<mm>" (l is the full length).
inline std::unique_ptr<SdfShape> parse_probe_spec(const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  if (kind != "cylinder") {
    throw invalid_input("unknown probe shape '" + kind + "' (supported: cylinder:r=<mm>,l=<mm>)");
  }
  if (colon == std::string::npos) throw invalid_input("probe spec missing parameters: " + spec);
  double r = -1.0, l = -1.0;
  std::string params = spec.substr(colon + 1);
  std::istringstream ss(params);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw invalid_input("malformed probe parameter '" + item + "'");
    std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw invalid_input("malformed probe parameter value '" + item + "'");
    }
    if (key == "r") {
      r = value;
    } else if (key == "l") {
      l = value;
    } else {
      throw invalid_input("unknown probe parameter '" + key + "'");
    }
  }
  if (r <= 0.0 || l <= 0.0) {
    throw invalid_input("probe spec requires r > 0 and l > 0: " + spec);
  }
  return std::make_unique<CylinderProbe>(r, 0.5 * l);
}

}  // namespace sweptdock
