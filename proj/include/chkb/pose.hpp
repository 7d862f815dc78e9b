#pragma once

#include <array>
#include <span>

#include <Eigen/Geometry>

namespace chkb {

// Rigid transform: unit quaternion rotation followed by a translation (meters).
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) {
    Pose p;
    p.translation = t;
    return p;
  }

  Pose operator*(const Pose& rhs) const {
    Pose out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  Pose inverse() const {
    Pose out;
    out.rotation = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    return out;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  // Bitwise equality on all seven components.
  bool operator==(const Pose& rhs) const {
    return rotation.w() == rhs.rotation.w() && rotation.x() == rhs.rotation.x() &&
           rotation.y() == rhs.rotation.y() && rotation.z() == rhs.rotation.z() &&
           translation == rhs.translation;
  }

  // (w, x, y, z, tx, ty, tz, 0.0): the serialized array layout.
  std::array<double, 8> to_array() const {
    return {rotation.w(), rotation.x(), rotation.y(), rotation.z(),
            translation.x(), translation.y(), translation.z(), 0.0};
  }
};

// Parses a 7- or 8-element pose array; the 8th element is reserved and ignored.
// Quaternions off unit norm by more than 1e-12 but within 1e-3 are renormalized;
// anything further is rejected.
// Throws std::invalid_argument with a short reason.
Pose pose_from_array(std::span<const double> values);

// Translation distance and rotation angle (radians) between two poses.
double translation_distance(const Pose& a, const Pose& b);
double rotation_angle(const Pose& a, const Pose& b);

bool near(const Pose& a, const Pose& b, double translation_tol, double angle_tol_rad);

}  // namespace chkb
