#include "chkb/pose.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chkb {

Pose pose_from_array(std::span<const double> values) {
  if (values.size() != 7 && values.size() != 8)
    throw std::invalid_argument("pose array must have 7 or 8 elements, got " +
                                std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("pose array contains a non-finite value");
  Eigen::Quaterniond q(values[0], values[1], values[2], values[3]);
  const double norm = q.norm();
  if (std::abs(norm - 1.0) > 1e-3)
    throw std::invalid_argument("quaternion norm " + std::to_string(norm) + " is not unit");
  // Already-unit input is kept bit for bit so reserialization is a fixed point.
  if (std::abs(norm - 1.0) > 1e-12) q.normalize();
  Pose p;
  p.rotation = q;
  p.translation = Eigen::Vector3d(values[4], values[5], values[6]);
  return p;
}

double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation - b.translation).norm();
}

double rotation_angle(const Pose& a, const Pose& b) {
  return a.rotation.angularDistance(b.rotation);
}

bool near(const Pose& a, const Pose& b, double translation_tol, double angle_tol_rad) {
  return translation_distance(a, b) <= translation_tol && rotation_angle(a, b) <= angle_tol_rad;
}

}  // namespace chkb
