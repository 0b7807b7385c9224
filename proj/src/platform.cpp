#include "bevswarm/platform.hpp"

#include <cmath>
#include <numbers>

namespace bevswarm {

Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d& forward_local) {
  const Eigen::Vector3d z = forward_local.normalized();
  Eigen::Vector3d up(0, 1, 0);
  if (std::abs(z.dot(up)) > 0.999) up = Eigen::Vector3d(0, 0, 1);  // nadir fallback
  const Eigen::Vector3d x = up.cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;  // rows map local world -> camera (x right, z forward)
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  return r;
}

std::vector<Platform> default_constellation(const CameraIntrinsics& intr, double ring_radius,
                                            double aim_range) {
  const double altitudes[5] = {30.0, 30.0, 30.0, 50.0, 70.0};
  std::vector<Platform> platforms;
  for (int i = 0; i < 5; ++i) {
    const double angle = std::numbers::pi + i * (2.0 * std::numbers::pi / 5.0);
    Platform p;
    p.id = i;
    p.position = Eigen::Vector3d(ring_radius * std::cos(angle), altitudes[i],
                                 ring_radius * std::sin(angle));
    // Local +z points from the platform toward the intersection center.
    p.yaw = std::atan2(-std::cos(angle), -std::sin(angle));

    // Aim between the platform and the center so the dense central region
    // sits mid-image; the far side is covered by the opposite platforms.
    const Eigen::Vector3d target_global(aim_range * std::cos(angle), 0.0,
                                        aim_range * std::sin(angle));
    const FrameTransform to_local = p.global_to_local();
    const Eigen::Vector3d target_local = to_local.apply(target_global);

    p.rig.intrinsics = intr;
    p.rig.pose.R = look_at_rotation(target_local);
    p.rig.pose.T = Eigen::Vector3d::Zero();
    p.rig.pose.H = altitudes[i];
    platforms.push_back(p);
  }
  return platforms;
}

}  // namespace bevswarm
