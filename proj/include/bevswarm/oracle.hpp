#pragma once

#include <optional>

#include "bevswarm/geometry.hpp"

namespace bevswarm::oracle {

// Reference back-projection that avoids the fused (K R)^-1 cache: explicit
// pinhole inverse followed by the transposed rotation, step by step.
inline Eigen::Vector3d pixel_to_world_stepwise(double u, double v, double d,
                                               const CameraIntrinsics& intr,
                                               const CameraPose& pose) {
  const Eigen::Vector3d ray((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  return pose.R.transpose() * (ray * d - pose.T);
}

// Depth to the ground plane y = -H found by marching the pixel ray and
// bisecting the sign change. Returns nullopt when the forward ray never
// drops to the plane within march_limit.
inline std::optional<double> ray_ground_depth(double u, double v, const CameraIntrinsics& intr,
                                              const CameraPose& pose,
                                              double march_limit = 1e12) {
  const auto height_above_plane = [&](double d) {
    return pixel_to_world_stepwise(u, v, d, intr, pose).y() + pose.H;
  };
  const double f0 = height_above_plane(0.0);
  if (f0 <= 0.0) return std::nullopt;  // camera at or below the plane
  double lo = 0.0, hi = 1.0;
  while (height_above_plane(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > march_limit) return std::nullopt;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (height_above_plane(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Vertical slope of the pixel ray (world y per unit depth), used to decide
// whether a ray is decisively below the horizon.
inline double ray_vertical_slope(double u, double v, const CameraIntrinsics& intr,
                                 const CameraPose& pose) {
  const Eigen::Vector3d ray((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  return (pose.R.transpose() * ray).y();
}

}  // namespace bevswarm::oracle
