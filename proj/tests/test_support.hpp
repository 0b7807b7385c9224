#pragma once

#include <Eigen/Geometry>

#include "bevswarm/geometry.hpp"
#include "bevswarm/rng.hpp"
#include "bevswarm/tensor.hpp"

namespace bevswarm::testing {

inline CameraIntrinsics random_intrinsics(SplitMix64& rng) {
  CameraIntrinsics intr;
  intr.width = 192;
  intr.height = 80;
  intr.fx = rng.next_double(80.0, 400.0);
  intr.fy = rng.next_double(80.0, 400.0);
  intr.cx = rng.next_double(0.3, 0.7) * intr.width;
  intr.cy = rng.next_double(0.3, 0.7) * intr.height;
  return intr;
}

inline CameraPose random_pose(SplitMix64& rng) {
  CameraPose pose;
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1),
                           rng.next_double(-1, 1));
  } while (q.norm() < 1e-3);
  pose.R = q.normalized().toRotationMatrix();
  pose.T = Eigen::Vector3d(rng.next_double(-20, 20), rng.next_double(-20, 20),
                           rng.next_double(-20, 20));
  pose.H = rng.next_double(5.0, 100.0);
  return pose;
}

// Downward-pitched camera at altitude h, forward along local +z.
inline CameraPose oblique_pose(double h, double pitch_rad) {
  CameraPose pose;
  const double c = std::cos(pitch_rad), s = std::sin(pitch_rad);
  Eigen::Matrix3d r;
  // rows: camera x (right), y, z (forward pitched down)
  r.row(0) = Eigen::Vector3d(1, 0, 0);
  r.row(1) = Eigen::Vector3d(0, c, s);
  r.row(2) = Eigen::Vector3d(0, -s, c);
  pose.R = r;
  pose.T = Eigen::Vector3d::Zero();
  pose.H = h;
  return pose;
}

inline Tensor3 random_tensor(SplitMix64& rng, int d0, int d1, int d2, float lo = -1.0f,
                             float hi = 1.0f) {
  Tensor3 t(d0, d1, d2);
  for (float& v : t.flat()) v = rng.next_float(lo, hi);
  return t;
}

inline bool bitwise_equal(const Tensor3& a, const Tensor3& b) {
  if (!a.same_shape(b)) return false;
  const auto fa = a.flat();
  const auto fb = b.flat();
  for (std::size_t i = 0; i < fa.size(); ++i)
    if (fa[i] != fb[i]) return false;
  return true;
}

}  // namespace bevswarm::testing
