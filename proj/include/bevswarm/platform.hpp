#pragma once

#include <vector>

#include "bevswarm/bev.hpp"
#include "bevswarm/calibration.hpp"
#include "bevswarm/codec.hpp"

namespace bevswarm {

// One observation platform. The platform's local world frame has its origin
// at the platform, axes equal to the global frame rotated by yaw about the
// vertical; the ground plane sits at local y = -H. The camera is mounted at
// the platform origin, so the rig extrinsics are local-frame rotations with
// T = 0.
struct Platform {
  int id = 0;
  CameraCalibration rig;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // global; y is the altitude
  double yaw = 0.0;                                    // local -> global, about vertical

  Eigen::Matrix3d yaw_matrix() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Eigen::Matrix3d r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
  }

  FrameTransform local_to_global() const { return {yaw_matrix(), position}; }
  FrameTransform global_to_local() const {
    const Eigen::Matrix3d rt = yaw_matrix().transpose();
    return {rt, -(rt * position)};
  }

  PacketPose packet_pose() const {
    PacketPose p;
    p.R = yaw_matrix().cast<float>();
    p.T = position.cast<float>();
    p.H = static_cast<float>(rig.pose.H);
    return p;
  }
};

// Camera extrinsics looking from `eye_local` toward `target_local`,
// vertical-up reference. Proper rotation; image handedness is internal.
Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d& forward_local);

// Five platforms on a ring around the origin, altitudes {30, 30, 30, 50, 70},
// cameras aimed at the intersection center. Platform 0 is the conventional
// ego.
std::vector<Platform> default_constellation(const CameraIntrinsics& intr, double ring_radius = 58.0,
                                            double aim_range = 18.0);

}  // namespace bevswarm
