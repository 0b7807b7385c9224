#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

namespace bevswarm {

// Raised when intrinsics or extrinsics fail their invariants.
class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  int width = 0, height = 0;  // sensor size, pixels

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  // Throws CalibrationError if any invariant is violated.
  void validate() const;
};

// Camera extrinsics in the platform's world frame: x_cam = R * x_world + T.
// The world frame is y-up with the ground plane at y = -H, H being the
// platform altitude above ground.
struct CameraPose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d T = Eigen::Vector3d::Zero();
  double H = 1.0;  // altitude above ground plane, meters

  void validate() const;
};

// Precomputed back-projection: world = M * (u, v, 1)^T * d + N with
// M = R^-1 K^-1 and N = R^-1 (-T).
struct ProjectionCache {
  Eigen::Matrix3d M;
  Eigen::Vector3d N;
};

// Result of a pixel -> ground-plane depth query. `clamped` marks rays at or
// above the horizon whose depth was replaced by the configured maximum.
struct DepthBound {
  double depth = 0.0;
  bool clamped = false;
};

struct PixelDepth {
  double u = 0.0, v = 0.0;  // continuous pixel coordinates
  double d = 0.0;           // camera-frame depth, meters
};

inline constexpr double kHorizonEpsilon = 1e-9;
inline constexpr double kDefaultMaxDepth = 300.0;  // >= diagonal of the 150 m x 150 m area

ProjectionCache build_projection_cache(const CameraIntrinsics& intr, const CameraPose& pose);

// Eq.-style back-projection of pixel (u, v) at camera depth d.
inline Eigen::Vector3d pixel_to_world(double u, double v, double d, const ProjectionCache& cache) {
  return cache.M * Eigen::Vector3d(u, v, 1.0) * d + cache.N;
}

// Forward projection. Returns nullopt for points at camera-frame depth <= 0.
std::optional<PixelDepth> world_to_pixel(const Eigen::Vector3d& p, const CameraIntrinsics& intr,
                                         const CameraPose& pose);

// Depth along the (u, v) ray to the ground plane y = -H. Rays whose
// denominator is within kHorizonEpsilon of zero, or whose solution is
// non-positive, clamp to d_max with the flag set.
DepthBound depth_upper_bound(double u, double v, const ProjectionCache& cache, double H,
                             double d_max = kDefaultMaxDepth);

// Per-pixel depth bounds sampled at pixel centers (u + 0.5, v + 0.5).
struct DepthBoundMap {
  int width = 0, height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> clamped;

  double bound(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  bool is_clamped(int u, int v) const { return clamped[static_cast<std::size_t>(v) * width + u] != 0; }
};

DepthBoundMap compute_depth_bounds(const CameraIntrinsics& intr, const ProjectionCache& cache,
                                   double H, double d_max = kDefaultMaxDepth);

}  // namespace bevswarm
