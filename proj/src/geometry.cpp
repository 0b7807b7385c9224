#include "bevswarm/geometry.hpp"

namespace bevswarm {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw CalibrationError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw CalibrationError("intrinsics: sensor size must be positive");
  if (!(cx > 0.0 && cx < width)) throw CalibrationError("intrinsics: cx outside sensor");
  if (!(cy > 0.0 && cy < height)) throw CalibrationError("intrinsics: cy outside sensor");
  // K is upper triangular, so invertibility reduces to fx * fy != 0, which
  // the positivity checks already guarantee.
}

void CameraPose::validate() const {
  const Eigen::Matrix3d gram = R.transpose() * R;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw CalibrationError("pose: rotation is not orthonormal");
  if (std::abs(R.determinant() - 1.0) > 1e-9)
    throw CalibrationError("pose: rotation determinant is not +1");
  if (!(H > 0.0)) throw CalibrationError("pose: altitude must be positive");
}

ProjectionCache build_projection_cache(const CameraIntrinsics& intr, const CameraPose& pose) {
  intr.validate();
  pose.validate();
  ProjectionCache cache;
  // (K R)^-1 = R^-1 K^-1; inverting the product keeps the two-factor
  // structure out of the hot path.
  cache.M = (intr.matrix() * pose.R).inverse();
  cache.N = pose.R.transpose() * (-pose.T);
  return cache;
}

std::optional<PixelDepth> world_to_pixel(const Eigen::Vector3d& p, const CameraIntrinsics& intr,
                                         const CameraPose& pose) {
  const Eigen::Vector3d cam = pose.R * p + pose.T;
  if (!(cam.z() > 0.0)) return std::nullopt;
  PixelDepth out;
  out.u = intr.fx * cam.x() / cam.z() + intr.cx;
  out.v = intr.fy * cam.y() / cam.z() + intr.cy;
  out.d = cam.z();
  return out;
}

DepthBound depth_upper_bound(double u, double v, const ProjectionCache& cache, double H,
                             double d_max) {
  const double denom = cache.M(1, 0) * u + cache.M(1, 1) * v + cache.M(1, 2);
  if (std::abs(denom) < kHorizonEpsilon) return {d_max, true};
  const double d = (-H - cache.N(1)) / denom;
  if (!(d > 0.0)) return {d_max, true};
  return {d, false};
}

DepthBoundMap compute_depth_bounds(const CameraIntrinsics& intr, const ProjectionCache& cache,
                                   double H, double d_max) {
  DepthBoundMap map;
  map.width = intr.width;
  map.height = intr.height;
  map.depth.resize(static_cast<std::size_t>(intr.width) * intr.height);
  map.clamped.resize(map.depth.size());
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const DepthBound b = depth_upper_bound(u + 0.5, v + 0.5, cache, H, d_max);
      const std::size_t i = static_cast<std::size_t>(v) * intr.width + u;
      map.depth[i] = b.depth;
      map.clamped[i] = b.clamped ? 1 : 0;
    }
  }
  return map;
}

}  // namespace bevswarm
