#pragma once

#include <cstdint>
#include <memory>
#include <span>

#include "bevswarm/geometry.hpp"
#include "bevswarm/tensor.hpp"

namespace bevswarm {

// Metric window and resolution of the BEV raster. The first grid axis
// indexes the world x axis, the second the world z axis (the two ground
// axes of the y-up world frame); the vertical axis is the pooled one and
// is bounded by [z_min, z_max) in height above the ground plane.
struct GridSpec {
  double x_min = -75.0, x_max = 75.0;
  double y_min = -75.0, y_max = 75.0;
  double z_min = 0.0, z_max = 10.0;
  double resolution = 0.75;
  int depth_bins = 100;

  int size_x() const { return static_cast<int>(std::ceil((x_max - x_min) / resolution)); }
  int size_y() const { return static_cast<int>(std::ceil((y_max - y_min) / resolution)); }

  double cell_center_x(int ix) const { return x_min + (ix + 0.5) * resolution; }
  double cell_center_y(int iy) const { return y_min + (iy + 0.5) * resolution; }

  void validate() const {
    if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min))
      throw std::invalid_argument("grid: empty metric window");
    if (!(resolution > 0.0)) throw std::invalid_argument("grid: resolution must be positive");
    if (depth_bins <= 0) throw std::invalid_argument("grid: depth_bins must be positive");
  }

  bool operator==(const GridSpec&) const = default;
};

struct BevGrid {
  Tensor3 data;  // (X, Y, C)
  GridSpec spec;
};

// Pixel-wise categorical depth distribution over relative-depth bins,
// stored as (W, H, D).
bool is_depth_distribution(const Tensor3& probs, double tol = 1e-6);

// Maps a pixel's feature fiber to a categorical distribution over
// depth_bins relative-depth bins. Implementations may also use the pixel
// position (the oracle does; the untrained estimator ignores it).
class DepthEstimator {
 public:
  virtual ~DepthEstimator() = default;
  virtual int bins() const = 0;
  virtual void estimate(int u, int v, std::span<const float> feature, std::span<float> probs) const = 0;
};

// One-hot distribution at the bin of the true depth, as a fraction of the
// per-pixel depth upper bound.
class OracleDepthEstimator : public DepthEstimator {
 public:
  OracleDepthEstimator(int width, int height, int bins, std::vector<double> true_depth,
                       const DepthBoundMap* bounds);
  int bins() const override { return bins_; }
  void estimate(int u, int v, std::span<const float> feature, std::span<float> probs) const override;

 private:
  int width_, height_, bins_;
  std::vector<double> true_depth_;
  const DepthBoundMap* bounds_;
};

// Untrained stand-in: seeded linear projection of the feature fiber
// followed by a max-subtracted softmax.
class SeededLinearSoftmaxEstimator : public DepthEstimator {
 public:
  SeededLinearSoftmaxEstimator(int feature_channels, int bins, std::uint64_t seed);
  int bins() const override { return bins_; }
  void estimate(int u, int v, std::span<const float> feature, std::span<float> probs) const override;

 private:
  int channels_, bins_;
  std::vector<float> weights_;  // bins x channels, row-major
};

// Runs the estimator over every pixel. Throws std::runtime_error naming the
// pixel if the estimator emits a non-finite value.
Tensor3 estimate_relative_depth(const Tensor3& features, const DepthEstimator& estimator);

// Center of relative bin k scaled by the pixel's depth upper bound.
double bin_to_metric_depth(int k, int bins, double depth_bound);

// Outer product of features and depth probabilities: (W, H, D, C).
Tensor4 lift_to_frustum(const Tensor3& features, const Tensor3& depth);

struct SplatStats {
  std::int64_t dropped_cells = 0;
  double dropped_mass = 0.0;
};

// Optional rigid change of frame applied to lifted points before binning,
// used when splatting one platform's observations into another's grid.
struct FrameTransform {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rot * p + t; }
};

// Projects every frustum cell at its bin's metric depth and sum-pools into
// BEV pillars. Cells landing outside the metric window are dropped and
// counted. Deterministic: accumulation follows (u, v, k, c) order.
BevGrid splat_to_bev(const Tensor4& frustum, const CameraIntrinsics& intr, const CameraPose& pose,
                     const GridSpec& spec, SplatStats* stats = nullptr);

// Fused lift + splat that never materializes the frustum. Bitwise identical
// to lift_to_frustum followed by splat_to_bev.
void lift_and_splat_into(BevGrid& grid, const Tensor3& features, const Tensor3& depth,
                         const ProjectionCache& cache, const DepthBoundMap& bounds,
                         double target_altitude, const FrameTransform& transform,
                         SplatStats* stats = nullptr);

BevGrid lift_and_splat(const Tensor3& features, const Tensor3& depth, const CameraIntrinsics& intr,
                       const CameraPose& pose, const GridSpec& spec, SplatStats* stats = nullptr);

}  // namespace bevswarm
