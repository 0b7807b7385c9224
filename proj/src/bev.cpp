#include "bevswarm/bev.hpp"

#include <cmath>

#include "bevswarm/rng.hpp"

namespace bevswarm {

bool is_depth_distribution(const Tensor3& probs, double tol) {
  for (int u = 0; u < probs.d0(); ++u) {
    for (int v = 0; v < probs.d1(); ++v) {
      double sum = 0.0;
      for (float p : probs.fiber(u, v)) {
        if (!(p >= 0.0f) || !std::isfinite(p)) return false;
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol) return false;
    }
  }
  return true;
}

OracleDepthEstimator::OracleDepthEstimator(int width, int height, int bins,
                                           std::vector<double> true_depth,
                                           const DepthBoundMap* bounds)
    : width_(width), height_(height), bins_(bins), true_depth_(std::move(true_depth)),
      bounds_(bounds) {
  if (true_depth_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("oracle depth: depth map size mismatch");
}

void OracleDepthEstimator::estimate(int u, int v, std::span<const float>,
                                    std::span<float> probs) const {
  std::fill(probs.begin(), probs.end(), 0.0f);
  const double d = true_depth_[static_cast<std::size_t>(v) * width_ + u];
  const double bound = bounds_->bound(u, v);
  int k = static_cast<int>(std::floor(bins_ * d / bound));
  k = std::clamp(k, 0, bins_ - 1);
  probs[static_cast<std::size_t>(k)] = 1.0f;
}

SeededLinearSoftmaxEstimator::SeededLinearSoftmaxEstimator(int feature_channels, int bins,
                                                           std::uint64_t seed)
    : channels_(feature_channels), bins_(bins) {
  SplitMix64 rng(seed);
  const float scale = 1.0f / std::sqrt(static_cast<float>(feature_channels));
  weights_.resize(static_cast<std::size_t>(bins) * feature_channels);
  for (float& w : weights_) w = rng.next_float(-scale, scale);
}

void SeededLinearSoftmaxEstimator::estimate(int, int, std::span<const float> feature,
                                            std::span<float> probs) const {
  std::vector<double> logits(static_cast<std::size_t>(bins_));
  for (int k = 0; k < bins_; ++k) {
    double acc = 0.0;
    const float* row = weights_.data() + static_cast<std::size_t>(k) * channels_;
    for (int c = 0; c < channels_; ++c) acc += static_cast<double>(row[c]) * feature[static_cast<std::size_t>(c)];
    logits[static_cast<std::size_t>(k)] = acc;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& l : logits) {
    l = std::exp(l - m);
    denom += l;
  }
  for (int k = 0; k < bins_; ++k) probs[static_cast<std::size_t>(k)] = static_cast<float>(logits[static_cast<std::size_t>(k)] / denom);
}

Tensor3 estimate_relative_depth(const Tensor3& features, const DepthEstimator& estimator) {
  Tensor3 out(features.d0(), features.d1(), estimator.bins());
  for (int u = 0; u < features.d0(); ++u) {
    for (int v = 0; v < features.d1(); ++v) {
      estimator.estimate(u, v, features.fiber(u, v), out.fiber(u, v));
      for (float p : out.fiber(u, v)) {
        if (!std::isfinite(p))
          throw std::runtime_error("depth estimate non-finite at pixel (" + std::to_string(u) +
                                   ", " + std::to_string(v) + ")");
      }
    }
  }
  return out;
}

double bin_to_metric_depth(int k, int bins, double depth_bound) {
  if (k < 0 || k >= bins) throw std::out_of_range("bin_to_metric_depth: bin index out of range");
  return ((k + 0.5) / bins) * depth_bound;
}

Tensor4 lift_to_frustum(const Tensor3& features, const Tensor3& depth) {
  if (features.d0() != depth.d0() || features.d1() != depth.d1())
    throw std::invalid_argument("lift: feature and depth maps disagree on spatial dims");
  Tensor4 frustum(features.d0(), features.d1(), depth.d2(), features.d2());
  for (int u = 0; u < features.d0(); ++u) {
    for (int v = 0; v < features.d1(); ++v) {
      const auto feat = features.fiber(u, v);
      const auto probs = depth.fiber(u, v);
      for (int k = 0; k < depth.d2(); ++k) {
        const float p = probs[static_cast<std::size_t>(k)];
        auto cell = frustum.fiber(u, v, k);
        for (int c = 0; c < features.d2(); ++c) cell[static_cast<std::size_t>(c)] = feat[static_cast<std::size_t>(c)] * p;
      }
    }
  }
  return frustum;
}

namespace {

// Shared binning step. Returns false (and updates stats) for out-of-window
// points. The vertical test runs on height above the sender's ground plane
// expressed in the target frame.
inline bool bin_point(const Eigen::Vector3d& p, const GridSpec& spec, double target_altitude,
                      int& ix, int& iy) {
  const double height = p.y() + target_altitude;
  if (height < spec.z_min || height >= spec.z_max) return false;
  const double fx = (p.x() - spec.x_min) / spec.resolution;
  const double fy = (p.z() - spec.y_min) / spec.resolution;
  ix = static_cast<int>(std::floor(fx));
  iy = static_cast<int>(std::floor(fy));
  return ix >= 0 && ix < spec.size_x() && iy >= 0 && iy < spec.size_y();
}

}  // namespace

BevGrid splat_to_bev(const Tensor4& frustum, const CameraIntrinsics& intr, const CameraPose& pose,
                     const GridSpec& spec, SplatStats* stats) {
  spec.validate();
  if (frustum.d0() != intr.width || frustum.d1() != intr.height)
    throw std::invalid_argument("splat: frustum does not match sensor size");
  const ProjectionCache cache = build_projection_cache(intr, pose);
  const DepthBoundMap bounds = compute_depth_bounds(intr, cache, pose.H);

  BevGrid grid{Tensor3(spec.size_x(), spec.size_y(), frustum.d3()), spec};
  const int bins = frustum.d2();
  for (int u = 0; u < frustum.d0(); ++u) {
    for (int v = 0; v < frustum.d1(); ++v) {
      const double bound = bounds.bound(u, v);
      for (int k = 0; k < bins; ++k) {
        const auto cell = frustum.fiber(u, v, k);
        bool any = false;
        for (float x : cell)
          if (x != 0.0f) { any = true; break; }
        if (!any) continue;
        const double d = bin_to_metric_depth(k, bins, bound);
        const Eigen::Vector3d p = pixel_to_world(u + 0.5, v + 0.5, d, cache);
        int ix, iy;
        if (bin_point(p, spec, pose.H, ix, iy)) {
          auto pillar = grid.data.fiber(ix, iy);
          for (int c = 0; c < frustum.d3(); ++c) pillar[static_cast<std::size_t>(c)] += cell[static_cast<std::size_t>(c)];
        } else if (stats) {
          stats->dropped_cells += 1;
          for (float x : cell) stats->dropped_mass += x;
        }
      }
    }
  }
  return grid;
}

void lift_and_splat_into(BevGrid& grid, const Tensor3& features, const Tensor3& depth,
                         const ProjectionCache& cache, const DepthBoundMap& bounds,
                         double target_altitude, const FrameTransform& transform,
                         SplatStats* stats) {
  if (features.d0() != depth.d0() || features.d1() != depth.d1())
    throw std::invalid_argument("splat: feature and depth maps disagree on spatial dims");
  if (features.d0() != bounds.width || features.d1() != bounds.height)
    throw std::invalid_argument("splat: depth bound map does not match sensor size");
  if (grid.data.d2() != features.d2()) throw std::invalid_argument("splat: channel mismatch");

  const GridSpec& spec = grid.spec;
  const int bins = depth.d2();
  const int channels = features.d2();
  std::vector<float> cell(static_cast<std::size_t>(channels));
  for (int u = 0; u < features.d0(); ++u) {
    for (int v = 0; v < features.d1(); ++v) {
      const auto feat = features.fiber(u, v);
      const auto probs = depth.fiber(u, v);
      const double bound = bounds.bound(u, v);
      for (int k = 0; k < bins; ++k) {
        const float p = probs[static_cast<std::size_t>(k)];
        if (p == 0.0f) continue;  // products would all compare equal to zero
        // The products below are exactly the frustum cell of the two-step
        // path; the skip condition must match it bitwise, zeros included.
        bool any = false;
        for (int c = 0; c < channels; ++c) {
          cell[static_cast<std::size_t>(c)] = feat[static_cast<std::size_t>(c)] * p;
          if (cell[static_cast<std::size_t>(c)] != 0.0f) any = true;
        }
        if (!any) continue;
        const double d = bin_to_metric_depth(k, bins, bound);
        const Eigen::Vector3d world = pixel_to_world(u + 0.5, v + 0.5, d, cache);
        const Eigen::Vector3d target = transform.apply(world);
        int ix, iy;
        if (bin_point(target, spec, target_altitude, ix, iy)) {
          auto pillar = grid.data.fiber(ix, iy);
          for (int c = 0; c < channels; ++c) pillar[static_cast<std::size_t>(c)] += cell[static_cast<std::size_t>(c)];
        } else if (stats) {
          stats->dropped_cells += 1;
          for (int c = 0; c < channels; ++c) stats->dropped_mass += cell[static_cast<std::size_t>(c)];
        }
      }
    }
  }
}

BevGrid lift_and_splat(const Tensor3& features, const Tensor3& depth, const CameraIntrinsics& intr,
                       const CameraPose& pose, const GridSpec& spec, SplatStats* stats) {
  spec.validate();
  const ProjectionCache cache = build_projection_cache(intr, pose);
  const DepthBoundMap bounds = compute_depth_bounds(intr, cache, pose.H);
  BevGrid grid{Tensor3(spec.size_x(), spec.size_y(), features.d2()), spec};
  lift_and_splat_into(grid, features, depth, cache, bounds, pose.H, FrameTransform{}, stats);
  return grid;
}

}  // namespace bevswarm
