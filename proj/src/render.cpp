#include "bevswarm/render.hpp"

#include <cmath>
#include <limits>

namespace bevswarm {

const ObjectVisibility& VisibilityRecord::of(int object_id) const {
  for (const ObjectVisibility& v : objects)
    if (v.object_id == object_id) return v;
  throw std::out_of_range("visibility: unknown object id " + std::to_string(object_id));
}

BoxHit ray_box_intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                         const Eigen::Vector3d& box_center, double box_yaw,
                         const Eigen::Vector3d& half_extents) {
  // Box frame: x' along heading (length), y' up (height), z' across (width).
  const double c = std::cos(box_yaw), s = std::sin(box_yaw);
  Eigen::Matrix3d to_box;
  to_box << c, 0, s, 0, 1, 0, -s, 0, c;  // world yaw rotation, rows = box axes
  const Eigen::Vector3d o = to_box * (origin - box_center);
  const Eigen::Vector3d d = to_box * dir;

  double t_enter = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double h = half_extents(axis);
    if (std::abs(d(axis)) < 1e-12) {
      if (o(axis) < -h || o(axis) > h) return {0.0, false};
      continue;
    }
    double t0 = (-h - o(axis)) / d(axis);
    double t1 = (h - o(axis)) / d(axis);
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return {0.0, false};
  }
  if (!(t_enter > 0.0)) return {0.0, false};  // camera inside or box behind
  return {t_enter, true};
}

namespace {

// Under R_y(psi), a heading direction (cos t, sin t) on the ground maps to
// angle t - psi, so pulling a global heading into the local frame adds the
// platform yaw.
double local_yaw(double global_yaw, double platform_yaw) { return global_yaw + platform_yaw; }

}  // namespace

RenderResult render_oracle_features(const Platform& platform, const Scene& scene, int frame,
                                    int depth_bins) {
  const CameraIntrinsics& intr = platform.rig.intrinsics;
  const CameraPose& pose = platform.rig.pose;
  const ProjectionCache cache = build_projection_cache(intr, pose);

  RenderResult out;
  out.bounds = compute_depth_bounds(intr, cache, pose.H);
  out.features = Tensor3(intr.width, intr.height, kFeatureChannels);
  out.depth = Tensor3(intr.width, intr.height, depth_bins);
  out.visibility.objects.resize(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i)
    out.visibility.objects[i].object_id = scene.objects[i].id;

  // Object boxes in the platform's local frame. Centers sit half a height
  // above the local ground plane y = -H.
  const FrameTransform to_local = platform.global_to_local();
  struct LocalBox {
    Eigen::Vector3d center;
    double yaw;
    Eigen::Vector3d half;
  };
  std::vector<LocalBox> boxes(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    const ObjectState& st = scene.state(frame, static_cast<int>(i));
    const Eigen::Vector3d center_global(st.x, obj.height / 2.0, st.z);
    boxes[i].center = to_local.apply(center_global);
    boxes[i].yaw = local_yaw(st.yaw, platform.yaw);
    boxes[i].half = Eigen::Vector3d(obj.length / 2.0, obj.height / 2.0, obj.width / 2.0);
  }

  const Eigen::Vector3d origin = cache.N;  // camera center in local world
  std::vector<std::pair<double, int>> hits;
  for (int u = 0; u < intr.width; ++u) {
    for (int v = 0; v < intr.height; ++v) {
      const Eigen::Vector3d dir = cache.M * Eigen::Vector3d(u + 0.5, v + 0.5, 1.0);
      hits.clear();
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BoxHit hit = ray_box_intersect(origin, dir, boxes[i].center, boxes[i].yaw,
                                             boxes[i].half);
        if (hit.hit) hits.emplace_back(hit.d_enter, static_cast<int>(i));
      }

      double depth = out.bounds.bound(u, v);  // ground (or clamped) depth
      int winner = -1;
      for (const auto& [d, idx] : hits) {
        out.visibility.objects[static_cast<std::size_t>(idx)].standalone_pixels += 1;
        if (d < depth) {
          depth = d;
          winner = idx;
        }
      }
      if (winner >= 0) {
        const SceneObject& obj = scene.objects[static_cast<std::size_t>(winner)];
        auto feat = out.features.fiber(u, v);
        feat[kSigOccupancy] = 1.0f;
        feat[kSigClass0 + static_cast<int>(obj.cls)] = 1.0f;
        feat[kSigId] = id_code(obj.id);
        out.visibility.objects[static_cast<std::size_t>(winner)].visible_pixels += 1;
        for (const auto& [d, idx] : hits)
          if (idx != winner)
            out.visibility.objects[static_cast<std::size_t>(idx)].occluders[obj.id] += 1;
      }

      const double bound = out.bounds.bound(u, v);
      int bin = static_cast<int>(std::floor(depth_bins * depth / bound));
      bin = std::clamp(bin, 0, depth_bins - 1);
      out.depth.at(u, v, bin) = 1.0f;
    }
  }
  return out;
}

}  // namespace bevswarm
