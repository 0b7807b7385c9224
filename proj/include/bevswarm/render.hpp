#pragma once

#include <map>

#include "bevswarm/bev.hpp"
#include "bevswarm/platform.hpp"
#include "bevswarm/scene.hpp"
#include "bevswarm/tensor.hpp"

namespace bevswarm {

// Feature signature layout. The signature occupies the upper channel half
// so that, after HLFDC decoding, it shares channels with the high band
// rather than the upsampled low band.
inline constexpr int kFeatureChannels = 16;
inline constexpr int kSigOccupancy = 8;
inline constexpr int kSigClass0 = 9;  // + class index, 3 one-hot channels
inline constexpr int kSigId = 12;
inline constexpr int kSignatureDims = 5;  // occupancy + 3 classes + id code

inline float id_code(int object_id) { return 0.5f + (object_id + 1) / 64.0f; }
inline int decode_id_code(double ratio) {
  return static_cast<int>(std::lround((ratio - 0.5) * 64.0)) - 1;
}

// Per-object visibility bookkeeping from one platform's render.
struct ObjectVisibility {
  int object_id = 0;
  int visible_pixels = 0;     // rays this object won in the z-buffer
  int standalone_pixels = 0;  // rays that hit it ignoring every other object
  std::map<int, int> occluders;  // occluder object id -> pixels it stole

  bool in_frustum() const { return standalone_pixels > 0; }
  bool fully_occluded() const { return standalone_pixels > 0 && visible_pixels == 0; }
};

struct VisibilityRecord {
  std::vector<ObjectVisibility> objects;  // scene object order

  const ObjectVisibility& of(int object_id) const;
};

struct RenderResult {
  Tensor3 features;  // (W, H, kFeatureChannels), signature-coded
  Tensor3 depth;     // (W, H, D), one-hot at the true relative depth bin
  DepthBoundMap bounds;
  VisibilityRecord visibility;
};

// Casts one ray per pixel center, z-buffers the scene's boxes against the
// ground plane, and writes the winning object's signature with its exact
// hit depth. Background pixels keep zero features and the ground depth.
RenderResult render_oracle_features(const Platform& platform, const Scene& scene, int frame,
                                    int depth_bins);

// Ray / oriented-box intersection in the depth parameter d along direction
// M (u, v, 1); used by the renderer and the footprint tests.
struct BoxHit {
  double d_enter = 0.0;
  bool hit = false;
};
BoxHit ray_box_intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                         const Eigen::Vector3d& box_center, double box_yaw,
                         const Eigen::Vector3d& half_extents);

}  // namespace bevswarm
