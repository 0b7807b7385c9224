#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bevswarm {

enum class ObjectClass : int { kVehicle = 0, kBicycle = 1, kPedestrian = 2 };

const char* to_string(ObjectClass cls);
std::optional<ObjectClass> object_class_from_string(const std::string& name);

// Static properties of one scene object. Box extents: length along the
// heading, width across it, height up.
struct SceneObject {
  int id = 0;  // 1-based; 0 is reserved for background in instance maps
  ObjectClass cls = ObjectClass::kVehicle;
  double length = 0.0, width = 0.0, height = 0.0;
};

// Ground-plane pose and velocity at one frame. Global frame: y up, ground
// plane at y = 0; the two ground axes are x and z.
struct ObjectState {
  double x = 0.0, z = 0.0;
  double yaw = 0.0;
  double vx = 0.0, vz = 0.0;
};

struct Scene {
  double area = 150.0;  // square side, meters, centered on the origin
  double dt = 0.5;      // seconds between frames
  std::vector<SceneObject> objects;
  std::vector<std::vector<ObjectState>> frames;  // frames[t][object index]

  int frame_count() const { return static_cast<int>(frames.size()); }
  const ObjectState& state(int frame, int obj_index) const {
    return frames[static_cast<std::size_t>(frame)][static_cast<std::size_t>(obj_index)];
  }
};

struct SceneParams {
  double area = 150.0;
  int object_count = 14;
  int frame_count = 4;
  double dt = 0.5;
  double min_gap = 1.5;      // minimum footprint edge separation, meters
  int occlusion_pairs = 2;   // tall occluder + small object placed behind it
  double max_speed = 6.0;
  // Ground position the occlusion pairs hide from (the default ego).
  double ego_hint_x = -58.0, ego_hint_z = 0.0;

  void validate() const;
};

// Deterministic scene: lane traffic through a central intersection plus the
// requested occlusion pairs, constant-velocity motion, rejection-sampled so
// footprints keep min_gap separation on every frame.
Scene generate_scene(std::uint64_t seed, const SceneParams& params);

// 2D oriented-box overlap test with both boxes inflated by gap/2 per side.
bool footprints_closer_than(double ax, double az, double ayaw, double al, double aw, double bx,
                            double bz, double byaw, double bl, double bw, double gap);

// Line-oriented text format, one record per (frame, object):
//   frame id class cx cy cz l w h yaw vx vy vz
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

// Converts a point from a z-up right-handed frame to this project's y-up
// frame: (x, y, z)_zup -> (x, z, -y).
inline Eigen::Vector3d from_z_up(const Eigen::Vector3d& p) { return {p.x(), p.z(), -p.y()}; }

}  // namespace bevswarm
