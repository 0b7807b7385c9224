#include "bevswarm/scene.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "bevswarm/rng.hpp"

namespace bevswarm {

const char* to_string(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::kVehicle: return "vehicle";
    case ObjectClass::kBicycle: return "bicycle";
    case ObjectClass::kPedestrian: return "pedestrian";
  }
  return "unknown";
}

std::optional<ObjectClass> object_class_from_string(const std::string& name) {
  if (name == "vehicle") return ObjectClass::kVehicle;
  if (name == "bicycle") return ObjectClass::kBicycle;
  if (name == "pedestrian") return ObjectClass::kPedestrian;
  return std::nullopt;
}

void SceneParams::validate() const {
  if (!(area > 10.0) || area > 300.0) throw std::invalid_argument("scene: area must be in (10, 300]");
  if (object_count < 1 || object_count > 48)
    throw std::invalid_argument("scene: object count must be in [1, 48]");
  if (frame_count < 1 || frame_count > 100)
    throw std::invalid_argument("scene: frame count must be in [1, 100]");
  if (!(dt > 0.0)) throw std::invalid_argument("scene: dt must be positive");
  if (min_gap < 0.0) throw std::invalid_argument("scene: min_gap must be non-negative");
  if (occlusion_pairs < 0 || 2 * occlusion_pairs > object_count)
    throw std::invalid_argument("scene: occlusion pairs exceed object budget");
  if (!(max_speed >= 0.0)) throw std::invalid_argument("scene: max_speed must be non-negative");
}

bool footprints_closer_than(double ax, double az, double ayaw, double al, double aw, double bx,
                            double bz, double byaw, double bl, double bw, double gap) {
  // Separating-axis test on the two inflated rectangles.
  const double ha_l = al / 2 + gap / 2, ha_w = aw / 2 + gap / 2;
  const double hb_l = bl / 2 + gap / 2, hb_w = bw / 2 + gap / 2;
  const Eigen::Vector2d d(bx - ax, bz - az);
  const Eigen::Vector2d a_axes[2] = {{std::cos(ayaw), std::sin(ayaw)},
                                     {-std::sin(ayaw), std::cos(ayaw)}};
  const Eigen::Vector2d b_axes[2] = {{std::cos(byaw), std::sin(byaw)},
                                     {-std::sin(byaw), std::cos(byaw)}};
  const double a_half[2] = {ha_l, ha_w};
  const double b_half[2] = {hb_l, hb_w};
  const Eigen::Vector2d* axes[2] = {a_axes, b_axes};
  for (int set = 0; set < 2; ++set) {
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector2d& axis = axes[set][i];
      const double ra = a_half[0] * std::abs(axis.dot(a_axes[0])) +
                        a_half[1] * std::abs(axis.dot(a_axes[1]));
      const double rb = b_half[0] * std::abs(axis.dot(b_axes[0])) +
                        b_half[1] * std::abs(axis.dot(b_axes[1]));
      if (std::abs(axis.dot(d)) > ra + rb) return false;  // separated
    }
  }
  return true;
}

namespace {

struct Candidate {
  SceneObject obj;
  ObjectState state0;
};

ObjectState state_at(const ObjectState& s0, int frame, double dt) {
  ObjectState s = s0;
  s.x += s0.vx * frame * dt;
  s.z += s0.vz * frame * dt;
  return s;
}

bool fits(const Candidate& cand, const std::vector<Candidate>& placed, const SceneParams& p) {
  const double half = p.area / 2.0;
  for (int t = 0; t < p.frame_count; ++t) {
    const ObjectState s = state_at(cand.state0, t, p.dt);
    const double margin = std::max(cand.obj.length, cand.obj.width) / 2.0 + 0.5;
    if (std::abs(s.x) > half - margin || std::abs(s.z) > half - margin) return false;
    for (const Candidate& other : placed) {
      const ObjectState o = state_at(other.state0, t, p.dt);
      if (footprints_closer_than(s.x, s.z, s.yaw, cand.obj.length, cand.obj.width, o.x, o.z, o.yaw,
                                 other.obj.length, other.obj.width, p.min_gap))
        return false;
    }
  }
  return true;
}

SceneObject sample_object(int id, ObjectClass cls, SplitMix64& rng, bool tall) {
  SceneObject o;
  o.id = id;
  o.cls = cls;
  switch (cls) {
    case ObjectClass::kVehicle:
      o.length = rng.next_double(4.2, 6.6);
      o.width = rng.next_double(1.8, 2.3);
      o.height = tall ? rng.next_double(3.0, 3.6) : rng.next_double(1.5, 2.1);
      break;
    case ObjectClass::kBicycle:
      o.length = rng.next_double(1.6, 2.0);
      o.width = rng.next_double(0.5, 0.8);
      o.height = rng.next_double(1.2, 1.6);
      break;
    case ObjectClass::kPedestrian:
      o.length = rng.next_double(0.4, 0.7);
      o.width = rng.next_double(0.4, 0.7);
      o.height = rng.next_double(1.6, 1.9);
      break;
  }
  return o;
}

double class_speed_cap(ObjectClass cls, double max_speed) {
  switch (cls) {
    case ObjectClass::kVehicle: return max_speed;
    case ObjectClass::kBicycle: return std::min(max_speed, 4.0);
    case ObjectClass::kPedestrian: return std::min(max_speed, 1.5);
  }
  return max_speed;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneParams& params) {
  params.validate();
  SplitMix64 rng(derive_seed(seed, 0x5ce11e));

  std::vector<Candidate> placed;
  int next_id = 1;

  // Engineered occlusion pairs: a tall vehicle with a small object tucked
  // just behind it along the ray from the ego hint, moving as a convoy.
  const Eigen::Vector2d ego(params.ego_hint_x, params.ego_hint_z);
  for (int pair = 0; pair < params.occlusion_pairs; ++pair) {
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      Candidate occ;
      occ.obj = sample_object(next_id, ObjectClass::kVehicle, rng, /*tall=*/true);
      const double along = rng.next_double(-0.15, 0.25) * params.area;
      const double lateral = rng.next_double(-0.2, 0.2) * params.area;
      // Position roughly across the intersection from the ego hint.
      Eigen::Vector2d dir = (Eigen::Vector2d(0, 0) - ego).normalized();
      const Eigen::Vector2d perp(-dir.y(), dir.x());
      const Eigen::Vector2d pos = Eigen::Vector2d(0, 0) + dir * along + perp * lateral;
      const Eigen::Vector2d away = (pos - ego).normalized();
      occ.state0.x = pos.x();
      occ.state0.z = pos.y();
      occ.state0.yaw = std::atan2(away.y(), away.x());  // length axis along the ray
      const double speed = rng.next_double(0.0, 1.0);
      occ.state0.vx = away.x() * speed;
      occ.state0.vz = away.y() * speed;

      Candidate hidden;
      // Bicycles project a few pixels even at range, so the hidden object
      // stays recoverable from the far platforms.
      const ObjectClass hidden_cls =
          rng.next_below(10) < 7 ? ObjectClass::kBicycle : ObjectClass::kPedestrian;
      hidden.obj = sample_object(next_id + 1, hidden_cls, rng, false);
      const double gap = rng.next_double(std::max(params.min_gap, 1.6), 2.6);
      const double offset = occ.obj.length / 2 + gap + hidden.obj.length / 2;
      hidden.state0.x = occ.state0.x + away.x() * offset;
      hidden.state0.z = occ.state0.z + away.y() * offset;
      hidden.state0.yaw = occ.state0.yaw;
      hidden.state0.vx = occ.state0.vx;
      hidden.state0.vz = occ.state0.vz;

      if (fits(occ, placed, params)) {
        placed.push_back(occ);
        if (fits(hidden, placed, params)) {
          placed.push_back(hidden);
          next_id += 2;
          done = true;
        } else {
          placed.pop_back();
        }
      }
    }
    if (!done) throw std::runtime_error("scene: could not place occlusion pair (params infeasible)");
  }

  // Lane traffic for the remaining objects. Two perpendicular roads meet at
  // the origin; headings follow the lanes.
  const double lane_offset = 1.9;
  while (static_cast<int>(placed.size()) < params.object_count) {
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      const int roll = static_cast<int>(rng.next_below(10));
      const ObjectClass cls = roll < 6   ? ObjectClass::kVehicle
                              : roll < 8 ? ObjectClass::kBicycle
                                         : ObjectClass::kPedestrian;
      Candidate cand;
      cand.obj = sample_object(next_id, cls, rng, false);
      const int lane = static_cast<int>(rng.next_below(4));
      const double along = rng.next_double(-0.45, 0.45) * params.area;
      const double speed = rng.next_double(0.3, 1.0) * class_speed_cap(cls, params.max_speed);
      switch (lane) {
        case 0:  // +x direction
          cand.state0 = {along, -lane_offset, 0.0, speed, 0.0};
          break;
        case 1:  // -x direction
          cand.state0 = {along, lane_offset, std::numbers::pi, -speed, 0.0};
          break;
        case 2:  // +z direction
          cand.state0 = {lane_offset, along, std::numbers::pi / 2, 0.0, speed};
          break;
        default:  // -z direction
          cand.state0 = {-lane_offset, along, -std::numbers::pi / 2, 0.0, -speed};
          break;
      }
      if (fits(cand, placed, params)) {
        placed.push_back(cand);
        ++next_id;
        done = true;
      }
    }
    if (!done) throw std::runtime_error("scene: could not place object (params infeasible)");
  }

  Scene scene;
  scene.area = params.area;
  scene.dt = params.dt;
  for (const Candidate& c : placed) scene.objects.push_back(c.obj);
  scene.frames.resize(static_cast<std::size_t>(params.frame_count));
  for (int t = 0; t < params.frame_count; ++t) {
    auto& frame = scene.frames[static_cast<std::size_t>(t)];
    frame.reserve(placed.size());
    for (const Candidate& c : placed) frame.push_back(state_at(c.state0, t, params.dt));
  }
  return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scene: cannot write " + path.string());
  out << "# bevswarm scene v1\n";
  out << "# area " << scene.area << " dt " << scene.dt << "\n";
  out << "# frame id class cx cy cz l w h yaw vx vy vz\n";
  out.precision(17);
  for (int t = 0; t < scene.frame_count(); ++t) {
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const SceneObject& o = scene.objects[i];
      const ObjectState& s = scene.frames[static_cast<std::size_t>(t)][i];
      out << t << " " << o.id << " " << to_string(o.cls) << " " << s.x << " " << o.height / 2
          << " " << s.z << " " << o.length << " " << o.width << " " << o.height << " " << s.yaw
          << " " << s.vx << " 0 " << s.vz << "\n";
    }
  }
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene: cannot open " + path.string());
  Scene scene;
  scene.area = 150.0;
  std::string line;
  std::map<int, std::size_t> index_of;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      while (meta >> key) {
        if (key == "area") meta >> scene.area;
        if (key == "dt") meta >> scene.dt;
      }
      continue;
    }
    std::istringstream ss(line);
    int frame, id;
    std::string cls_name;
    double cx, cy, cz, l, w, h, yaw, vx, vy, vz;
    if (!(ss >> frame >> id >> cls_name >> cx >> cy >> cz >> l >> w >> h >> yaw >> vx >> vy >> vz))
      throw std::runtime_error("scene: malformed record: " + line);
    const auto cls = object_class_from_string(cls_name);
    if (!cls) throw std::runtime_error("scene: unknown class: " + cls_name);

    auto it = index_of.find(id);
    if (it == index_of.end()) {
      it = index_of.emplace(id, scene.objects.size()).first;
      scene.objects.push_back({id, *cls, l, w, h});
    }
    if (frame < 0 || frame > 10000) throw std::runtime_error("scene: bad frame index");
    if (scene.frame_count() <= frame) scene.frames.resize(static_cast<std::size_t>(frame) + 1);
    auto& slot = scene.frames[static_cast<std::size_t>(frame)];
    if (slot.size() < scene.objects.size()) slot.resize(scene.objects.size());
    slot[it->second] = {cx, cz, yaw, vx, vz};
  }
  for (const auto& frame : scene.frames)
    if (frame.size() != scene.objects.size())
      throw std::runtime_error("scene: missing object states in some frames");
  return scene;
}

}  // namespace bevswarm
