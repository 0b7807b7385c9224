#include "bevswarm/config.hpp"

#include <fstream>
#include <sstream>

namespace bevswarm {

EpisodeConfig RunConfig::episode_config() const {
  EpisodeConfig e;
  e.grid = grid;
  e.heads = codec_heads;
  e.window = codec_window;
  e.qk_scale = codec_qk_scale;
  e.codec_seed = codec_seed;
  e.fusion_seed = fusion_seed;
  e.fusion_hidden = fusion_hidden;
  e.threads = threads;
  return e;
}

void RunConfig::validate() const {
  scene.validate();
  grid.validate();
  intrinsics.validate();
  if (codec_window < 1) throw std::invalid_argument("config: codec.window must be >= 1");
  if (grid.size_x() % codec_window != 0 || grid.size_y() % codec_window != 0)
    throw std::invalid_argument("config: codec.window must divide the BEV grid dims");
  if (codec_heads < 1 || kFeatureChannels % codec_heads != 0)
    throw std::invalid_argument("config: codec.heads must divide the feature channels");
  if (fusion_hidden < 1 || fusion_hidden > 64)
    throw std::invalid_argument("config: fusion.hidden must be in [1, 64]");
  if (!(ring_radius > 5.0) || ring_radius > 200.0)
    throw std::invalid_argument("config: constellation.radius must be in (5, 200]");
  if (threads < 0 || threads > 256) throw std::invalid_argument("config: threads must be in [0, 256]");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "scene.seed") cfg.scene_seed = std::stoull(value);
      else if (key == "scene.objects") cfg.scene.object_count = std::stoi(value);
      else if (key == "scene.frames") cfg.scene.frame_count = std::stoi(value);
      else if (key == "scene.dt") cfg.scene.dt = std::stod(value);
      else if (key == "scene.area") cfg.scene.area = std::stod(value);
      else if (key == "scene.min_gap") cfg.scene.min_gap = std::stod(value);
      else if (key == "scene.occlusion_pairs") cfg.scene.occlusion_pairs = std::stoi(value);
      else if (key == "scene.max_speed") cfg.scene.max_speed = std::stod(value);
      else if (key == "grid.x_min") cfg.grid.x_min = std::stod(value);
      else if (key == "grid.x_max") cfg.grid.x_max = std::stod(value);
      else if (key == "grid.y_min") cfg.grid.y_min = std::stod(value);
      else if (key == "grid.y_max") cfg.grid.y_max = std::stod(value);
      else if (key == "grid.z_min") cfg.grid.z_min = std::stod(value);
      else if (key == "grid.z_max") cfg.grid.z_max = std::stod(value);
      else if (key == "grid.resolution") cfg.grid.resolution = std::stod(value);
      else if (key == "grid.depth_bins") cfg.grid.depth_bins = std::stoi(value);
      else if (key == "image.width") cfg.intrinsics.width = std::stoi(value);
      else if (key == "image.height") cfg.intrinsics.height = std::stoi(value);
      else if (key == "image.fx") cfg.intrinsics.fx = std::stod(value);
      else if (key == "image.fy") cfg.intrinsics.fy = std::stod(value);
      else if (key == "image.cx") cfg.intrinsics.cx = std::stod(value);
      else if (key == "image.cy") cfg.intrinsics.cy = std::stod(value);
      else if (key == "codec.window") cfg.codec_window = std::stoi(value);
      else if (key == "codec.heads") cfg.codec_heads = std::stoi(value);
      else if (key == "codec.qk_scale") cfg.codec_qk_scale = std::stod(value);
      else if (key == "codec.seed") cfg.codec_seed = std::stoull(value);
      else if (key == "fusion.hidden") cfg.fusion_hidden = std::stoi(value);
      else if (key == "fusion.seed") cfg.fusion_seed = std::stoull(value);
      else if (key == "constellation.radius") cfg.ring_radius = std::stod(value);
      else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "out") cfg.out_dir = value;
      else if (key == "strategy") {
        const auto s = strategy_from_string(value);
        if (!s) throw std::invalid_argument("unknown strategy '" + value + "'");
        cfg.strategy = *s;
      } else if (key == "range") {
        cfg.range_short = value == "short" || value == "both";
        cfg.range_long = value == "long" || value == "both";
        if (!cfg.range_short && !cfg.range_long)
          throw std::invalid_argument("range must be short, long or both");
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": value out of range");
    }
  }
  // Occlusion pairs hide from the default ego position on the ring.
  cfg.scene.ego_hint_x = -cfg.ring_radius;
  cfg.scene.ego_hint_z = 0.0;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace bevswarm
