#pragma once

#include <filesystem>
#include <string>

#include "bevswarm/episode.hpp"
#include "bevswarm/scene.hpp"

namespace bevswarm {

// One run's full configuration. File format: `key = value` lines, `#`
// comments; unknown keys are rejected.
struct RunConfig {
  std::uint64_t scene_seed = 7;
  SceneParams scene;
  GridSpec grid;
  CameraIntrinsics intrinsics{110.0, 110.0, 96.0, 40.0, 192, 80};
  int codec_window = 4;
  int codec_heads = 4;
  double codec_qk_scale = 0.0;
  std::uint64_t codec_seed = 0x9d2c5680;
  int fusion_hidden = 4;
  std::uint64_t fusion_seed = 0xb5297a4d;
  double ring_radius = 58.0;
  int threads = 0;
  CollabStrategy strategy = CollabStrategy::kNone;
  std::string out_dir = "out";
  bool range_short = true;
  bool range_long = true;

  EpisodeConfig episode_config() const;
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace bevswarm
