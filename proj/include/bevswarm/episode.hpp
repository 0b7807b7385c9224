#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bevswarm/extract.hpp"
#include "bevswarm/fusion.hpp"
#include "bevswarm/platform.hpp"
#include "bevswarm/render.hpp"
#include "bevswarm/scene.hpp"

namespace bevswarm {

enum class CollabStrategy {
  kNone,
  kEarly,
  kLate,
  kIntermediateFull,
  kIntermediateHlfdc,
};

const char* to_string(CollabStrategy s);
std::optional<CollabStrategy> strategy_from_string(const std::string& name);

// Bytes for one late-collaboration box record: 8 f32 fields (x, y, z, w, l,
// h, yaw, confidence) + u32 id + u32 class.
inline constexpr std::uint64_t kLateBoxRecordBytes = 40;

struct LedgerEntry {
  int frame = 0;
  int sender = 0;
  int receiver = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t payload_bytes = 0;
};

struct BandwidthLedger {
  std::string strategy;
  std::vector<LedgerEntry> entries;

  std::uint64_t total_payload() const;
  std::uint64_t total_bytes() const;
};

// CSV with a per-link ratio column against the raw BEV map payload.
std::string ledger_to_csv(const BandwidthLedger& ledger, std::uint64_t raw_map_payload_bytes);

struct EpisodeConfig {
  GridSpec grid;
  int heads = 4;
  int window = 4;
  double qk_scale = 0.0;  // 0 = uniform attention, the untrained mean-field default
  std::uint64_t codec_seed = 0x9d2c5680;
  std::uint64_t fusion_seed = 0xb5297a4d;
  int fusion_hidden = 4;
  int ego_index = 0;
  int threads = 0;  // 0: BEVSWARM_THREADS, else hardware concurrency
};

struct FrameOutput {
  std::vector<ExtractionResult> per_platform;  // each platform's own frame
  ExtractionResult fused;                      // ego frame, strategy output
  std::vector<DetectionBox> gt_boxes;          // ego frame
  InstanceMap gt_instances;                    // ego frame
  VisibilityRecord ego_visibility;
  std::vector<int> visible_from_any;  // object ids seen by at least one platform
};

struct EpisodeResult {
  CollabStrategy strategy = CollabStrategy::kNone;
  GridSpec grid;
  std::vector<FrameOutput> frames;
  BandwidthLedger ledger;
};

// Runs the full per-frame pipeline (render -> lift/splat -> exchange ->
// fuse -> extract) under one collaboration strategy, with exact byte
// accounting per directed link. Deterministic for a fixed scene and config.
EpisodeResult run_episode(const Scene& scene, const std::vector<Platform>& platforms,
                          CollabStrategy strategy, const EpisodeConfig& config);

// Class-agnostic detection recall at a center-distance threshold.
double detection_recall(const std::vector<DetectionBox>& preds,
                        const std::vector<DetectionBox>& gts, double dist);

}  // namespace bevswarm
