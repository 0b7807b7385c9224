#include "bevswarm/episode.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <thread>

namespace bevswarm {

const char* to_string(CollabStrategy s) {
  switch (s) {
    case CollabStrategy::kNone: return "none";
    case CollabStrategy::kEarly: return "early";
    case CollabStrategy::kLate: return "late";
    case CollabStrategy::kIntermediateFull: return "full";
    case CollabStrategy::kIntermediateHlfdc: return "hlfdc";
  }
  return "unknown";
}

std::optional<CollabStrategy> strategy_from_string(const std::string& name) {
  if (name == "none") return CollabStrategy::kNone;
  if (name == "early") return CollabStrategy::kEarly;
  if (name == "late") return CollabStrategy::kLate;
  if (name == "full") return CollabStrategy::kIntermediateFull;
  if (name == "hlfdc") return CollabStrategy::kIntermediateHlfdc;
  return std::nullopt;
}

std::uint64_t BandwidthLedger::total_payload() const {
  std::uint64_t sum = 0;
  for (const LedgerEntry& e : entries) sum += e.payload_bytes;
  return sum;
}

std::uint64_t BandwidthLedger::total_bytes() const {
  std::uint64_t sum = 0;
  for (const LedgerEntry& e : entries) sum += e.header_bytes + e.payload_bytes;
  return sum;
}

std::string ledger_to_csv(const BandwidthLedger& ledger, std::uint64_t raw_map_payload_bytes) {
  std::ostringstream out;
  out << "frame,sender,receiver,header_bytes,payload_bytes,ratio,strategy\n";
  char buf[64];
  for (const LedgerEntry& e : ledger.entries) {
    std::snprintf(buf, sizeof buf, "%.6f",
                  raw_map_payload_bytes ? static_cast<double>(e.payload_bytes) /
                                              static_cast<double>(raw_map_payload_bytes)
                                        : 0.0);
    out << e.frame << "," << e.sender << "," << e.receiver << "," << e.header_bytes << ","
        << e.payload_bytes << "," << buf << "," << ledger.strategy << "\n";
  }
  return out.str();
}

namespace {

int resolve_threads(int configured, int jobs) {
  int n = configured;
  if (n <= 0) {
    if (const char* env = std::getenv("BEVSWARM_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return std::min(n, jobs);
}

// Static index partition; results land in caller-indexed slots, so the
// output never depends on scheduling.
template <typename Fn>
void parallel_over(int jobs, int threads, Fn&& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < jobs; i += threads) fn(i);
    });
  for (std::thread& t : pool) t.join();
}

double wrap_pi(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

FrameTransform compose_to_ego(const Platform& sender, const Platform& ego) {
  if (sender.id == ego.id) return {};
  const Eigen::Matrix3d rot = ego.yaw_matrix().transpose() * sender.yaw_matrix();
  const Eigen::Vector3d t = ego.yaw_matrix().transpose() * (sender.position - ego.position);
  return {rot, t};
}

// Ground-truth boxes and instance raster in the ego's BEV frame.
void fill_ground_truth(const Scene& scene, int frame, const Platform& ego, const GridSpec& spec,
                       FrameOutput& out) {
  const FrameTransform to_local = ego.global_to_local();
  out.gt_instances = InstanceMap(spec.size_x(), spec.size_y());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    const ObjectState& st = scene.state(frame, static_cast<int>(i));
    const Eigen::Vector3d center =
        to_local.apply(Eigen::Vector3d(st.x, obj.height / 2.0, st.z));
    DetectionBox box;
    box.x = center.x();
    box.y = center.z();
    box.z = obj.height / 2.0;
    box.w = obj.width;
    box.l = obj.length;
    box.h = obj.height;
    box.yaw = wrap_pi(st.yaw + ego.yaw);
    box.cls = static_cast<int>(obj.cls);
    box.id = obj.id;
    if (box.x < spec.x_min || box.x >= spec.x_max || box.y < spec.y_min || box.y >= spec.y_max)
      continue;
    out.gt_boxes.push_back(box);

    // Rasterize the footprint.
    const double reach = std::hypot(obj.length, obj.width) / 2.0 + spec.resolution;
    const int x0 = std::max(0, static_cast<int>((box.x - reach - spec.x_min) / spec.resolution));
    const int x1 = std::min(spec.size_x() - 1,
                            static_cast<int>((box.x + reach - spec.x_min) / spec.resolution));
    const int y0 = std::max(0, static_cast<int>((box.y - reach - spec.y_min) / spec.resolution));
    const int y1 = std::min(spec.size_y() - 1,
                            static_cast<int>((box.y + reach - spec.y_min) / spec.resolution));
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    for (int ix = x0; ix <= x1; ++ix)
      for (int iy = y0; iy <= y1; ++iy) {
        const double dx = spec.cell_center_x(ix) - box.x;
        const double dy = spec.cell_center_y(iy) - box.y;
        const double along = c * dx + s * dy;
        const double across = -s * dx + c * dy;
        if (std::abs(along) <= obj.length / 2.0 && std::abs(across) <= obj.width / 2.0) {
          if (out.gt_instances.at(ix, iy) == 0) out.gt_instances.at(ix, iy) = obj.id;
        }
      }
    out.gt_instances.id_class[obj.id] = static_cast<int>(obj.cls);
  }
}

struct PlatformFrame {
  RenderResult render;
  BevGrid own_grid;
  ExtractionResult own_extraction;
};

}  // namespace

double detection_recall(const std::vector<DetectionBox>& preds,
                        const std::vector<DetectionBox>& gts, double dist) {
  if (gts.empty()) return 1.0;
  std::vector<DetectionBox> p = preds, g = gts;
  for (DetectionBox& b : p) b.cls = 0;
  for (DetectionBox& b : g) b.cls = 0;
  const MatchResult m = match_by_center_distance(p, g, dist);
  return static_cast<double>(m.pairs.size()) / static_cast<double>(gts.size());
}

EpisodeResult run_episode(const Scene& scene, const std::vector<Platform>& platforms,
                          CollabStrategy strategy, const EpisodeConfig& config) {
  config.grid.validate();
  if (platforms.empty()) throw std::invalid_argument("episode: no platforms");
  if (config.ego_index < 0 || config.ego_index >= static_cast<int>(platforms.size()))
    throw std::invalid_argument("episode: ego index out of range");
  if (config.grid.size_x() % config.window != 0 || config.grid.size_y() % config.window != 0)
    throw std::invalid_argument("episode: codec window must divide the grid dims");

  const GridSpec& spec = config.grid;
  const Platform& ego = platforms[static_cast<std::size_t>(config.ego_index)];
  const int n = static_cast<int>(platforms.size());
  const int threads = resolve_threads(config.threads, n);

  const CodecParams codec = CodecParams::seeded(kFeatureChannels, config.heads, config.window,
                                                config.codec_seed,
                                                static_cast<float>(config.qk_scale));
  const FusionWeightNet net =
      FusionWeightNet::seeded(2 * kFeatureChannels, config.fusion_hidden, config.fusion_seed);
  const DecoderInfo raw_decoder = DecoderInfo::raw();
  const DecoderInfo fused_decoder = strategy == CollabStrategy::kIntermediateHlfdc
                                        ? DecoderInfo::hlfdc_fused(codec)
                                        : DecoderInfo::raw();

  EpisodeResult result;
  result.strategy = strategy;
  result.grid = spec;
  result.ledger.strategy = to_string(strategy);

  const std::uint64_t image_record_payload =
      static_cast<std::uint64_t>(ego.rig.intrinsics.width) * ego.rig.intrinsics.height *
      (kFeatureChannels + 1) * 4;
  const std::uint64_t full_map_payload =
      static_cast<std::uint64_t>(spec.size_x()) * spec.size_y() * kFeatureChannels * 4;

  for (int frame = 0; frame < scene.frame_count(); ++frame) {
    FrameOutput out;

    // Per-platform single-view pipelines.
    std::vector<PlatformFrame> pf(static_cast<std::size_t>(n));
    parallel_over(n, threads, [&](int i) {
      const Platform& p = platforms[static_cast<std::size_t>(i)];
      PlatformFrame& f = pf[static_cast<std::size_t>(i)];
      f.render = render_oracle_features(p, scene, frame, spec.depth_bins);
      const ProjectionCache cache = build_projection_cache(p.rig.intrinsics, p.rig.pose);
      f.own_grid = BevGrid{Tensor3(spec.size_x(), spec.size_y(), kFeatureChannels), spec};
      lift_and_splat_into(f.own_grid, f.render.features, f.render.depth, cache, f.render.bounds,
                          p.rig.pose.H, FrameTransform{});
      f.own_extraction = extract_instances(f.own_grid, raw_decoder);
    });

    for (const PlatformFrame& f : pf) out.per_platform.push_back(f.own_extraction);
    out.ego_visibility = pf[static_cast<std::size_t>(config.ego_index)].render.visibility;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      bool seen = false;
      for (const PlatformFrame& f : pf)
        if (f.render.visibility.objects[i].visible_pixels > 0) seen = true;
      if (seen) out.visible_from_any.push_back(scene.objects[i].id);
    }

    switch (strategy) {
      case CollabStrategy::kNone: {
        out.fused = pf[static_cast<std::size_t>(config.ego_index)].own_extraction;
        break;
      }
      case CollabStrategy::kEarly: {
        // Raw observations merge: every platform's frustum points splat
        // straight into the ego grid; partial grids summed in id order.
        std::vector<BevGrid> partial(static_cast<std::size_t>(n),
                                     BevGrid{Tensor3(spec.size_x(), spec.size_y(),
                                                     kFeatureChannels),
                                             spec});
        parallel_over(n, threads, [&](int i) {
          const Platform& p = platforms[static_cast<std::size_t>(i)];
          const ProjectionCache cache = build_projection_cache(p.rig.intrinsics, p.rig.pose);
          lift_and_splat_into(partial[static_cast<std::size_t>(i)],
                              pf[static_cast<std::size_t>(i)].render.features,
                              pf[static_cast<std::size_t>(i)].render.depth, cache,
                              pf[static_cast<std::size_t>(i)].render.bounds, ego.rig.pose.H,
                              compose_to_ego(p, ego));
        });
        BevGrid merged{Tensor3(spec.size_x(), spec.size_y(), kFeatureChannels), spec};
        for (int i = 0; i < n; ++i) {
          auto dst = merged.data.flat();
          const auto src = partial[static_cast<std::size_t>(i)].data.flat();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
          if (i != config.ego_index)
            result.ledger.entries.push_back({frame, platforms[static_cast<std::size_t>(i)].id,
                                             ego.id, kPacketHeaderBytes, image_record_payload});
        }
        out.fused = extract_instances(merged, raw_decoder);
        break;
      }
      case CollabStrategy::kLate: {
        struct Candidate {
          DetectionBox box;
          int platform;
          int index;
        };
        std::vector<Candidate> cands;
        for (int i = 0; i < n; ++i) {
          const Platform& p = platforms[static_cast<std::size_t>(i)];
          const RelativePose rel = relative_pose(p.packet_pose(), ego.packet_pose());
          const double dyaw = heading_delta(rel);
          const auto& inst = pf[static_cast<std::size_t>(i)].own_extraction.instances;
          for (std::size_t k = 0; k < inst.size(); ++k) {
            DetectionBox b = inst[k].box;
            const Eigen::Vector2d c = rel.rot * Eigen::Vector2d(b.x, b.y) + rel.t;
            b.x = c.x();
            b.y = c.y();
            b.yaw = wrap_pi(b.yaw + dyaw);
            cands.push_back({b, i, static_cast<int>(k)});
          }
          if (i != config.ego_index)
            result.ledger.entries.push_back({frame, p.id, ego.id, kPacketHeaderBytes,
                                             inst.size() * kLateBoxRecordBytes});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
          return a.box.confidence > b.box.confidence;
        });
        out.fused.instance_map = InstanceMap(spec.size_x(), spec.size_y());
        int fresh = 64;
        for (const Candidate& cand : cands) {
          bool close = false;
          for (const ExtractedInstance& kept : out.fused.instances)
            if (std::hypot(cand.box.x - kept.box.x, cand.box.y - kept.box.y) < 0.75) {
              close = true;
              break;
            }
          if (close) continue;
          const Platform& p = platforms[static_cast<std::size_t>(cand.platform)];
          const RelativePose rel = relative_pose(p.packet_pose(), ego.packet_pose());
          const ExtractedInstance& src =
              pf[static_cast<std::size_t>(cand.platform)].own_extraction.instances[static_cast<std::size_t>(cand.index)];
          ExtractedInstance inst;
          inst.box = cand.box;
          inst.decoded_id = src.decoded_id;
          for (const auto& [cx, cy] : src.cells) {
            const Eigen::Vector2d c =
                rel.rot * Eigen::Vector2d(spec.cell_center_x(cx), spec.cell_center_y(cy)) + rel.t;
            const int ix = static_cast<int>(std::floor((c.x() - spec.x_min) / spec.resolution));
            const int iy = static_cast<int>(std::floor((c.y() - spec.y_min) / spec.resolution));
            if (ix < 0 || ix >= spec.size_x() || iy < 0 || iy >= spec.size_y()) continue;
            inst.cells.emplace_back(ix, iy);
          }
          int map_id = inst.decoded_id >= 0 ? inst.decoded_id + 1 : fresh++;
          if (out.fused.instance_map.id_class.count(map_id)) map_id = fresh++;
          for (const auto& [ix, iy] : inst.cells)
            if (out.fused.instance_map.at(ix, iy) == 0) out.fused.instance_map.at(ix, iy) = map_id;
          out.fused.instance_map.id_class[map_id] = inst.box.cls;
          out.fused.instances.push_back(std::move(inst));
        }
        break;
      }
      case CollabStrategy::kIntermediateFull: {
        std::vector<Contribution> contributions(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
        std::vector<int> senders;
        for (int i = 0; i < n; ++i)
          if (i != config.ego_index) senders.push_back(i);
        parallel_over(static_cast<int>(senders.size()), threads, [&](int k) {
          const Platform& p = platforms[static_cast<std::size_t>(senders[static_cast<std::size_t>(k)])];
          const RelativePose rel = relative_pose(p.packet_pose(), ego.packet_pose());
          contributions[static_cast<std::size_t>(k)] = {
              p.id, align(pf[static_cast<std::size_t>(senders[static_cast<std::size_t>(k)])].own_grid.data, rel, spec)};
        });
        for (int i : senders)
          result.ledger.entries.push_back({frame, platforms[static_cast<std::size_t>(i)].id,
                                           ego.id, kPacketHeaderBytes, full_map_payload});
        const Tensor3 fused_map = fuse_collaborators(
            pf[static_cast<std::size_t>(config.ego_index)].own_grid.data, std::move(contributions), net);
        out.fused = extract_instances(BevGrid{fused_map, spec}, fused_decoder);
        break;
      }
      case CollabStrategy::kIntermediateHlfdc: {
        std::vector<int> senders;
        for (int i = 0; i < n; ++i)
          if (i != config.ego_index) senders.push_back(i);
        std::vector<Contribution> contributions(senders.size());
        std::vector<std::uint64_t> payloads(senders.size());
        parallel_over(static_cast<int>(senders.size()), threads, [&](int k) {
          const Platform& p = platforms[static_cast<std::size_t>(senders[static_cast<std::size_t>(k)])];
          const FrequencyPacket pkt =
              encode(pf[static_cast<std::size_t>(senders[static_cast<std::size_t>(k)])].own_grid.data, codec,
                     static_cast<std::uint16_t>(p.id), static_cast<std::uint32_t>(frame),
                     p.packet_pose());
          const std::vector<std::uint8_t> wire = serialize_packet(pkt);
          payloads[static_cast<std::size_t>(k)] = wire.size() - kPacketHeaderBytes;
          const FrequencyPacket received = deserialize_packet(wire);
          contributions[static_cast<std::size_t>(k)] = {
              p.id, decode_packet(received, ego.packet_pose(), spec)};
        });
        for (std::size_t k = 0; k < senders.size(); ++k)
          result.ledger.entries.push_back({frame,
                                           platforms[static_cast<std::size_t>(senders[k])].id,
                                           ego.id, kPacketHeaderBytes, payloads[k]});
        const Tensor3 fused_map = fuse_collaborators(
            pf[static_cast<std::size_t>(config.ego_index)].own_grid.data, std::move(contributions), net);
        out.fused = extract_instances(BevGrid{fused_map, spec}, fused_decoder);
        break;
      }
    }

    fill_ground_truth(scene, frame, ego, spec, out);
    result.frames.push_back(std::move(out));
  }

  // Temporal consistency for the fused sequence.
  std::vector<ExtractionResult> fused_seq;
  fused_seq.reserve(result.frames.size());
  for (FrameOutput& f : result.frames) fused_seq.push_back(std::move(f.fused));
  assign_track_ids(fused_seq);
  for (std::size_t t = 0; t < fused_seq.size(); ++t)
    result.frames[t].fused = std::move(fused_seq[t]);

  return result;
}

}  // namespace bevswarm
