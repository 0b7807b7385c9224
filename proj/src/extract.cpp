#include "bevswarm/extract.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace bevswarm {

double nominal_height(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::kVehicle: return 1.8;
    case ObjectClass::kBicycle: return 1.4;
    case ObjectClass::kPedestrian: return 1.75;
  }
  return 1.8;
}

DecoderInfo DecoderInfo::raw() { return {}; }

DecoderInfo DecoderInfo::hlfdc_fused(const CodecParams& codec) {
  DecoderInfo d;
  d.layout = FeatureLayout::kHlfdcFused;
  d.window = codec.window;
  const AttentionParams& a = codec.high;
  // Composite value-path channel map P = [Wv_0 .. Wv_{Nh-1}] Wo, restricted
  // to the signature rows. Shared codec config makes it known receiver-side.
  Eigen::MatrixXf vcat(a.in_channels, a.heads * a.head_dim);
  for (int h = 0; h < a.heads; ++h)
    vcat.block(0, h * a.head_dim, a.in_channels, a.head_dim) = a.Wv[static_cast<std::size_t>(h)];
  const Eigen::MatrixXf p_full = vcat * a.Wo;
  d.high_signature = p_full.block(kSigOccupancy, 0, kSignatureDims, a.out_channels);
  const Eigen::MatrixXd p5 = d.high_signature.cast<double>();
  d.high_pinv = p5.transpose() * (p5 * p5.transpose()).inverse();
  return d;
}

namespace {

struct Component {
  std::vector<std::pair<int, int>> cells;
};

// 8-connected components over a boolean raster, scan order fixed.
std::vector<Component> connected_components(const std::vector<std::uint8_t>& mask, int X, int Y) {
  std::vector<int> label(static_cast<std::size_t>(X) * Y, -1);
  std::vector<Component> comps;
  std::vector<std::pair<int, int>> stack;
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      const std::size_t i = static_cast<std::size_t>(x) * Y + y;
      if (!mask[i] || label[i] >= 0) continue;
      const int id = static_cast<int>(comps.size());
      comps.emplace_back();
      stack.assign(1, {x, y});
      label[i] = id;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        comps[static_cast<std::size_t>(id)].cells.emplace_back(cx, cy);
        for (int dx = -1; dx <= 1; ++dx)
          for (int dy = -1; dy <= 1; ++dy) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= X || ny < 0 || ny >= Y) continue;
            const std::size_t ni = static_cast<std::size_t>(nx) * Y + ny;
            if (!mask[ni] || label[ni] >= 0) continue;
            label[ni] = id;
            stack.emplace_back(nx, ny);
          }
      }
    }
  }
  return comps;
}

struct SignatureSums {
  double occ = 0.0;
  double cls[3] = {0.0, 0.0, 0.0};
  double id = 0.0;
};

// Oriented box from weighted cell centers: principal axis of the second
// moment, extents from the projections.
DetectionBox box_from_cells(const std::vector<std::pair<int, int>>& cells,
                            const std::vector<double>& weights, const GridSpec& spec,
                            double pad) {
  DetectionBox box;
  double wsum = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double w = weights[i];
    wsum += w;
    mx += w * spec.cell_center_x(cells[i].first);
    my += w * spec.cell_center_y(cells[i].second);
  }
  mx /= wsum;
  my /= wsum;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double dx = spec.cell_center_x(cells[i].first) - mx;
    const double dy = spec.cell_center_y(cells[i].second) - my;
    sxx += weights[i] * dx * dx;
    sxy += weights[i] * dx * dy;
    syy += weights[i] * dy * dy;
  }
  double yaw = 0.0;
  if (cells.size() > 1 && (sxx + syy) > 1e-12)
    yaw = 0.5 * std::atan2(2.0 * sxy, sxx - syy);  // principal axis, mod pi
  const double c = std::cos(yaw), s = std::sin(yaw);
  double e_long = 0.0, e_lat = 0.0;
  for (const auto& [cx, cy] : cells) {
    const double dx = spec.cell_center_x(cx) - mx;
    const double dy = spec.cell_center_y(cy) - my;
    e_long = std::max(e_long, std::abs(c * dx + s * dy));
    e_lat = std::max(e_lat, std::abs(-s * dx + c * dy));
  }
  box.x = mx;
  box.y = my;
  box.yaw = yaw;
  box.l = 2.0 * (e_long + pad);
  box.w = 2.0 * (e_lat + pad);
  return box;
}

int argmax3(const double* v) {
  int best = 0;
  if (v[1] > v[best]) best = 1;
  if (v[2] > v[best]) best = 2;
  return best;
}

// Id ratio decodes only if it lands near an integer in range.
int try_decode_id(double id_sum, double occ_sum) {
  if (!(occ_sum > 0.0)) return -1;
  const double ratio = id_sum / occ_sum;
  const double raw = (ratio - 0.5) * 64.0;
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) > 0.3) return -1;
  const int id = static_cast<int>(rounded) - 1;
  return (id >= 0 && id < 63) ? id : -1;
}

ExtractedInstance make_instance(const Component& comp, const SignatureSums& sums,
                                const std::vector<double>& weights, const GridSpec& spec,
                                double pad) {
  ExtractedInstance inst;
  inst.cells = comp.cells;
  const int cls = argmax3(sums.cls);
  inst.box = box_from_cells(comp.cells, weights, spec, pad);
  inst.box.cls = cls;
  inst.box.h = nominal_height(static_cast<ObjectClass>(cls));
  inst.box.z = inst.box.h / 2.0;
  const double mean_occ = sums.occ / static_cast<double>(comp.cells.size());
  inst.box.confidence = mean_occ / (1.0 + mean_occ);
  inst.decoded_id = try_decode_id(sums.id, sums.occ);
  inst.box.id = inst.decoded_id;
  return inst;
}

// Per-cell decoding of raw-layout signatures above an occupancy threshold.
// `value` returns the signature channel k (0 = occupancy) at a cell.
template <typename Value>
std::vector<ExtractedInstance> cell_pass(int X, int Y, const GridSpec& spec, double threshold,
                                         Value&& value) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(X) * Y, 0);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y)
      mask[static_cast<std::size_t>(x) * Y + y] = value(x, y, 0) > threshold ? 1 : 0;

  std::vector<ExtractedInstance> out;
  for (const Component& comp : connected_components(mask, X, Y)) {
    SignatureSums sums;
    std::vector<double> weights;
    weights.reserve(comp.cells.size());
    for (const auto& [x, y] : comp.cells) {
      const double occ = value(x, y, 0);
      sums.occ += occ;
      for (int c = 0; c < 3; ++c) sums.cls[c] += value(x, y, 1 + c);
      sums.id += value(x, y, 4);
      weights.push_back(occ);
    }
    out.push_back(make_instance(comp, sums, weights, spec, spec.resolution / 2.0));
  }
  return out;
}

}  // namespace

ExtractionResult extract_instances(const BevGrid& grid, const DecoderInfo& decoder) {
  const Tensor3& data = grid.data;
  const GridSpec& spec = grid.spec;
  const int X = data.d0(), Y = data.d1(), C = data.d2();
  if (C != kFeatureChannels)
    throw std::invalid_argument("extract: expected " + std::to_string(kFeatureChannels) +
                                " feature channels");
  const int half = C / 2;

  std::vector<ExtractedInstance> instances;

  if (decoder.layout == FeatureLayout::kRaw) {
    instances = cell_pass(X, Y, spec, decoder.cell_threshold, [&](int x, int y, int k) {
      return static_cast<double>(data.at(x, y, kSigOccupancy + k));
    });
  } else {
    const int M = decoder.window;
    if (X % M != 0 || Y % M != 0)
      throw std::invalid_argument("extract: window must divide grid dims");
    const int WX = X / M, WY = Y / M;

    // Window baselines: the upper channel half is ego signature plus a
    // window-constant collaborative term; the smallest-norm cell in a
    // window estimates that constant.
    std::vector<Eigen::VectorXd> baseline(static_cast<std::size_t>(WX) * WY);
    for (int wx = 0; wx < WX; ++wx)
      for (int wy = 0; wy < WY; ++wy) {
        double best_norm = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best = Eigen::VectorXd::Zero(half);
        for (int dx = 0; dx < M; ++dx)
          for (int dy = 0; dy < M; ++dy) {
            Eigen::VectorXd v(half);
            for (int c = 0; c < half; ++c)
              v(c) = data.at(wx * M + dx, wy * M + dy, half + c);
            const double n = v.norm();
            if (n < best_norm) {
              best_norm = n;
              best = v;
            }
          }
        baseline[static_cast<std::size_t>(wx) * WY + wy] = best;
      }

    // Pass 1: sharp per-cell residuals (the ego's raw contribution).
    instances = cell_pass(X, Y, spec, decoder.cell_threshold, [&](int x, int y, int k) {
      const Eigen::VectorXd& b = baseline[static_cast<std::size_t>(x / M) * WY + (y / M)];
      return static_cast<double>(data.at(x, y, kSigOccupancy + k)) - b(kSigOccupancy - half + k);
    });

    // Pass 2: demix the baselines through the known high-band channel map;
    // collaborator content appears at window granularity.
    std::vector<Eigen::VectorXd> demixed(baseline.size());
    for (std::size_t i = 0; i < baseline.size(); ++i)
      demixed[i] = (baseline[i].transpose() * decoder.high_pinv).transpose();

    std::vector<ExtractedInstance> window_instances;
    for (int cls = 0; cls < 3; ++cls) {
      std::vector<std::uint8_t> wmask(static_cast<std::size_t>(WX) * WY, 0);
      for (std::size_t i = 0; i < demixed.size(); ++i) {
        const Eigen::VectorXd& s = demixed[i];
        if (s(0) <= decoder.window_mass_threshold) continue;
        double total = 0.0;
        for (int c = 0; c < 3; ++c) total += std::max(0.0, s(1 + c));
        if (total <= 0.0) continue;
        if (std::max(0.0, s(1 + cls)) > 0.35 * total) wmask[i] = 1;
      }
      for (const Component& wcomp : connected_components(wmask, WX, WY)) {
        SignatureSums sums;
        std::vector<double> weights;
        Component comp;  // window centers expressed as cell coordinates
        int pure_windows = 0;
        double pure_id = 0.0, pure_occ = 0.0;
        for (const auto& [wx, wy] : wcomp.cells) {
          const Eigen::VectorXd& s = demixed[static_cast<std::size_t>(wx) * WY + wy];
          const double mass = std::max(0.0, s(1 + cls));
          sums.occ += s(0);
          for (int c = 0; c < 3; ++c) sums.cls[c] += std::max(0.0, s(1 + c));
          comp.cells.emplace_back(wx * M + M / 2, wy * M + M / 2);
          weights.push_back(mass);
          // Id ratios are only meaningful in single-class windows.
          double other = 0.0;
          for (int c = 0; c < 3; ++c)
            if (c != cls) other += std::max(0.0, s(1 + c));
          if (other < 0.1 * mass) {
            ++pure_windows;
            pure_id += s(4);
            pure_occ += s(0);
          }
        }
        ExtractedInstance inst =
            make_instance(comp, sums, weights, spec, M * spec.resolution / 2.0);
        inst.box.cls = cls;
        inst.box.h = nominal_height(static_cast<ObjectClass>(cls));
        inst.box.z = inst.box.h / 2.0;
        inst.decoded_id = pure_windows > 0 ? try_decode_id(pure_id, pure_occ) : -1;
        inst.box.id = inst.decoded_id;
        // Footprint: the component's windows, at full resolution.
        inst.cells.clear();
        for (const auto& [wx, wy] : wcomp.cells)
          for (int dx = 0; dx < M; ++dx)
            for (int dy = 0; dy < M; ++dy) inst.cells.emplace_back(wx * M + dx, wy * M + dy);
        window_instances.push_back(std::move(inst));
      }
    }

    // Keep window instances that are not re-detections of a sharp one.
    const double dedup = 0.75 * M * spec.resolution;
    for (ExtractedInstance& wi : window_instances) {
      bool duplicate = false;
      for (const ExtractedInstance& ci : instances) {
        if (std::hypot(wi.box.x - ci.box.x, wi.box.y - ci.box.y) < dedup) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) instances.push_back(std::move(wi));
    }
  }

  // Instance raster: first writer wins, so sharp footprints take priority.
  ExtractionResult result;
  result.instance_map = InstanceMap(X, Y);
  std::set<int> used_ids;
  int fresh = 64;  // beyond any decodable id + 1
  for (ExtractedInstance& inst : instances) {
    int map_id = inst.decoded_id >= 0 ? inst.decoded_id + 1 : -1;
    if (map_id < 0 || used_ids.count(map_id)) map_id = fresh++;
    used_ids.insert(map_id);
    for (const auto& [x, y] : inst.cells)
      if (result.instance_map.at(x, y) == 0) result.instance_map.at(x, y) = map_id;
    result.instance_map.id_class[map_id] = inst.box.cls;
    result.instances.push_back(std::move(inst));
  }
  return result;
}

std::vector<DetectionBox> merge_boxes_keep_confident(const std::vector<DetectionBox>& boxes,
                                                     double merge_radius) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return boxes[static_cast<std::size_t>(a)].confidence > boxes[static_cast<std::size_t>(b)].confidence;
  });
  std::vector<DetectionBox> kept;
  for (int i : order) {
    const DetectionBox& b = boxes[static_cast<std::size_t>(i)];
    bool close = false;
    for (const DetectionBox& k : kept)
      if (std::hypot(b.x - k.x, b.y - k.y) < merge_radius) {
        close = true;
        break;
      }
    if (!close) kept.push_back(b);
  }
  return kept;
}

void assign_track_ids(std::vector<ExtractionResult>& sequence, double max_link_distance) {
  struct Track {
    int map_id;
    double x, y;
  };
  std::vector<Track> prev;
  int next_free = 1000;
  for (ExtractionResult& frame : sequence) {
    std::vector<Track> current;
    std::set<int> used;
    // Decoded ids are globally stable; reserve them first.
    for (const ExtractedInstance& inst : frame.instances)
      if (inst.decoded_id >= 0) used.insert(inst.decoded_id + 1);

    for (ExtractedInstance& inst : frame.instances) {
      int id;
      if (inst.decoded_id >= 0) {
        id = inst.decoded_id + 1;
      } else {
        id = -1;
        double best = max_link_distance;
        for (const Track& t : prev) {
          if (used.count(t.map_id)) continue;
          const double d = std::hypot(inst.box.x - t.x, inst.box.y - t.y);
          if (d < best) {
            best = d;
            id = t.map_id;
          }
        }
        if (id < 0) id = next_free++;
        used.insert(id);
      }
      current.push_back({id, inst.box.x, inst.box.y});
    }

    // Rewrite the raster to the linked ids.
    InstanceMap relabeled(frame.instance_map.X, frame.instance_map.Y);
    for (std::size_t i = 0; i < frame.instances.size(); ++i) {
      const int new_id = current[i].map_id;
      for (const auto& [x, y] : frame.instances[i].cells)
        if (relabeled.at(x, y) == 0) relabeled.at(x, y) = new_id;
      relabeled.id_class[new_id] = frame.instances[i].box.cls;
      frame.instances[i].box.id = new_id - 1;
    }
    frame.instance_map = std::move(relabeled);
    prev = std::move(current);
  }
}

}  // namespace bevswarm
