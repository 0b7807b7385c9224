#include "bevswarm/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace bevswarm {

namespace {

std::string format_value(const MetricRow& row) {
  if (!row.defined) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", row.value);
  return buf;
}

std::vector<DetectionBox> crop_boxes(const std::vector<DetectionBox>& boxes, double half) {
  std::vector<DetectionBox> out;
  for (const DetectionBox& b : boxes)
    if (std::abs(b.x) <= half && std::abs(b.y) <= half) out.push_back(b);
  return out;
}

InstanceMap crop_map(const InstanceMap& map, const GridSpec& spec, double half) {
  const int x0 = static_cast<int>(std::floor((-half - spec.x_min) / spec.resolution));
  const int x1 = static_cast<int>(std::ceil((half - spec.x_min) / spec.resolution));
  const int y0 = static_cast<int>(std::floor((-half - spec.y_min) / spec.resolution));
  const int y1 = static_cast<int>(std::ceil((half - spec.y_min) / spec.resolution));
  const int cx0 = std::clamp(x0, 0, map.X), cx1 = std::clamp(x1, 0, map.X);
  const int cy0 = std::clamp(y0, 0, map.Y), cy1 = std::clamp(y1, 0, map.Y);
  InstanceMap out(cx1 - cx0, cy1 - cy0);
  for (int x = cx0; x < cx1; ++x)
    for (int y = cy0; y < cy1; ++y) out.at(x - cx0, y - cy0) = map.at(x, y);
  out.id_class = map.id_class;
  return out;
}

// Boxes from all frames pooled with a per-frame coordinate offset large
// enough that cross-frame matches are impossible; AP ranking then spans the
// episode while matching stays per-frame.
void pool_frames(const EpisodeResult& ep, double half, std::vector<DetectionBox>& preds,
                 std::vector<DetectionBox>& gts) {
  const double stride = 64.0 * (std::abs(ep.grid.x_max) + std::abs(ep.grid.x_min) + 1.0);
  for (std::size_t t = 0; t < ep.frames.size(); ++t) {
    std::vector<DetectionBox> p, g;
    for (const ExtractedInstance& inst : ep.frames[t].fused.instances) p.push_back(inst.box);
    p = crop_boxes(p, half);
    g = crop_boxes(ep.frames[t].gt_boxes, half);
    for (DetectionBox& b : p) {
      b.x += stride * static_cast<double>(t);
      preds.push_back(b);
    }
    for (DetectionBox& b : g) {
      b.x += stride * static_cast<double>(t);
      gts.push_back(b);
    }
  }
}

void append_range(const EpisodeResult& ep, const std::string& range, double half,
                  EvalReport& report) {
  std::vector<DetectionBox> preds, gts;
  pool_frames(ep, half, preds, gts);

  report.rows.push_back({range, "detection", "mAP", true, mean_average_precision(preds, gts)});
  const MatchResult match = [&] {
    // TP error convention: match per class at 2 m.
    MatchResult all;
    std::set<int> classes;
    for (const DetectionBox& g : gts) classes.insert(g.cls);
    for (int cls : classes) {
      std::vector<DetectionBox> p, g;
      std::vector<int> p_idx, g_idx;
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].cls == cls) {
          p.push_back(preds[i]);
          p_idx.push_back(static_cast<int>(i));
        }
      for (std::size_t i = 0; i < gts.size(); ++i)
        if (gts[i].cls == cls) {
          g.push_back(gts[i]);
          g_idx.push_back(static_cast<int>(i));
        }
      for (const auto& [pi, gi] : match_by_center_distance(p, g, 2.0).pairs)
        all.pairs.emplace_back(p_idx[static_cast<std::size_t>(pi)], g_idx[static_cast<std::size_t>(gi)]);
    }
    return all;
  }();
  const auto mate = mean_translation_error(preds, gts, match);
  const auto mase = mean_scale_error(preds, gts, match);
  const auto maoe = mean_orientation_error(preds, gts, match);
  report.rows.push_back({range, "detection", "mATE", mate.has_value(), mate.value_or(0.0)});
  report.rows.push_back({range, "detection", "mASE", mase.has_value(), mase.value_or(0.0)});
  report.rows.push_back({range, "detection", "mAOE", maoe.has_value(), maoe.value_or(0.0)});

  // Segmentation: frame-mean IoU plus panoptic counts aggregated over frames.
  double iou_sum = 0.0;
  double tp_iou = 0.0;
  long tp = 0, fp = 0, fn = 0;
  std::vector<SegMask> pred_masks, gt_masks;
  std::vector<InstanceMap> pred_maps, gt_maps;
  for (const FrameOutput& f : ep.frames) {
    const InstanceMap pc = crop_map(f.fused.instance_map, ep.grid, half);
    const InstanceMap gc = crop_map(f.gt_instances, ep.grid, half);
    iou_sum += seg_iou(pc.occupancy(), gc.occupancy());
    const PanopticResult pr = panoptic(pc, gc);
    tp += pr.tp;
    fp += pr.fp;
    fn += pr.fn;
    tp_iou += pr.sq * pr.tp;
    pred_masks.push_back(pc.occupancy());
    gt_masks.push_back(gc.occupancy());
    pred_maps.push_back(pc);
    gt_maps.push_back(gc);
  }
  const double frames = static_cast<double>(ep.frames.size());
  const double denom = tp + 0.5 * fp + 0.5 * fn;
  const bool any_segments = denom > 0.0;
  report.rows.push_back({range, "segmentation", "IoU", true, iou_sum / frames});
  report.rows.push_back(
      {range, "segmentation", "PQ", true, any_segments ? tp_iou / denom : 1.0});
  report.rows.push_back(
      {range, "segmentation", "SQ", true, tp > 0 ? tp_iou / tp : (any_segments ? 0.0 : 1.0)});
  report.rows.push_back(
      {range, "segmentation", "RQ", true, any_segments ? tp / denom : 1.0});

  report.rows.push_back({range, "prediction", "IoU", true, temporal_iou(pred_masks, gt_masks)});
  report.rows.push_back({range, "prediction", "VPQ", true, vpq(pred_maps, gt_maps)});
}

}  // namespace

const MetricRow* EvalReport::find(const std::string& range, const std::string& metric) const {
  for (const MetricRow& row : rows)
    if (row.range == range && row.metric == metric) return &row;
  return nullptr;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "strategy,range,task,metric,value\n";
  for (const MetricRow& row : rows)
    out << strategy << "," << row.range << "," << row.task << "," << row.metric << ","
        << format_value(row) << "\n";
  return out.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "strategy: " << strategy << "\n";
  out << "task          metric  short        long\n";
  const char* metrics[10] = {"mAP", "mATE", "mASE", "mAOE", "IoU", "PQ", "SQ", "RQ", "IoU", "VPQ"};
  const char* tasks[10] = {"detection", "detection", "detection", "detection", "segmentation",
                           "segmentation", "segmentation", "segmentation", "prediction",
                           "prediction"};
  for (int i = 0; i < 10; ++i) {
    const MetricRow* s = nullptr;
    const MetricRow* l = nullptr;
    for (const MetricRow& row : rows) {
      if (row.task == tasks[i] && row.metric == metrics[i]) {
        if (row.range == "short") s = &row;
        if (row.range == "long") l = &row;
      }
    }
    char line[96];
    std::snprintf(line, sizeof line, "%-13s %-7s %-12s %-12s\n", tasks[i], metrics[i],
                  s ? format_value(*s).c_str() : "-", l ? format_value(*l).c_str() : "-");
    out << line;
  }
  return out.str();
}

EvalReport evaluate_episode(const EpisodeResult& episode, bool short_range, bool long_range) {
  EvalReport report;
  report.strategy = to_string(episode.strategy);
  if (short_range) append_range(episode, "short", 37.5, report);
  if (long_range) append_range(episode, "long", 75.0, report);
  return report;
}

}  // namespace bevswarm
