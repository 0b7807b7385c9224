#include "bevswarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

namespace bevswarm {

namespace {

double ground_distance(const DetectionBox& a, const DetectionBox& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Prediction indices in descending confidence, index order on ties.
std::vector<int> confidence_order(const std::vector<DetectionBox>& preds) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].confidence > preds[static_cast<std::size_t>(b)].confidence;
  });
  return order;
}

double wrap_angle_abs(double delta) {
  double a = std::fmod(std::abs(delta), 2.0 * std::numbers::pi);
  if (a > std::numbers::pi) a = 2.0 * std::numbers::pi - a;
  return a;
}

}  // namespace

MatchResult match_by_center_distance(const std::vector<DetectionBox>& preds,
                                     const std::vector<DetectionBox>& gts, double d) {
  MatchResult result;
  std::vector<bool> taken(gts.size(), false);
  for (int pi : confidence_order(preds)) {
    int best = -1;
    double best_dist = d;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi]) continue;
      const double dist = ground_distance(preds[static_cast<std::size_t>(pi)], gts[gi]);
      if (dist <= best_dist && (best < 0 || dist < best_dist)) {
        best = static_cast<int>(gi);
        best_dist = dist;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      result.pairs.emplace_back(pi, best);
    }
  }
  return result;
}

std::optional<double> average_precision(const std::vector<DetectionBox>& preds,
                                        const std::vector<DetectionBox>& gts, double d) {
  if (gts.empty()) return std::nullopt;
  if (preds.empty()) return 0.0;

  // Walk predictions in confidence order, greedily matching as above, and
  // record the cumulative (recall, precision) staircase.
  std::vector<bool> taken(gts.size(), false);
  std::vector<double> recall, precision;
  int tp = 0, fp = 0;
  for (int pi : confidence_order(preds)) {
    int best = -1;
    double best_dist = d;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi]) continue;
      const double dist = ground_distance(preds[static_cast<std::size_t>(pi)], gts[gi]);
      if (dist <= best_dist && (best < 0 || dist < best_dist)) {
        best = static_cast<int>(gi);
        best_dist = dist;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  // Right-continuous precision envelope over recall.
  const std::size_t n = recall.size();
  std::vector<double> envelope(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    running = std::max(running, precision[i]);
    envelope[i] = running;
  }

  // Integrate the envelope over recall in (0.1, 1], dropping segments whose
  // precision is at or below 0.1, then rescale by 1/0.9.
  constexpr double kMin = 0.1;
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = std::max(prev_recall, kMin);
    const double hi = recall[i];
    if (hi > lo && envelope[i] > kMin) area += (hi - lo) * envelope[i];
    prev_recall = recall[i];
  }
  return std::clamp(area / (1.0 - kMin), 0.0, 1.0);
}

double mean_average_precision(const std::vector<DetectionBox>& preds,
                              const std::vector<DetectionBox>& gts) {
  std::set<int> classes;
  for (const DetectionBox& g : gts) classes.insert(g.cls);
  if (classes.empty()) return 0.0;

  double sum = 0.0;
  int terms = 0;
  for (int cls : classes) {
    std::vector<DetectionBox> p, g;
    for (const DetectionBox& b : preds)
      if (b.cls == cls) p.push_back(b);
    for (const DetectionBox& b : gts)
      if (b.cls == cls) g.push_back(b);
    for (double d : kMatchThresholds) {
      if (const auto ap = average_precision(p, g, d)) {
        sum += *ap;
        ++terms;
      }
    }
  }
  return terms == 0 ? 0.0 : sum / terms;
}

namespace {

template <typename F>
std::optional<double> matched_mean(const std::vector<DetectionBox>& preds,
                                   const std::vector<DetectionBox>& gts, const MatchResult& match,
                                   F&& err) {
  if (match.pairs.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [pi, gi] : match.pairs)
    sum += err(preds[static_cast<std::size_t>(pi)], gts[static_cast<std::size_t>(gi)]);
  return sum / static_cast<double>(match.pairs.size());
}

}  // namespace

std::optional<double> mean_translation_error(const std::vector<DetectionBox>& preds,
                                             const std::vector<DetectionBox>& gts,
                                             const MatchResult& match) {
  return matched_mean(preds, gts, match,
                      [](const DetectionBox& p, const DetectionBox& g) { return ground_distance(p, g); });
}

std::optional<double> mean_scale_error(const std::vector<DetectionBox>& preds,
                                       const std::vector<DetectionBox>& gts,
                                       const MatchResult& match) {
  return matched_mean(preds, gts, match, [](const DetectionBox& p, const DetectionBox& g) {
    return (std::abs(p.w - g.w) + std::abs(p.l - g.l) + std::abs(p.h - g.h)) / 3.0;
  });
}

std::optional<double> mean_orientation_error(const std::vector<DetectionBox>& preds,
                                             const std::vector<DetectionBox>& gts,
                                             const MatchResult& match) {
  return matched_mean(preds, gts, match, [](const DetectionBox& p, const DetectionBox& g) {
    return wrap_angle_abs(p.yaw - g.yaw);
  });
}

double seg_iou(const SegMask& pred, const SegMask& gt) {
  if (pred.X != gt.X || pred.Y != gt.Y) throw std::invalid_argument("seg_iou: size mismatch");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SegMask InstanceMap::occupancy() const {
  SegMask m(X, Y);
  for (std::size_t i = 0; i < ids.size(); ++i) m.data[i] = ids[i] != 0 ? 1 : 0;
  return m;
}

namespace {

struct SegmentStats {
  std::map<int, std::int64_t> area;                       // id -> pixel count
  std::map<std::pair<int, int>, std::int64_t> intersect;  // (pred id, gt id) -> overlap
};

SegmentStats segment_stats(const InstanceMap& pred, const InstanceMap& gt) {
  SegmentStats s;
  for (std::size_t i = 0; i < pred.ids.size(); ++i) {
    const int p = pred.ids[i], g = gt.ids[i];
    if (p != 0 && g != 0) ++s.intersect[{p, g}];
  }
  return s;
}

std::map<int, std::int64_t> areas(const InstanceMap& m) {
  std::map<int, std::int64_t> a;
  for (int id : m.ids)
    if (id != 0) ++a[id];
  return a;
}

int class_of(const InstanceMap& m, int id) {
  const auto it = m.id_class.find(id);
  return it == m.id_class.end() ? 0 : it->second;
}

struct FrameMatch {
  std::vector<std::tuple<int, int, double>> tp;  // (pred id, gt id, IoU)
  int pred_segments = 0, gt_segments = 0;
};

// IoU > 0.5 pairs with equal class; at most one partner per segment follows
// from the overlap threshold.
FrameMatch frame_match(const InstanceMap& pred, const InstanceMap& gt) {
  FrameMatch out;
  const auto pa = areas(pred);
  const auto ga = areas(gt);
  out.pred_segments = static_cast<int>(pa.size());
  out.gt_segments = static_cast<int>(ga.size());
  const auto stats = segment_stats(pred, gt);
  for (const auto& [key, inter] : stats.intersect) {
    const auto [pid, gid] = key;
    if (class_of(pred, pid) != class_of(gt, gid)) continue;
    const double uni = static_cast<double>(pa.at(pid) + ga.at(gid) - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (iou > 0.5) out.tp.emplace_back(pid, gid, iou);
  }
  return out;
}

}  // namespace

PanopticResult panoptic(const InstanceMap& pred, const InstanceMap& gt) {
  if (pred.X != gt.X || pred.Y != gt.Y) throw std::invalid_argument("panoptic: size mismatch");
  const FrameMatch m = frame_match(pred, gt);
  PanopticResult r;
  r.tp = static_cast<int>(m.tp.size());
  r.fp = m.pred_segments - r.tp;
  r.fn = m.gt_segments - r.tp;
  if (r.tp == 0 && r.fp == 0 && r.fn == 0) {
    r.pq = r.sq = r.rq = 1.0;
    return r;
  }
  double iou_sum = 0.0;
  for (const auto& [pid, gid, iou] : m.tp) iou_sum += iou;
  const double denom = r.tp + 0.5 * r.fp + 0.5 * r.fn;
  r.sq = r.tp > 0 ? iou_sum / r.tp : 0.0;
  r.rq = r.tp / denom;
  r.pq = iou_sum / denom;
  return r;
}

double temporal_iou(const std::vector<SegMask>& pred, const std::vector<SegMask>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("temporal_iou: sequences must be non-empty and equal length");
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) sum += seg_iou(pred[t], gt[t]);
  return sum / static_cast<double>(pred.size());
}

double vpq(const std::vector<InstanceMap>& pred, const std::vector<InstanceMap>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("vpq: sequences must be non-empty and equal length");
  std::map<int, int> binding;  // pred id -> gt track it first matched
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const FrameMatch m = frame_match(pred[t], gt[t]);
    double iou_sum = 0.0;
    int tp = 0;
    for (const auto& [pid, gid, iou] : m.tp) {
      const auto it = binding.find(pid);
      if (it == binding.end()) {
        binding.emplace(pid, gid);
      } else if (it->second != gid) {
        continue;  // identity switch: drop from the true positives
      }
      ++tp;
      iou_sum += iou;
    }
    const int fp = m.pred_segments - tp;
    const int fn = m.gt_segments - tp;
    if (tp == 0 && fp == 0 && fn == 0) {
      sum += 1.0;
    } else {
      sum += iou_sum / (tp + 0.5 * fp + 0.5 * fn);
    }
  }
  return sum / static_cast<double>(pred.size());
}

}  // namespace bevswarm
