#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace bevswarm {

// Oriented 3D box on the BEV ground plane: (x, y) are the two ground axes,
// z the vertical center. Matching and translation errors use the 2D ground
// distance only.
struct DetectionBox {
  double x = 0.0, y = 0.0, z = 0.0;  // center, meters
  double w = 0.0, l = 0.0, h = 0.0;  // size, meters
  double yaw = 0.0;                  // radians, (-pi, pi]
  int cls = 0;
  double confidence = 1.0;  // predictions only
  int id = -1;
};

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (pred index, gt index)
};

// Greedy matching in descending confidence; each prediction takes the
// nearest still-unmatched ground truth within distance d. Inputs are
// expected to hold a single class.
MatchResult match_by_center_distance(const std::vector<DetectionBox>& preds,
                                     const std::vector<DetectionBox>& gts, double d);

// Average precision for one class at center-distance threshold d: the area
// under the precision-recall envelope restricted to recall > 0.1 and
// precision > 0.1, rescaled by 1/0.9 and clamped to [0, 1]. nullopt when
// there is no ground truth.
std::optional<double> average_precision(const std::vector<DetectionBox>& preds,
                                        const std::vector<DetectionBox>& gts, double d);

inline constexpr double kMatchThresholds[4] = {0.5, 1.0, 2.0, 4.0};

// Mean AP over the classes present in the ground truth and the four
// matching thresholds. Classes without ground truth are excluded.
double mean_average_precision(const std::vector<DetectionBox>& preds,
                              const std::vector<DetectionBox>& gts);

// True-positive error means over matched pairs: 2D center distance,
// per-dimension absolute size error averaged over (w, l, h), and absolute
// yaw difference wrapped into [0, pi]. nullopt on an empty matching.
std::optional<double> mean_translation_error(const std::vector<DetectionBox>& preds,
                                             const std::vector<DetectionBox>& gts,
                                             const MatchResult& match);
std::optional<double> mean_scale_error(const std::vector<DetectionBox>& preds,
                                       const std::vector<DetectionBox>& gts,
                                       const MatchResult& match);
std::optional<double> mean_orientation_error(const std::vector<DetectionBox>& preds,
                                             const std::vector<DetectionBox>& gts,
                                             const MatchResult& match);

struct SegMask {
  int X = 0, Y = 0;
  std::vector<std::uint8_t> data;  // row-major, values in {0, 1}

  SegMask() = default;
  SegMask(int x, int y) : X(x), Y(y), data(static_cast<std::size_t>(x) * y, 0) {}
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(x) * Y + y]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(x) * Y + y]; }
};

// Intersection over union; empty vs empty is defined as 1.
double seg_iou(const SegMask& pred, const SegMask& gt);

struct InstanceMap {
  int X = 0, Y = 0;
  std::vector<int> ids;             // 0 = background
  std::map<int, int> id_class;      // instance id -> class label

  InstanceMap() = default;
  InstanceMap(int x, int y) : X(x), Y(y), ids(static_cast<std::size_t>(x) * y, 0) {}
  int& at(int x, int y) { return ids[static_cast<std::size_t>(x) * Y + y]; }
  int at(int x, int y) const { return ids[static_cast<std::size_t>(x) * Y + y]; }

  SegMask occupancy() const;
};

struct PanopticResult {
  double pq = 0.0, sq = 0.0, rq = 0.0;
  int tp = 0, fp = 0, fn = 0;
};

// Segments matched at IoU > 0.5 with equal class form the true positives
// (such a matching is unique). SQ is the mean TP IoU; with no segments on
// either side all three qualities are 1.
PanopticResult panoptic(const InstanceMap& pred, const InstanceMap& gt);

// Mean over frames of per-frame seg_iou.
double temporal_iou(const std::vector<SegMask>& pred, const std::vector<SegMask>& gt);

// Video panoptic quality: per-frame panoptic terms where a pair only counts
// as TP if the predicted id is bound to the same ground-truth track as at
// its first match; the per-frame ratios are averaged so the result stays in
// [0, 1] and reduces to PQ on a single frame.
double vpq(const std::vector<InstanceMap>& pred, const std::vector<InstanceMap>& gt);

}  // namespace bevswarm
