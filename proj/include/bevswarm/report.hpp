#pragma once

#include <string>
#include <vector>

#include "bevswarm/episode.hpp"

namespace bevswarm {

struct MetricRow {
  std::string range;   // "short" | "long"
  std::string task;    // "detection" | "segmentation" | "prediction"
  std::string metric;
  bool defined = true;
  double value = 0.0;
};

struct EvalReport {
  std::string strategy;
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& range, const std::string& metric) const;
  std::string to_csv() const;
  std::string to_text() const;
};

// Full metric bundle over the episode's fused outputs: detection mAP and TP
// errors (matched at 2 m), segmentation IoU / PQ / SQ / RQ aggregated over
// frames, temporal IoU and VPQ. Evaluated at the short (75 m x 75 m) and
// long (150 m x 150 m) perceptual scopes.
EvalReport evaluate_episode(const EpisodeResult& episode, bool short_range, bool long_range);

}  // namespace bevswarm
