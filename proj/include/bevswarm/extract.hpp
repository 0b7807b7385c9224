#pragma once

#include <vector>

#include "bevswarm/bev.hpp"
#include "bevswarm/codec.hpp"
#include "bevswarm/metrics.hpp"
#include "bevswarm/render.hpp"

namespace bevswarm {

// How the feature channels of a BEV map encode object signatures.
enum class FeatureLayout {
  kRaw,         // signature channels as written by the oracle renderer
  kHlfdcFused,  // ego raw signature mixed with decoded high/low bands
};

// Everything the instance decoder knows about the map it reads: the layout,
// the codec window, and the signature rows of the high-band channel map
// (known to every platform since codec parameters are shared config).
struct DecoderInfo {
  FeatureLayout layout = FeatureLayout::kRaw;
  int window = 4;
  Eigen::MatrixXf high_signature;       // kSignatureDims x C/2
  Eigen::MatrixXd high_pinv;            // C/2 x kSignatureDims, right pseudoinverse
  double cell_threshold = 1e-3;         // occupancy threshold, per-cell pass
  double window_mass_threshold = 0.08;  // demixed mass threshold, window pass

  static DecoderInfo raw();
  static DecoderInfo hlfdc_fused(const CodecParams& codec);
};

struct ExtractedInstance {
  DetectionBox box;
  std::vector<std::pair<int, int>> cells;  // grid cells of the footprint
  int decoded_id = -1;                     // scene object id when recoverable
};

struct ExtractionResult {
  std::vector<ExtractedInstance> instances;
  InstanceMap instance_map;
};

// Connected-component instance decoding. Raw layout: threshold the
// occupancy channel, decode class and id from per-cell signature ratios.
// Fused HLFDC layout: a per-cell pass over window-baseline residuals
// recovers sharply localized content, and a per-window demixing pass over
// the baselines recovers collaborator content at window granularity.
ExtractionResult extract_instances(const BevGrid& grid, const DecoderInfo& decoder);

// Late-collaboration box merge: keep the highest-confidence box among boxes
// whose centers lie within merge_radius of each other.
std::vector<DetectionBox> merge_boxes_keep_confident(const std::vector<DetectionBox>& boxes,
                                                     double merge_radius = 0.75);

// Links instances across frames by nearest centroid when decoded ids are
// unavailable, rewriting instance ids in place to be temporally consistent.
void assign_track_ids(std::vector<ExtractionResult>& sequence, double max_link_distance = 3.0);

// Nominal box heights per class; the vertical extent is not observable
// after z-axis pooling.
double nominal_height(ObjectClass cls);

}  // namespace bevswarm
