#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bevswarm/bev.hpp"
#include "bevswarm/codec.hpp"
#include "bevswarm/tensor.hpp"

namespace bevswarm {

// Planar rigid motion from the sender's BEV frame to the receiver's:
// p_recv = rot * p_send + t, on the (x, z) ground axes.
struct RelativePose {
  Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  bool is_identity() const { return rot.isIdentity(0.0) && t.isZero(0.0); }
  RelativePose inverse() const { return {rot.transpose(), -(rot.transpose() * t)}; }
  void validate() const;
};

// Derives the planar motion between two platforms from their global poses.
// Both rotations must be about the vertical axis (BEV maps share the ground
// plane).
RelativePose relative_pose(const PacketPose& sender, const PacketPose& receiver);

// Angle by which heading angles rotate under rel (sender frame headings plus
// this delta give receiver frame headings).
inline double heading_delta(const RelativePose& rel) {
  return -std::atan2(rel.rot(0, 1), rel.rot(0, 0));
}

// Inverse-warp with bilinear sampling; samples outside the source map are
// zero. The identity pose returns a bit-identical copy.
Tensor3 align(const Tensor3& map, const RelativePose& rel, const GridSpec& spec);

enum class UpsampleMode {
  kBoxReplicate,  // transposed conv, all-ones M x M kernel, stride M
  kBilinear,      // factor-M bilinear interpolation, block centers aligned
  kSeededKernel,  // seeded per-phase kernel, for codec-robustness tests
};

struct UpsampleSpec {
  UpsampleMode mode = UpsampleMode::kBoxReplicate;
  std::uint64_t seed = 0;
};

// (X/M, Y/M, C') -> (X, Y, C'). The default kernel preserves constants and
// inverts average pooling exactly on maps constant per M x M block.
Tensor3 upsample_low(const Tensor3& low, int M, const UpsampleSpec& up = {});

// Reconstructs collaborative features in the receiver's frame:
// concat[ Up(G(F_low)); G(F_high) ] over channels, low band first.
Tensor3 decode_packet(const FrequencyPacket& pkt, const PacketPose& receiver,
                      const GridSpec& spec, const UpsampleSpec& up = {});

// Small convolutional scorer, 2C -> hidden -> 1, 3x3 kernels, ReLU between,
// no biases, zero padding. Untrained; weights come from a seeded stream.
struct FusionWeightNet {
  int in_channels = 0;
  int hidden = 0;
  std::vector<float> w1;  // hidden x in_channels x 3 x 3
  std::vector<float> w2;  // 1 x hidden x 3 x 3

  static FusionWeightNet seeded(int in_channels, int hidden, std::uint64_t seed);
};

// Per-collaborator contribution weights: softmax over j of
// conv([F_bev ; F_col_j]) at every pixel. Weights sum to 1 per pixel.
std::vector<Tensor3> fusion_weights(const Tensor3& ego_bev, const std::vector<Tensor3>& collabs,
                                    const FusionWeightNet& net);

// Pixel-wise weighted sum of the collaborator maps, weights broadcast
// across channels.
Tensor3 fuse(const std::vector<Tensor3>& collabs, const std::vector<Tensor3>& weights);

// One decoded collaborator map tagged by its sender.
struct Contribution {
  int sender_id = 0;
  Tensor3 features;
};

// Full fusion step: ego participates as contribution 0 (identity pose,
// uncompressed), remote contributions are sorted by sender id, weighted and
// summed. Sorting makes the reduction independent of arrival order.
// All-zero remote maps carry no information and are dropped before
// weighting, so an episode with silent collaborators reduces to the ego
// features exactly.
Tensor3 fuse_collaborators(const Tensor3& ego_bev, std::vector<Contribution> remote,
                           const FusionWeightNet& net);

}  // namespace bevswarm
