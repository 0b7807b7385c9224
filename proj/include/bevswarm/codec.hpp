#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bevswarm/tensor.hpp"

namespace bevswarm {

// Malformed or incompatible packet bytes.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Multi-head self-attention weights. Per-head projections are C x D_h; the
// output projection maps the concatenated heads to C' channels.
struct AttentionParams {
  int heads = 0;
  int head_dim = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<Eigen::MatrixXf> Wq, Wk, Wv;  // heads entries, each C x D_h
  Eigen::MatrixXf Wo;                       // (heads * D_h) x C'

  // Entries drawn uniform(-1/sqrt(C), 1/sqrt(C)) from a splitmix stream;
  // Wq/Wk are additionally multiplied by qk_scale. qk_scale = 0 yields
  // exactly uniform attention (the untrained mean-field limit).
  static AttentionParams seeded(int in_channels, int out_channels, int heads, int head_dim,
                                std::uint64_t seed, float qk_scale = 1.0f);

  void validate() const;
};

// Splits an (X, Y, C) map into non-overlapping M x M windows, each
// flattened to an M^2 x C sequence (local x-major). Window list is
// window-row-major. window_merge is the exact inverse.
std::vector<Eigen::MatrixXf> window_partition(const Tensor3& map, int M);
Tensor3 window_merge(const std::vector<Eigen::MatrixXf>& windows, int X, int Y, int M);

// Softmax(Q K^T / sqrt(D_h)) V per head, heads concatenated then projected.
// Softmax rows are max-subtracted; the normalizer is accumulated in double
// so stored rows sum to 1 within 1e-6 at any sequence length. Throws if the
// output is non-finite. When attention_out is given, the per-head L x L
// attention matrices are copied into it.
Eigen::MatrixXf multi_head_self_attention(const Eigen::MatrixXf& seq, const AttentionParams& params,
                                          std::vector<Eigen::MatrixXf>* attention_out = nullptr);

// High-frequency branch: independent window self-attention, reassembled
// spatially. Output is (X, Y, C/2).
Tensor3 encode_high(const Tensor3& bev, const AttentionParams& params, int M);

// Average pooling with kernel = stride = M (low-pass + downsample).
Tensor3 average_pool(const Tensor3& map, int M);

// Low-frequency branch: average pooling then one global self-attention over
// all XY/M^2 tokens. Output is (X/M, Y/M, C/2).
Tensor3 encode_low(const Tensor3& bev, const AttentionParams& params, int M);

// Sender platform pose carried in the packet header: rotation from the
// sender's local (BEV) frame to the global frame, the sender's global
// position, and its altitude above the ground plane.
struct PacketPose {
  Eigen::Matrix3f R = Eigen::Matrix3f::Identity();
  Eigen::Vector3f T = Eigen::Vector3f::Zero();
  float H = 1.0f;
};

inline constexpr std::uint16_t kPacketVersion = 1;
// magic(4) version(2) sender(2) frame(4) M(2) X(2) Y(2) C(2) pose(52) reserved(2)
inline constexpr std::size_t kPacketHeaderBytes = 74;

struct FrequencyPacket {
  std::uint16_t version = kPacketVersion;
  std::uint16_t sender_id = 0;
  std::uint32_t frame_id = 0;
  std::uint16_t window = 1;  // M
  PacketPose pose;
  Tensor3 high;  // (X, Y, C/2)
  Tensor3 low;   // (X/M, Y/M, C/2)

  int x() const { return high.d0(); }
  int y() const { return high.d1(); }
  int channels() const { return high.d2() * 2; }

  std::size_t payload_bytes() const {
    return 4 * (high.size() + low.size());
  }
  std::size_t total_bytes() const { return kPacketHeaderBytes + payload_bytes(); }
};

// Both branch parameter sets plus the shared window size.
struct CodecParams {
  AttentionParams high;
  AttentionParams low;
  int window = 4;

  // heads * head_dim defaults to C (head_dim = C / heads) and C' = C/2.
  static CodecParams seeded(int channels, int heads, int window, std::uint64_t seed,
                            float qk_scale = 1.0f);
};

FrequencyPacket encode(const Tensor3& bev, const CodecParams& params, std::uint16_t sender_id,
                       std::uint32_t frame_id, const PacketPose& pose);

// Payload floats of a packet over floats of the raw (X, Y, C) map:
// (1 + 1/M^2) / 2.
double transmission_ratio(int M);

// Bit-exact little-endian wire format: 74-byte header, then the high band,
// then the low band, each as f32 in row-major (row, col, channel) order.
std::vector<std::uint8_t> serialize_packet(const FrequencyPacket& pkt);
FrequencyPacket deserialize_packet(std::span<const std::uint8_t> bytes);

}  // namespace bevswarm
