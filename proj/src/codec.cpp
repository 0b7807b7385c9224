#include "bevswarm/codec.hpp"

#include <cmath>
#include <cstring>

#include "bevswarm/rng.hpp"

namespace bevswarm {

namespace {

Eigen::MatrixXf seeded_matrix(int rows, int cols, SplitMix64& rng, float scale) {
  Eigen::MatrixXf m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.next_float(-scale, scale);
  return m;
}

}  // namespace

AttentionParams AttentionParams::seeded(int in_channels, int out_channels, int heads, int head_dim,
                                        std::uint64_t seed, float qk_scale) {
  AttentionParams p;
  p.heads = heads;
  p.head_dim = head_dim;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  SplitMix64 rng(seed);
  const float in_scale = 1.0f / std::sqrt(static_cast<float>(in_channels));
  const float cat_scale = 1.0f / std::sqrt(static_cast<float>(heads * head_dim));
  for (int h = 0; h < heads; ++h) {
    p.Wq.push_back(seeded_matrix(in_channels, head_dim, rng, in_scale * qk_scale));
    p.Wk.push_back(seeded_matrix(in_channels, head_dim, rng, in_scale * qk_scale));
    p.Wv.push_back(seeded_matrix(in_channels, head_dim, rng, in_scale));
  }
  p.Wo = seeded_matrix(heads * head_dim, out_channels, rng, cat_scale);
  return p;
}

void AttentionParams::validate() const {
  if (heads <= 0 || head_dim <= 0 || in_channels <= 0 || out_channels <= 0)
    throw std::invalid_argument("attention: non-positive dimension");
  if (static_cast<int>(Wq.size()) != heads || static_cast<int>(Wk.size()) != heads ||
      static_cast<int>(Wv.size()) != heads)
    throw std::invalid_argument("attention: per-head weight count mismatch");
  for (int h = 0; h < heads; ++h) {
    if (Wq[h].rows() != in_channels || Wq[h].cols() != head_dim ||
        Wk[h].rows() != in_channels || Wk[h].cols() != head_dim ||
        Wv[h].rows() != in_channels || Wv[h].cols() != head_dim)
      throw std::invalid_argument("attention: per-head weight shape mismatch");
    if (!Wq[h].allFinite() || !Wk[h].allFinite() || !Wv[h].allFinite())
      throw std::invalid_argument("attention: non-finite weights");
  }
  if (Wo.rows() != heads * head_dim || Wo.cols() != out_channels)
    throw std::invalid_argument("attention: output projection shape mismatch");
  if (!Wo.allFinite()) throw std::invalid_argument("attention: non-finite weights");
}

std::vector<Eigen::MatrixXf> window_partition(const Tensor3& map, int M) {
  if (M <= 0) throw std::invalid_argument("window: M must be positive");
  if (map.d0() % M != 0 || map.d1() % M != 0)
    throw std::invalid_argument("window: M must divide both spatial dims (got " + map.shape_str() +
                                ", M=" + std::to_string(M) + ")");
  const int wx = map.d0() / M, wy = map.d1() / M, C = map.d2();
  std::vector<Eigen::MatrixXf> windows;
  windows.reserve(static_cast<std::size_t>(wx) * wy);
  for (int bx = 0; bx < wx; ++bx) {
    for (int by = 0; by < wy; ++by) {
      Eigen::MatrixXf seq(M * M, C);
      for (int dx = 0; dx < M; ++dx)
        for (int dy = 0; dy < M; ++dy) {
          const auto fiber = map.fiber(bx * M + dx, by * M + dy);
          for (int c = 0; c < C; ++c) seq(dx * M + dy, c) = fiber[static_cast<std::size_t>(c)];
        }
      windows.push_back(std::move(seq));
    }
  }
  return windows;
}

Tensor3 window_merge(const std::vector<Eigen::MatrixXf>& windows, int X, int Y, int M) {
  if (M <= 0 || X % M != 0 || Y % M != 0)
    throw std::invalid_argument("window: M must divide both spatial dims");
  const int wx = X / M, wy = Y / M;
  if (windows.size() != static_cast<std::size_t>(wx) * wy)
    throw std::invalid_argument("window: window count mismatch");
  const int C = windows.empty() ? 0 : static_cast<int>(windows.front().cols());
  Tensor3 map(X, Y, C);
  for (int bx = 0; bx < wx; ++bx)
    for (int by = 0; by < wy; ++by) {
      const Eigen::MatrixXf& seq = windows[static_cast<std::size_t>(bx) * wy + by];
      if (seq.rows() != M * M || seq.cols() != C)
        throw std::invalid_argument("window: sequence shape mismatch");
      for (int dx = 0; dx < M; ++dx)
        for (int dy = 0; dy < M; ++dy) {
          auto fiber = map.fiber(bx * M + dx, by * M + dy);
          for (int c = 0; c < C; ++c) fiber[static_cast<std::size_t>(c)] = seq(dx * M + dy, c);
        }
    }
  return map;
}

Eigen::MatrixXf multi_head_self_attention(const Eigen::MatrixXf& seq, const AttentionParams& params,
                                          std::vector<Eigen::MatrixXf>* attention_out) {
  params.validate();
  if (seq.cols() != params.in_channels)
    throw std::invalid_argument("attention: sequence channel mismatch");
  const int L = static_cast<int>(seq.rows());
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(params.head_dim));

  Eigen::MatrixXf concat(L, params.heads * params.head_dim);
  if (attention_out) attention_out->clear();
  for (int h = 0; h < params.heads; ++h) {
    const Eigen::MatrixXf q = seq * params.Wq[h];
    const Eigen::MatrixXf k = seq * params.Wk[h];
    const Eigen::MatrixXf v = seq * params.Wv[h];
    Eigen::MatrixXf scores = (q * k.transpose()) * inv_sqrt;
    for (int r = 0; r < L; ++r) {
      const float row_max = scores.row(r).maxCoeff();
      double denom = 0.0;
      for (int c = 0; c < L; ++c) {
        const float e = std::exp(scores(r, c) - row_max);
        scores(r, c) = e;
        denom += e;
      }
      for (int c = 0; c < L; ++c) scores(r, c) = static_cast<float>(scores(r, c) / denom);
    }
    concat.block(0, h * params.head_dim, L, params.head_dim) = scores * v;
    if (attention_out) attention_out->push_back(scores);
  }
  Eigen::MatrixXf out = concat * params.Wo;
  if (!out.allFinite()) throw std::runtime_error("attention produced non-finite output");
  return out;
}

Tensor3 encode_high(const Tensor3& bev, const AttentionParams& params, int M) {
  auto windows = window_partition(bev, M);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    try {
      windows[w] = multi_head_self_attention(windows[w], params);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("high band window " + std::to_string(w) + ": " + e.what());
    }
  }
  return window_merge(windows, bev.d0(), bev.d1(), M);
}

Tensor3 average_pool(const Tensor3& map, int M) {
  if (M <= 0 || map.d0() % M != 0 || map.d1() % M != 0)
    throw std::invalid_argument("pool: M must divide both spatial dims");
  Tensor3 out(map.d0() / M, map.d1() / M, map.d2());
  const double inv = 1.0 / (static_cast<double>(M) * M);
  for (int ox = 0; ox < out.d0(); ++ox)
    for (int oy = 0; oy < out.d1(); ++oy) {
      auto fiber = out.fiber(ox, oy);
      for (int c = 0; c < map.d2(); ++c) {
        double acc = 0.0;
        for (int dx = 0; dx < M; ++dx)
          for (int dy = 0; dy < M; ++dy) acc += map.at(ox * M + dx, oy * M + dy, c);
        fiber[static_cast<std::size_t>(c)] = static_cast<float>(acc * inv);
      }
    }
  return out;
}

Tensor3 encode_low(const Tensor3& bev, const AttentionParams& params, int M) {
  const Tensor3 pooled = average_pool(bev, M);
  const int L = pooled.d0() * pooled.d1();
  Eigen::MatrixXf seq(L, pooled.d2());
  for (int x = 0; x < pooled.d0(); ++x)
    for (int y = 0; y < pooled.d1(); ++y) {
      const auto fiber = pooled.fiber(x, y);
      for (int c = 0; c < pooled.d2(); ++c) seq(x * pooled.d1() + y, c) = fiber[static_cast<std::size_t>(c)];
    }
  Eigen::MatrixXf out;
  try {
    out = multi_head_self_attention(seq, params);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("low band: ") + e.what());
  }
  Tensor3 result(pooled.d0(), pooled.d1(), params.out_channels);
  for (int x = 0; x < result.d0(); ++x)
    for (int y = 0; y < result.d1(); ++y) {
      auto fiber = result.fiber(x, y);
      for (int c = 0; c < result.d2(); ++c) fiber[static_cast<std::size_t>(c)] = out(x * result.d1() + y, c);
    }
  return result;
}

CodecParams CodecParams::seeded(int channels, int heads, int window, std::uint64_t seed,
                                float qk_scale) {
  if (channels % 2 != 0) throw std::invalid_argument("codec: channel count must be even");
  if (channels % heads != 0) throw std::invalid_argument("codec: heads must divide channels");
  CodecParams p;
  p.window = window;
  const int head_dim = channels / heads;
  p.high = AttentionParams::seeded(channels, channels / 2, heads, head_dim,
                                   derive_seed(seed, 0x11), qk_scale);
  p.low = AttentionParams::seeded(channels, channels / 2, heads, head_dim,
                                  derive_seed(seed, 0x22), qk_scale);
  return p;
}

FrequencyPacket encode(const Tensor3& bev, const CodecParams& params, std::uint16_t sender_id,
                       std::uint32_t frame_id, const PacketPose& pose) {
  if (bev.d2() % 2 != 0) throw std::invalid_argument("encode: channel count must be even");
  if (params.high.out_channels * 2 != bev.d2() || params.low.out_channels * 2 != bev.d2())
    throw std::invalid_argument("encode: attention output must be half the input channels");
  FrequencyPacket pkt;
  pkt.sender_id = sender_id;
  pkt.frame_id = frame_id;
  pkt.window = static_cast<std::uint16_t>(params.window);
  pkt.pose = pose;
  pkt.high = encode_high(bev, params.high, params.window);
  pkt.low = encode_low(bev, params.low, params.window);
  return pkt;
}

double transmission_ratio(int M) {
  if (M < 1) throw std::invalid_argument("transmission_ratio: M must be >= 1");
  const double m2 = static_cast<double>(M) * M;
  return (1.0 + 1.0 / m2) / 2.0;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw ProtocolError("packet truncated");
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

void put_band(std::vector<std::uint8_t>& out, const Tensor3& band) {
  for (float v : band.flat()) put_f32(out, v);
}

}  // namespace

std::vector<std::uint8_t> serialize_packet(const FrequencyPacket& pkt) {
  std::vector<std::uint8_t> out;
  out.reserve(pkt.total_bytes());
  out.insert(out.end(), {'H', 'L', 'F', 'D'});
  put_u16(out, pkt.version);
  put_u16(out, pkt.sender_id);
  put_u32(out, pkt.frame_id);
  put_u16(out, pkt.window);
  put_u16(out, static_cast<std::uint16_t>(pkt.x()));
  put_u16(out, static_cast<std::uint16_t>(pkt.y()));
  put_u16(out, static_cast<std::uint16_t>(pkt.channels()));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) put_f32(out, pkt.pose.R(r, c));
  for (int i = 0; i < 3; ++i) put_f32(out, pkt.pose.T(i));
  put_f32(out, pkt.pose.H);
  put_u16(out, 0);  // reserved
  put_band(out, pkt.high);
  put_band(out, pkt.low);
  return out;
}

FrequencyPacket deserialize_packet(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  r.need(4);
  if (!(bytes[0] == 'H' && bytes[1] == 'L' && bytes[2] == 'F' && bytes[3] == 'D'))
    throw ProtocolError("bad magic");
  r.pos = 4;
  FrequencyPacket pkt;
  pkt.version = r.u16();
  if (pkt.version != kPacketVersion) throw ProtocolError("unsupported packet version");
  pkt.sender_id = r.u16();
  pkt.frame_id = r.u32();
  pkt.window = r.u16();
  const int X = r.u16();
  const int Y = r.u16();
  const int C = r.u16();
  if (pkt.window == 0 || C % 2 != 0 || X % pkt.window != 0 || Y % pkt.window != 0)
    throw ProtocolError("inconsistent packet geometry");
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) pkt.pose.R(row, col) = r.f32();
  for (int i = 0; i < 3; ++i) pkt.pose.T(i) = r.f32();
  pkt.pose.H = r.f32();
  (void)r.u16();  // reserved
  if (r.pos != kPacketHeaderBytes) throw ProtocolError("header size mismatch");

  pkt.high = Tensor3(X, Y, C / 2);
  for (float& v : pkt.high.flat()) v = r.f32();
  pkt.low = Tensor3(X / pkt.window, Y / pkt.window, C / 2);
  for (float& v : pkt.low.flat()) v = r.f32();
  if (r.pos != bytes.size()) throw ProtocolError("trailing bytes after payload");
  return pkt;
}

}  // namespace bevswarm
