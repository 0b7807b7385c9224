#include "bevswarm/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "bevswarm/rng.hpp"

namespace bevswarm {

void RelativePose::validate() const {
  if (((rot.transpose() * rot) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("relative pose: rotation is not orthonormal");
}

RelativePose relative_pose(const PacketPose& sender, const PacketPose& receiver) {
  const Eigen::Matrix3d rs = sender.R.cast<double>();
  const Eigen::Matrix3d rr = receiver.R.cast<double>();
  const Eigen::Matrix3d rel = rr.transpose() * rs;
  // Rotations about the vertical leave the y row/column at identity.
  if (std::abs(rel(1, 1) - 1.0) > 1e-6 || std::abs(rel(0, 1)) > 1e-6 ||
      std::abs(rel(1, 0)) > 1e-6 || std::abs(rel(2, 1)) > 1e-6 || std::abs(rel(1, 2)) > 1e-6)
    throw std::invalid_argument("relative pose: platform rotation is not about the vertical axis");
  const Eigen::Vector3d dt =
      rr.transpose() * (sender.T.cast<double>() - receiver.T.cast<double>());
  RelativePose out;
  // Rebuild the planar rotation from its angle; f32 header poses carry
  // ~1e-7 of noise that would otherwise leak into the orthonormality check.
  const double theta = std::atan2(rel(0, 2), rel(0, 0));
  out.rot << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  out.t << dt.x(), dt.z();
  out.validate();
  return out;
}

Tensor3 align(const Tensor3& map, const RelativePose& rel, const GridSpec& spec) {
  if (map.d0() != spec.size_x() || map.d1() != spec.size_y())
    throw std::invalid_argument("align: map does not match grid spec");
  if (rel.is_identity()) return map;

  const RelativePose inv = rel.inverse();
  Tensor3 out(map.d0(), map.d1(), map.d2());
  for (int ix = 0; ix < out.d0(); ++ix) {
    for (int iy = 0; iy < out.d1(); ++iy) {
      const Eigen::Vector2d recv(spec.cell_center_x(ix), spec.cell_center_y(iy));
      const Eigen::Vector2d src = inv.rot * recv + inv.t;
      double gx = (src.x() - spec.x_min) / spec.resolution - 0.5;
      double gy = (src.y() - spec.y_min) / spec.resolution - 0.5;
      // Snap sub-nanocell offsets so exact cell-multiple translations stay
      // lossless.
      if (std::abs(gx - std::round(gx)) < 1e-9) gx = std::round(gx);
      if (std::abs(gy - std::round(gy)) < 1e-9) gy = std::round(gy);
      const int x0 = static_cast<int>(std::floor(gx));
      const int y0 = static_cast<int>(std::floor(gy));
      const double fx = gx - x0;
      const double fy = gy - y0;
      auto fiber = out.fiber(ix, iy);
      const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const int cx[4] = {x0, x0 + 1, x0, x0 + 1};
      const int cy[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int c = 0; c < map.d2(); ++c) {
        double acc = 0.0;
        bool exact = false;
        for (int k = 0; k < 4; ++k) {
          if (w[k] == 0.0) continue;
          if (cx[k] < 0 || cx[k] >= map.d0() || cy[k] < 0 || cy[k] >= map.d1()) continue;
          const float v = map.at(cx[k], cy[k], c);
          if (w[k] == 1.0) {
            fiber[static_cast<std::size_t>(c)] = v;  // integer-shift case: copy the bits
            exact = true;
            break;
          }
          acc += w[k] * v;
        }
        if (!exact) fiber[static_cast<std::size_t>(c)] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor3 upsample_low(const Tensor3& low, int M, const UpsampleSpec& up) {
  if (M <= 0) throw std::invalid_argument("upsample: M must be positive");
  Tensor3 out(low.d0() * M, low.d1() * M, low.d2());
  switch (up.mode) {
    case UpsampleMode::kBoxReplicate: {
      for (int x = 0; x < out.d0(); ++x)
        for (int y = 0; y < out.d1(); ++y) {
          const auto src = low.fiber(x / M, y / M);
          auto dst = out.fiber(x, y);
          std::copy(src.begin(), src.end(), dst.begin());
        }
      break;
    }
    case UpsampleMode::kBilinear: {
      for (int x = 0; x < out.d0(); ++x) {
        const double sx = (x + 0.5) / M - 0.5;
        const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, low.d0() - 1);
        const int x1 = std::min(x0 + 1, low.d0() - 1);
        const double fx = std::clamp(sx - x0, 0.0, 1.0);
        for (int y = 0; y < out.d1(); ++y) {
          const double sy = (y + 0.5) / M - 0.5;
          const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, low.d1() - 1);
          const int y1 = std::min(y0 + 1, low.d1() - 1);
          const double fy = std::clamp(sy - y0, 0.0, 1.0);
          auto dst = out.fiber(x, y);
          for (int c = 0; c < low.d2(); ++c) {
            const double v = (1 - fx) * (1 - fy) * low.at(x0, y0, c) +
                             fx * (1 - fy) * low.at(x1, y0, c) +
                             (1 - fx) * fy * low.at(x0, y1, c) + fx * fy * low.at(x1, y1, c);
            dst[static_cast<std::size_t>(c)] = static_cast<float>(v);
          }
        }
      }
      break;
    }
    case UpsampleMode::kSeededKernel: {
      SplitMix64 rng(up.seed);
      std::vector<float> kernel(static_cast<std::size_t>(M) * M);
      for (float& k : kernel) k = rng.next_float(0.5f, 1.5f);
      for (int x = 0; x < out.d0(); ++x)
        for (int y = 0; y < out.d1(); ++y) {
          const float k = kernel[static_cast<std::size_t>(x % M) * M + (y % M)];
          const auto src = low.fiber(x / M, y / M);
          auto dst = out.fiber(x, y);
          for (int c = 0; c < low.d2(); ++c) dst[static_cast<std::size_t>(c)] = src[static_cast<std::size_t>(c)] * k;
        }
      break;
    }
  }
  return out;
}

Tensor3 decode_packet(const FrequencyPacket& pkt, const PacketPose& receiver, const GridSpec& spec,
                      const UpsampleSpec& up) {
  const int X = spec.size_x(), Y = spec.size_y();
  const int M = pkt.window;
  if (pkt.x() != X || pkt.y() != Y)
    throw ProtocolError("decode: packet grid " + std::to_string(pkt.x()) + "x" +
                        std::to_string(pkt.y()) + " does not match receiver grid " +
                        std::to_string(X) + "x" + std::to_string(Y));
  if (M <= 0 || X % M != 0 || Y % M != 0) throw ProtocolError("decode: bad window size");
  if (pkt.low.d0() != X / M || pkt.low.d1() != Y / M || pkt.low.d2() != pkt.high.d2())
    throw ProtocolError("decode: band shapes inconsistent");

  const RelativePose rel = relative_pose(pkt.pose, receiver);

  GridSpec pooled = spec;
  pooled.resolution = spec.resolution * M;

  const Tensor3 low_aligned = align(pkt.low, rel, pooled);
  const Tensor3 low_up = upsample_low(low_aligned, M, up);
  const Tensor3 high_aligned = align(pkt.high, rel, spec);

  const int half = pkt.high.d2();
  Tensor3 out(X, Y, half * 2);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) {
      auto dst = out.fiber(x, y);
      const auto lo = low_up.fiber(x, y);
      const auto hi = high_aligned.fiber(x, y);
      for (int c = 0; c < half; ++c) {
        dst[static_cast<std::size_t>(c)] = lo[static_cast<std::size_t>(c)];
        dst[static_cast<std::size_t>(half + c)] = hi[static_cast<std::size_t>(c)];
      }
    }
  return out;
}

FusionWeightNet FusionWeightNet::seeded(int in_channels, int hidden, std::uint64_t seed) {
  FusionWeightNet net;
  net.in_channels = in_channels;
  net.hidden = hidden;
  SplitMix64 rng(seed);
  const float s1 = 1.0f / std::sqrt(static_cast<float>(in_channels) * 9.0f);
  const float s2 = 1.0f / std::sqrt(static_cast<float>(hidden) * 9.0f);
  net.w1.resize(static_cast<std::size_t>(hidden) * in_channels * 9);
  net.w2.resize(static_cast<std::size_t>(hidden) * 9);
  for (float& w : net.w1) w = rng.next_float(-s1, s1);
  for (float& w : net.w2) w = rng.next_float(-s2, s2);
  return net;
}

namespace {

// 3x3 convolution with zero padding; input (X, Y, Cin) channel pairs are
// provided by a sampler so the concat [ego ; collab] never materializes.
template <typename Sampler>
void conv3x3(int X, int Y, int cin, int cout, const std::vector<float>& w, Sampler&& sample,
             Tensor3& out, bool relu) {
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) {
      auto dst = out.fiber(x, y);
      for (int oc = 0; oc < cout; ++oc) {
        double acc = 0.0;
        const float* wk = w.data() + static_cast<std::size_t>(oc) * cin * 9;
        for (int ic = 0; ic < cin; ++ic)
          for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
              const int sx = x + dx, sy = y + dy;
              if (sx < 0 || sx >= X || sy < 0 || sy >= Y) continue;
              acc += static_cast<double>(wk[static_cast<std::size_t>(ic) * 9 + (dx + 1) * 3 + (dy + 1)]) *
                     sample(sx, sy, ic);
            }
        dst[static_cast<std::size_t>(oc)] = relu ? std::max(0.0f, static_cast<float>(acc))
                                                 : static_cast<float>(acc);
      }
    }
}

Tensor3 score_map(const Tensor3& ego, const Tensor3& collab, const FusionWeightNet& net) {
  const int X = ego.d0(), Y = ego.d1(), C = ego.d2();
  Tensor3 hidden(X, Y, net.hidden);
  conv3x3(X, Y, 2 * C, net.hidden, net.w1,
          [&](int x, int y, int ic) -> float {
            return ic < C ? ego.at(x, y, ic) : collab.at(x, y, ic - C);
          },
          hidden, /*relu=*/true);
  Tensor3 score(X, Y, 1);
  conv3x3(X, Y, net.hidden, 1, net.w2,
          [&](int x, int y, int ic) -> float { return hidden.at(x, y, ic); }, score,
          /*relu=*/false);
  return score;
}

}  // namespace

std::vector<Tensor3> fusion_weights(const Tensor3& ego_bev, const std::vector<Tensor3>& collabs,
                                    const FusionWeightNet& net) {
  if (collabs.empty()) throw std::invalid_argument("fusion: empty collaborator list");
  if (net.in_channels != 2 * ego_bev.d2())
    throw std::invalid_argument("fusion: weight net expects 2C input channels");
  for (const Tensor3& c : collabs)
    if (!c.same_shape(ego_bev)) throw std::invalid_argument("fusion: collaborator shape mismatch");

  const std::size_t n = collabs.size();
  std::vector<Tensor3> scores;
  scores.reserve(n);
  for (const Tensor3& c : collabs) scores.push_back(score_map(ego_bev, c, net));

  // Per-pixel softmax across collaborators.
  const int X = ego_bev.d0(), Y = ego_bev.d1();
  std::vector<Tensor3> weights(n, Tensor3(X, Y, 1));
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) {
      float m = scores[0].at(x, y, 0);
      for (std::size_t j = 1; j < n; ++j) m = std::max(m, scores[j].at(x, y, 0));
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) denom += std::exp(scores[j].at(x, y, 0) - m);
      for (std::size_t j = 0; j < n; ++j)
        weights[j].at(x, y, 0) =
            static_cast<float>(std::exp(scores[j].at(x, y, 0) - m) / denom);
    }
  return weights;
}

Tensor3 fuse(const std::vector<Tensor3>& collabs, const std::vector<Tensor3>& weights) {
  if (collabs.empty() || collabs.size() != weights.size())
    throw std::invalid_argument("fuse: collaborator/weight count mismatch");
  for (std::size_t j = 1; j < collabs.size(); ++j)
    if (!collabs[j].same_shape(collabs[0])) throw std::invalid_argument("fuse: shape mismatch");

  const int X = collabs[0].d0(), Y = collabs[0].d1(), C = collabs[0].d2();
  Tensor3 out(X, Y, C);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) {
      auto dst = out.fiber(x, y);
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < collabs.size(); ++j)
          acc += static_cast<double>(weights[j].at(x, y, 0)) * collabs[j].at(x, y, c);
        dst[static_cast<std::size_t>(c)] = static_cast<float>(acc);
      }
    }
  return out;
}

Tensor3 fuse_collaborators(const Tensor3& ego_bev, std::vector<Contribution> remote,
                           const FusionWeightNet& net) {
  std::erase_if(remote, [](const Contribution& c) {
    for (float v : c.features.flat())
      if (v != 0.0f) return false;
    return true;
  });
  std::sort(remote.begin(), remote.end(),
            [](const Contribution& a, const Contribution& b) { return a.sender_id < b.sender_id; });
  for (std::size_t j = 1; j < remote.size(); ++j)
    if (remote[j].sender_id == remote[j - 1].sender_id)
      throw std::invalid_argument("fusion: duplicate sender id " +
                                  std::to_string(remote[j].sender_id));
  std::vector<Tensor3> collabs;
  collabs.reserve(remote.size() + 1);
  collabs.push_back(ego_bev);  // ego as contribution 0, identity pose, uncompressed
  for (Contribution& c : remote) collabs.push_back(std::move(c.features));
  const auto weights = fusion_weights(ego_bev, collabs, net);
  return fuse(collabs, weights);
}

}  // namespace bevswarm
