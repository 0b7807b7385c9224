#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bevswarm {

// Dense row-major rank-3 float tensor. Index (i, j, k) maps to
// (i * d1 + j) * d2 + k, so k is the fastest axis. Feature maps use
// (u, v, c), BEV grids use (x, y, c); serialization relies on this order.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2, float fill = 0.0f)
      : d0_(d0), d1_(d1), d2_(d2), data_(static_cast<std::size_t>(d0) * d1 * d2, fill) {
    if (d0 < 0 || d1 < 0 || d2 < 0) throw std::invalid_argument("Tensor3: negative dimension");
  }

  int d0() const { return d0_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  float& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  float at(int i, int j, int k) const { return data_[index(i, j, k)]; }

  // Contiguous view of the d2-length fiber at (i, j).
  std::span<float> fiber(int i, int j) { return {data_.data() + index(i, j, 0), static_cast<std::size_t>(d2_)}; }
  std::span<const float> fiber(int i, int j) const {
    return {data_.data() + index(i, j, 0), static_cast<std::size_t>(d2_)};
  }

  std::span<float> flat() { return data_; }
  std::span<const float> flat() const { return data_; }

  bool same_shape(const Tensor3& o) const { return d0_ == o.d0_ && d1_ == o.d1_ && d2_ == o.d2_; }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
  }

  std::string shape_str() const {
    return std::to_string(d0_) + "x" + std::to_string(d1_) + "x" + std::to_string(d2_);
  }

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * d1_ + j) * d2_ + k;
  }

  int d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<float> data_;
};

// Rank-4 variant for frustum volumes (u, v, depth bin, channel).
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int d0, int d1, int d2, int d3, float fill = 0.0f)
      : d0_(d0), d1_(d1), d2_(d2), d3_(d3),
        data_(static_cast<std::size_t>(d0) * d1 * d2 * d3, fill) {}

  int d0() const { return d0_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  int d3() const { return d3_; }

  float& at(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  float at(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }

  std::span<float> fiber(int i, int j, int k) {
    return {data_.data() + index(i, j, k, 0), static_cast<std::size_t>(d3_)};
  }
  std::span<const float> fiber(int i, int j, int k) const {
    return {data_.data() + index(i, j, k, 0), static_cast<std::size_t>(d3_)};
  }

  double sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
  }

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * d1_ + j) * d2_ + k) * d3_ + l;
  }

  int d0_ = 0, d1_ = 0, d2_ = 0, d3_ = 0;
  std::vector<float> data_;
};

}  // namespace bevswarm
