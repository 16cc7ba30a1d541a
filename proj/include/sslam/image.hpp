#pragma once

#include <Eigen/Core>
#include <cassert>
#include <cstdint>
#include <vector>

namespace sslam {

/// Row-major 2D grid of values. Pixel (col, row) with col in [0, width),
/// row in [0, height).
template <typename T>
class Image {
public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int col, int row) {
    assert(col >= 0 && col < width_ && row >= 0 && row < height_);
    return data_[static_cast<size_t>(row) * width_ + col];
  }
  const T& at(int col, int row) const {
    assert(col >= 0 && col < width_ && row >= 0 && row < height_);
    return data_[static_cast<size_t>(row) * width_ + col];
  }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_size(const Image<U>& other) const {
    return same_size(other.width(), other.height());
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Image<double>;
using ColorImage = Image<Eigen::Vector3d>;
using NormalImage = Image<Eigen::Vector3d>;
using MaskImage = Image<uint8_t>;

}  // namespace sslam
