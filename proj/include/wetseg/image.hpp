#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "wetseg/common.hpp"

namespace wetseg {

/// Dense row-major 2-D array. Value type; copies are deep.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    require(rows >= 0 && cols >= 0, "Image: negative dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_shape(const Image& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Image crop(int r0, int c0, int h, int w) const {
    require(r0 >= 0 && c0 >= 0 && r0 + h <= rows_ && c0 + w <= cols_, "Image::crop out of range");
    Image out(h, w);
    for (int r = 0; r < h; ++r)
      std::copy_n(&(*this)(r0 + r, c0), w, &out(r, 0));
    return out;
  }

  void paste(const Image& patch, int r0, int c0) {
    require(r0 >= 0 && c0 >= 0 && r0 + patch.rows() <= rows_ && c0 + patch.cols() <= cols_,
            "Image::paste out of range");
    for (int r = 0; r < patch.rows(); ++r)
      std::copy_n(&patch(r, 0), patch.cols(), &(*this)(r0 + r, c0));
  }

  bool operator==(const Image& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<float>;
using MaskImage = Image<std::uint8_t>;  // {0=land, 1=water} or model class ids

inline bool is_binary(const MaskImage& m) {
  for (auto v : m.raw())
    if (v > 1) return false;
  return true;
}

template <typename T>
Image<T> flip_horizontal(const Image<T>& im) {
  Image<T> out(im.rows(), im.cols());
  for (int r = 0; r < im.rows(); ++r)
    for (int c = 0; c < im.cols(); ++c) out(r, c) = im(r, im.cols() - 1 - c);
  return out;
}

template <typename T>
Image<T> flip_vertical(const Image<T>& im) {
  Image<T> out(im.rows(), im.cols());
  for (int r = 0; r < im.rows(); ++r)
    for (int c = 0; c < im.cols(); ++c) out(r, c) = im(im.rows() - 1 - r, c);
  return out;
}

}  // namespace wetseg
