#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stylemix {

/// Dense B x C x H x W array of doubles, row-major with W fastest.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int batch, int channels, int height, int width, double fill = 0.0);

  int batch() const { return b_; }
  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int b, int c, int y, int x) { return data_[index(b, c, y, x)]; }
  double at(int b, int c, int y, int x) const { return data_[index(b, c, y, x)]; }

  /// Contiguous H*W plane for (b, c).
  std::span<double> plane(int b, int c);
  std::span<const double> plane(int b, int c) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Tensor4& other) const {
    return b_ == other.b_ && c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * c_ + c) * h_ + y) * w_ + x;
  }

  int b_ = 0;
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<double> data_;
};

/// Byte-level equality; distinguishes +0 from -0 unlike operator==.
bool bitwise_equal(const Tensor4& a, const Tensor4& b);

/// H x W scalar field, used for alpha masks and noise.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Plane&, const Plane&) = default;
};

/// Intermediate activation f_i. `data` is B x C x H x W.
struct FeatureMap {
  int layer_index = 0;
  Tensor4 data;
};

/// RGB image with values nominally in [-1, 1]; stored as 1 x 3 x H x W.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0) : t_(1, 3, height, width, fill) {}
  explicit Image(Tensor4 t);

  int height() const { return t_.height(); }
  int width() const { return t_.width(); }
  double& at(int c, int y, int x) { return t_.at(0, c, y, x); }
  double at(int c, int y, int x) const { return t_.at(0, c, y, x); }

  const Tensor4& tensor() const { return t_; }
  Tensor4& tensor() { return t_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Tensor4 t_;
};

inline bool bitwise_equal(const Image& a, const Image& b) { return bitwise_equal(a.tensor(), b.tensor()); }

/// Columns [begin, end) of an image, all rows and channels.
Image crop_columns(const Image& img, int begin, int end);
/// Rows [begin, end).
Image crop_rows(const Image& img, int begin, int end);
Image concat_columns(std::span<const Image> parts);
Image concat_rows(std::span<const Image> parts);

/// Sum of squared differences over all pixels and channels.
double squared_distance(const Image& a, const Image& b);

}  // namespace stylemix
