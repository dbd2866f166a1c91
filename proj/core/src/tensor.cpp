#include "stylemix/tensor.hpp"

#include <cstring>

#include "stylemix/errors.hpp"

namespace stylemix {

Tensor4::Tensor4(int batch, int channels, int height, int width, double fill)
    : b_(batch), c_(channels), h_(height), w_(width) {
  if (batch < 0 || channels < 0 || height < 0 || width < 0) throw DomainError("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(batch) * channels * height * width, fill);
}

std::span<double> Tensor4::plane(int b, int c) {
  return std::span<double>(data_).subspan(index(b, c, 0, 0), static_cast<std::size_t>(h_) * w_);
}

std::span<const double> Tensor4::plane(int b, int c) const {
  return std::span<const double>(data_).subspan(index(b, c, 0, 0), static_cast<std::size_t>(h_) * w_);
}

bool bitwise_equal(const Tensor4& a, const Tensor4& b) {
  if (!a.same_shape(b)) return false;
  return a.size() == 0 || std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

Image::Image(Tensor4 t) : t_(std::move(t)) {
  if (t_.batch() != 1 || t_.channels() != 3) throw DomainError("image tensor must be 1x3xHxW");
}

Image crop_columns(const Image& img, int begin, int end) {
  if (begin < 0 || end > img.width() || begin > end) throw RangeError("column crop out of range");
  Image out(img.height(), end - begin);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = begin; x < end; ++x) out.at(c, y, x - begin) = img.at(c, y, x);
  return out;
}

Image crop_rows(const Image& img, int begin, int end) {
  if (begin < 0 || end > img.height() || begin > end) throw RangeError("row crop out of range");
  Image out(end - begin, img.width());
  for (int c = 0; c < 3; ++c)
    for (int y = begin; y < end; ++y)
      for (int x = 0; x < img.width(); ++x) out.at(c, y - begin, x) = img.at(c, y, x);
  return out;
}

Image concat_columns(std::span<const Image> parts) {
  if (parts.empty()) return {};
  int width = 0;
  const int height = parts.front().height();
  for (const auto& p : parts) {
    if (p.height() != height) throw DomainError("concat_columns: height mismatch");
    width += p.width();
  }
  Image out(height, width);
  int offset = 0;
  for (const auto& p : parts) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < p.width(); ++x) out.at(c, y, offset + x) = p.at(c, y, x);
    offset += p.width();
  }
  return out;
}

Image concat_rows(std::span<const Image> parts) {
  if (parts.empty()) return {};
  int height = 0;
  const int width = parts.front().width();
  for (const auto& p : parts) {
    if (p.width() != width) throw DomainError("concat_rows: width mismatch");
    height += p.height();
  }
  Image out(height, width);
  int offset = 0;
  for (const auto& p : parts) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < width; ++x) out.at(c, offset + y, x) = p.at(c, y, x);
    offset += p.height();
  }
  return out;
}

double squared_distance(const Image& a, const Image& b) {
  if (!a.tensor().same_shape(b.tensor())) throw DomainError("squared_distance: shape mismatch");
  double acc = 0.0;
  const auto va = a.tensor().values();
  const auto vb = b.tensor().values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace stylemix
