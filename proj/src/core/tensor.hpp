#ifndef ASL_CORE_TENSOR_HPP
#define ASL_CORE_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "core/error.hpp"

namespace asl {

// Dense rank-3 array, row-major with the channel as the fastest index:
// element (y, x, c) lives at ((y * width) + x) * channels + c.
//
// The float instantiation is the inference type; the double one backs the
// finite-difference gradient checks, which need more headroom than f32.
template <typename T>
class TensorT {
 public:
  TensorT() = default;
  TensorT(int height, int width, int channels, T fill = T(0))
      : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || channels <= 0)
      raise(ErrorKind::kInvalidArg, "tensor dimensions must be positive");
    data_.assign(static_cast<size_t>(height) * width * channels, fill);
  }

  static TensorT from_data(int height, int width, int channels,
                           std::vector<T> data) {
    TensorT t(height, width, channels);
    if (data.size() != t.data_.size())
      raise(ErrorKind::kInvalidArg, "tensor data length does not match shape");
    t.data_ = std::move(data);
    return t;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x, int c) {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  const T& at(int y, int x, int c) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }

  // Clamp-to-edge accessor; the border rule shared by sampling and padding.
  const T& at_clamped(int y, int x, int c) const {
    y = std::clamp(y, 0, height_ - 1);
    x = std::clamp(x, 0, width_ - 1);
    return at(y, x, c);
  }

  const T* row(int y) const {
    return data_.data() + static_cast<size_t>(y) * width_ * channels_;
  }
  const T* cell(int y, int x) const {
    return data_.data() + (static_cast<size_t>(y) * width_ + x) * channels_;
  }
  T* cell(int y, int x) {
    return data_.data() + (static_cast<size_t>(y) * width_ + x) * channels_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  const std::vector<T>& values() const { return data_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::pair<T, T> min_max() const {
    auto [lo, hi] = std::minmax_element(data_.begin(), data_.end());
    return {*lo, *hi};
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(height_, width_, channels_);
    for (size_t i = 0; i < data_.size(); ++i)
      out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

// 4-neighbor bilinear interpolation with clamp-to-edge for coordinates
// outside [0, W-1] x [0, H-1]. Exact on affine fields at interior points.
template <typename T>
double bilinear_sample(const TensorT<T>& t, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(t.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(t.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, t.width() - 1);
  const int y1 = std::min(y0 + 1, t.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = t.at(y0, x0, c);
  const double v01 = t.at(y0, x1, c);
  const double v10 = t.at(y1, x0, c);
  const double v11 = t.at(y1, x1, c);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
         fy * ((1.0 - fx) * v10 + fx * v11);
}

// Spatial partial derivatives of bilinear_sample at (x, y). Piecewise linear,
// so not defined at integer coordinates; callers doing gradient checks stay
// away from those loci.
template <typename T>
void bilinear_sample_grad(const TensorT<T>& t, double x, double y, int c,
                          double* dx, double* dy) {
  x = std::clamp(x, 0.0, static_cast<double>(t.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(t.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, t.width() - 1);
  const int y1 = std::min(y0 + 1, t.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = t.at(y0, x0, c);
  const double v01 = t.at(y0, x1, c);
  const double v10 = t.at(y1, x0, c);
  const double v11 = t.at(y1, x1, c);
  *dx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10);
  *dy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01);
}

// Bilinear resize with half-pixel center alignment: destination pixel i reads
// the source at (i + 0.5) * (src / dst) - 0.5. With an integer upsampling
// factor f this reduces to (i - (f - 1) / 2) / f, i.e. a feature cell at
// index i of a stride-s map sits at image coordinate s * i + (s - 1) / 2.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& t, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    raise(ErrorKind::kInvalidArg, "resize target must be positive");
  TensorT<T> out(out_h, out_w, t.channels());
  const double sy = static_cast<double>(t.height()) / out_h;
  const double sx = static_cast<double>(t.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < t.channels(); ++c)
        out.at(y, x, c) = static_cast<T>(bilinear_sample(t, src_x, src_y, c));
    }
  }
  return out;
}

template <typename T>
TensorT<T> upsample_bilinear(const TensorT<T>& t, int factor) {
  if (factor < 1) raise(ErrorKind::kInvalidArg, "upsample factor must be >= 1");
  if (factor == 1) return t;
  return resize_bilinear(t, t.height() * factor, t.width() * factor);
}

// Crop the top-left h x w window; used to trim stride-upsampled maps back to
// the exact input size when the input dimension was odd.
template <typename T>
TensorT<T> crop(const TensorT<T>& t, int h, int w) {
  if (h > t.height() || w > t.width())
    raise(ErrorKind::kInvalidArg, "crop larger than tensor");
  if (h == t.height() && w == t.width()) return t;
  TensorT<T> out(h, w, t.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < t.channels(); ++c) out.at(y, x, c) = t.at(y, x, c);
  return out;
}

}  // namespace asl

#endif
