#ifndef ASL_DCN_CONV_HPP
#define ASL_DCN_CONV_HPP

#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "geom/transforms.hpp"

namespace asl::dcn {

template <typename T>
struct KernelT {
  int k = 0, in_ch = 0, out_ch = 0;
  std::vector<T> w;  // (ky, kx, ci, co) row-major

  static KernelT zeros(int k, int in_ch, int out_ch) {
    KernelT kr;
    kr.k = k;
    kr.in_ch = in_ch;
    kr.out_ch = out_ch;
    kr.w.assign(static_cast<size_t>(k) * k * in_ch * out_ch, T(0));
    return kr;
  }
  T& at(int ky, int kx, int ci, int co) {
    return w[((static_cast<size_t>(ky) * k + kx) * in_ch + ci) * out_ch + co];
  }
  T at(int ky, int kx, int ci, int co) const {
    return w[((static_cast<size_t>(ky) * k + kx) * in_ch + ci) * out_ch + co];
  }
  const T* tap(int ky, int kx) const {  // (ci, co) block
    return w.data() + (static_cast<size_t>(ky) * k + kx) * in_ch * out_ch;
  }
};

template <typename T>
struct ConvLayerT {
  KernelT<T> kernel;
  std::vector<T> bias;
  int stride = 1;                 // 1 or 2
  bool norm_relu = false;         // per-channel normalize + ReLU after bias
  std::vector<T> norm_mean, norm_var;
};

using ConvLayer = ConvLayerT<float>;

// Per-position sampling offsets (2k^2: dx, dy per tap, row-major over the
// kernel grid) and modulation amplitudes (k^2, in (0,1)).
template <typename T>
struct DeformFieldT {
  TensorT<T> offsets;
  TensorT<T> modulation;
};

using DeformField = DeformFieldT<float>;

enum class DcnVariant { kNone, kFree, kSimilarity, kAffine, kHomography };

DcnVariant parse_dcn_variant(const std::string& name);
const char* dcn_variant_name(DcnVariant v);

// Raw channels the offset predictor must emit for a variant (parameters plus
// k^2 modulation logits). kNone and kFree differ: kFree carries 2k^2 offsets.
int predictor_channels(DcnVariant v, int k);

constexpr double kNormEps = 1e-5;

inline int conv_out_extent(int extent, int stride) {
  return (extent + stride - 1) / stride;
}

namespace detail {

template <typename T>
void finish_position(const ConvLayerT<T>& layer, T* acc, T* out_cell) {
  const int out_ch = layer.kernel.out_ch;
  for (int co = 0; co < out_ch; ++co) {
    T v = acc[co] + layer.bias[co];
    if (layer.norm_relu) {
      v = (v - layer.norm_mean[co]) /
          static_cast<T>(std::sqrt(static_cast<double>(layer.norm_var[co]) + kNormEps));
      if (v < T(0)) v = T(0);
    }
    out_cell[co] = v;
  }
}

template <typename T>
void validate_layer(const TensorT<T>& x, const ConvLayerT<T>& layer) {
  if (x.channels() != layer.kernel.in_ch)
    raise(ErrorKind::kInvalidArg, "conv input channel mismatch");
  if (layer.kernel.k % 2 == 0 || layer.kernel.k <= 0)
    raise(ErrorKind::kInvalidArg, "kernel size must be odd");
  if (layer.stride != 1 && layer.stride != 2)
    raise(ErrorKind::kInvalidArg, "stride must be 1 or 2");
  if (static_cast<int>(layer.bias.size()) != layer.kernel.out_ch)
    raise(ErrorKind::kInvalidArg, "bias length mismatch");
  if (layer.norm_relu && (static_cast<int>(layer.norm_mean.size()) != layer.kernel.out_ch ||
                          static_cast<int>(layer.norm_var.size()) != layer.kernel.out_ch))
    raise(ErrorKind::kInvalidArg, "normalization statistics length mismatch");
}

}  // namespace detail

// y(p) = sum_n w(p_n) x(p + p_n), clamp-to-edge padding, then bias and the
// optional normalization + ReLU. Output is ceil(H/stride) x ceil(W/stride).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvLayerT<T>& layer) {
  detail::validate_layer(x, layer);
  const int k = layer.kernel.k, pad = (k - 1) / 2, s = layer.stride;
  const int in_ch = layer.kernel.in_ch, out_ch = layer.kernel.out_ch;
  const int oh = conv_out_extent(x.height(), s);
  const int ow = conv_out_extent(x.width(), s);
  TensorT<T> out(oh, ow, out_ch);
  std::vector<T> acc(out_ch);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      std::fill(acc.begin(), acc.end(), T(0));
      for (int ky = 0; ky < k; ++ky) {
        const int iy = std::clamp(oy * s + ky - pad, 0, x.height() - 1);
        for (int kx = 0; kx < k; ++kx) {
          const int ix = std::clamp(ox * s + kx - pad, 0, x.width() - 1);
          const T* px = x.cell(iy, ix);
          const T* wt = layer.kernel.tap(ky, kx);
          for (int ci = 0; ci < in_ch; ++ci) {
            const T v = px[ci];
            const T* wrow = wt + static_cast<size_t>(ci) * out_ch;
            for (int co = 0; co < out_ch; ++co) acc[co] += wrow[co] * v;
          }
        }
      }
      detail::finish_position(layer, acc.data(), out.cell(oy, ox));
    }
  }
  return out;
}

// y(p) = sum_n w(p_n) x(p + p_n + dp_n) dm_n with bilinear sampling at
// fractional taps. Offsets and modulation index the output grid.
template <typename T>
TensorT<T> deform_conv2d(const TensorT<T>& x, const ConvLayerT<T>& layer,
                         const DeformFieldT<T>& field) {
  detail::validate_layer(x, layer);
  const int k = layer.kernel.k, pad = (k - 1) / 2, s = layer.stride;
  const int in_ch = layer.kernel.in_ch, out_ch = layer.kernel.out_ch;
  const int oh = conv_out_extent(x.height(), s);
  const int ow = conv_out_extent(x.width(), s);
  if (field.offsets.height() != oh || field.offsets.width() != ow ||
      field.offsets.channels() != 2 * k * k ||
      field.modulation.height() != oh || field.modulation.width() != ow ||
      field.modulation.channels() != k * k)
    raise(ErrorKind::kInvalidArg, "deform field shape mismatch");

  const int hmax = x.height() - 1, wmax = x.width() - 1;
  TensorT<T> out(oh, ow, out_ch);
  std::vector<T> acc(out_ch);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      std::fill(acc.begin(), acc.end(), T(0));
      const T* offs = field.offsets.cell(oy, ox);
      const T* mods = field.modulation.cell(oy, ox);
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const int n = ky * k + kx;
          const T m = mods[n];
          const double sx = std::clamp(
              static_cast<double>(ox * s + kx - pad) + offs[2 * n], 0.0,
              static_cast<double>(wmax));
          const double sy = std::clamp(
              static_cast<double>(oy * s + ky - pad) + offs[2 * n + 1], 0.0,
              static_cast<double>(hmax));
          const int x0 = static_cast<int>(sx);
          const int y0 = static_cast<int>(sy);
          const T fx = static_cast<T>(sx - x0), fy = static_cast<T>(sy - y0);
          const T* wt = layer.kernel.tap(ky, kx);
          if (fx == T(0) && fy == T(0)) {
            // Integer tap (the zero-offset initialization lands here).
            const T* px = x.cell(y0, x0);
            for (int ci = 0; ci < in_ch; ++ci) {
              const T v = px[ci] * m;
              const T* wrow = wt + static_cast<size_t>(ci) * out_ch;
              for (int co = 0; co < out_ch; ++co) acc[co] += wrow[co] * v;
            }
            continue;
          }
          const int x1 = std::min(x0 + 1, wmax);
          const int y1 = std::min(y0 + 1, hmax);
          const T w00 = (T(1) - fy) * (T(1) - fx) * m;
          const T w01 = (T(1) - fy) * fx * m;
          const T w10 = fy * (T(1) - fx) * m;
          const T w11 = fy * fx * m;
          const T* p00 = x.cell(y0, x0);
          const T* p01 = x.cell(y0, x1);
          const T* p10 = x.cell(y1, x0);
          const T* p11 = x.cell(y1, x1);
          for (int ci = 0; ci < in_ch; ++ci) {
            const T v =
                w00 * p00[ci] + w01 * p01[ci] + w10 * p10[ci] + w11 * p11[ci];
            const T* wrow = wt + static_cast<size_t>(ci) * out_ch;
            for (int co = 0; co < out_ch; ++co) acc[co] += wrow[co] * v;
          }
        }
      }
      detail::finish_position(layer, acc.data(), out.cell(oy, ox));
    }
  }
  return out;
}

// Gradient of one pre-bias output value w.r.t. the 2k^2 offsets at its
// position. Bilinear makes this piecewise constant in each unit cell, so
// callers evaluate away from integer sampling loci.
template <typename T>
std::vector<double> deform_output_offset_grad(const TensorT<T>& x,
                                              const ConvLayerT<T>& layer,
                                              const DeformFieldT<T>& field,
                                              int oy, int ox, int co) {
  const int k = layer.kernel.k, pad = (k - 1) / 2, s = layer.stride;
  const T* offs = field.offsets.cell(oy, ox);
  const T* mods = field.modulation.cell(oy, ox);
  std::vector<double> grad(2 * k * k, 0.0);
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      const int n = ky * k + kx;
      const double sx = static_cast<double>(ox * s + kx - pad) + offs[2 * n];
      const double sy = static_cast<double>(oy * s + ky - pad) + offs[2 * n + 1];
      double gx = 0.0, gy = 0.0;
      for (int ci = 0; ci < layer.kernel.in_ch; ++ci) {
        double dx, dy;
        bilinear_sample_grad(x, sx, sy, ci, &dx, &dy);
        const double w = layer.kernel.at(ky, kx, ci, co);
        gx += w * dx;
        gy += w * dy;
      }
      grad[2 * n] = gx * mods[n];
      grad[2 * n + 1] = gy * mods[n];
    }
  }
  return grad;
}

// Runs the predictor convolution over x and expands the per-position raw
// outputs into a deform field according to the variant: free-form offsets
// pass through raw, constrained parameters are activated and expanded via
// the transform grid; modulation logits go through a sigmoid. One group of
// deformation parameters is shared across all input channels.
template <typename T>
DeformFieldT<T> predict_deform_field(const TensorT<T>& x,
                                     const ConvLayerT<T>& predictor,
                                     DcnVariant variant, int k);

extern template DeformFieldT<float> predict_deform_field<float>(
    const TensorT<float>&, const ConvLayerT<float>&, DcnVariant, int);
extern template DeformFieldT<double> predict_deform_field<double>(
    const TensorT<double>&, const ConvLayerT<double>&, DcnVariant, int);

}  // namespace asl::dcn

#endif
