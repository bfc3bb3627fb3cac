#include "dcn/conv.hpp"

#include <cmath>

namespace asl::dcn {

DcnVariant parse_dcn_variant(const std::string& name) {
  if (name == "none") return DcnVariant::kNone;
  if (name == "free") return DcnVariant::kFree;
  if (name == "similarity") return DcnVariant::kSimilarity;
  if (name == "affine") return DcnVariant::kAffine;
  if (name == "homography") return DcnVariant::kHomography;
  raise(ErrorKind::kInvalidArg, "unknown dcn variant: " + name);
}

const char* dcn_variant_name(DcnVariant v) {
  switch (v) {
    case DcnVariant::kNone: return "none";
    case DcnVariant::kFree: return "free";
    case DcnVariant::kSimilarity: return "similarity";
    case DcnVariant::kAffine: return "affine";
    case DcnVariant::kHomography: return "homography";
  }
  return "?";
}

int predictor_channels(DcnVariant v, int k) {
  const int mod = k * k;
  switch (v) {
    case DcnVariant::kNone: return 0;
    case DcnVariant::kFree: return 2 * k * k + mod;
    case DcnVariant::kSimilarity: return 3 + mod;   // scale + (sin, cos) raw
    case DcnVariant::kAffine: return 6 + mod;       // + three shape residuals
    case DcnVariant::kHomography: return 8 + mod;   // four corner offsets
  }
  return 0;
}

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// The residual/corner ranges are open intervals; tanh enforces them. The
// affine shape normalization is singular at residual exactly -1, so the
// activation is additionally clipped a hair inside the interval.
inline double bounded_tanh(double v) {
  const double t = std::tanh(v);
  return std::clamp(t, -1.0 + 1e-4, 1.0 - 1e-4);
}

}  // namespace

template <typename T>
DeformFieldT<T> predict_deform_field(const TensorT<T>& x,
                                     const ConvLayerT<T>& predictor,
                                     DcnVariant variant, int k) {
  if (variant == DcnVariant::kNone)
    raise(ErrorKind::kInvalidArg, "no deform field for the none variant");
  if (predictor.kernel.out_ch != predictor_channels(variant, k))
    raise(ErrorKind::kInvalidArg, "predictor channel count mismatch");

  const TensorT<T> raw = conv2d(x, predictor);
  const int h = raw.height(), w = raw.width();
  const int n_off = 2 * k * k, n_mod = k * k;
  const int mod_base = predictor.kernel.out_ch - n_mod;

  DeformFieldT<T> field{TensorT<T>(h, w, n_off), TensorT<T>(h, w, n_mod)};
  std::vector<double> offs;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const T* r = raw.cell(y, xx);
      switch (variant) {
        case DcnVariant::kFree: {
          T* o = field.offsets.cell(y, xx);
          for (int i = 0; i < n_off; ++i) o[i] = r[i];
          break;
        }
        case DcnVariant::kSimilarity: {
          const double scale = geom::activate_scale(r[0]);
          const double angle = geom::activate_angle(r[1], r[2]).theta;
          offs = geom::offsets_from_transform(geom::Similarity{scale, angle}, k);
          break;
        }
        case DcnVariant::kAffine: {
          const double scale = geom::activate_scale(r[0]);
          const double angle = geom::activate_angle(r[1], r[2]).theta;
          offs = geom::offsets_from_transform(
              geom::Affine{scale, angle, bounded_tanh(r[3]), bounded_tanh(r[4]),
                           bounded_tanh(r[5])},
              k);
          break;
        }
        case DcnVariant::kHomography: {
          geom::Homography hg;
          for (int i = 0; i < 8; ++i) hg.corner_offsets[i] = bounded_tanh(r[i]);
          offs = geom::offsets_from_transform(hg, k);
          break;
        }
        case DcnVariant::kNone:
          break;
      }
      if (variant != DcnVariant::kFree) {
        T* o = field.offsets.cell(y, xx);
        for (int i = 0; i < n_off; ++i) o[i] = static_cast<T>(offs[i]);
      }
      T* m = field.modulation.cell(y, xx);
      for (int i = 0; i < n_mod; ++i)
        m[i] = static_cast<T>(sigmoid(static_cast<double>(r[mod_base + i])));
    }
  }
  return field;
}

template DeformFieldT<float> predict_deform_field<float>(
    const TensorT<float>&, const ConvLayerT<float>&, DcnVariant, int);
template DeformFieldT<double> predict_deform_field<double>(
    const TensorT<double>&, const ConvLayerT<double>&, DcnVariant, int);

}  // namespace asl::dcn
