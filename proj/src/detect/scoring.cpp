#include "detect/scoring.hpp"

#include <cmath>

namespace asl::detect {

Scoring parse_scoring(const std::string& name) {
  if (name == "peakiness") return Scoring::kPeakiness;
  if (name == "d2net-ratio") return Scoring::kD2NetRatio;
  raise(ErrorKind::kInvalidArg, "unknown scoring: " + name);
}

Fusion parse_fusion(const std::string& name) {
  if (name == "multilevel") return Fusion::kMultiLevel;
  if (name == "pyramid") return Fusion::kPyramid;
  if (name == "in-network") return Fusion::kInNetwork;
  if (name == "single") return Fusion::kSingle;
  raise(ErrorKind::kInvalidArg, "unknown fusion: " + name);
}

const char* scoring_name(Scoring s) {
  return s == Scoring::kPeakiness ? "peakiness" : "d2net-ratio";
}

const char* fusion_name(Fusion f) {
  switch (f) {
    case Fusion::kMultiLevel: return "multilevel";
    case Fusion::kPyramid: return "pyramid";
    case Fusion::kInNetwork: return "in-network";
    case Fusion::kSingle: return "single";
  }
  return "?";
}

namespace {

template <typename T>
double softplus(T v) {
  const double d = static_cast<double>(v);
  return std::log1p(std::exp(-std::abs(d))) + std::max(d, 0.0);
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct Taps {
  int ys[9];
  int xs[9];
};

template <typename T>
Taps neighborhood(const TensorT<T>& t, int y, int x, int dilation) {
  Taps taps;
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      taps.ys[n] = std::clamp(y + dy * dilation, 0, t.height() - 1);
      taps.xs[n] = std::clamp(x + dx * dilation, 0, t.width() - 1);
      ++n;
    }
  return taps;
}

}  // namespace

template <typename T>
TensorT<T> d2_local_score(const TensorT<T>& y, int dilation) {
  if (dilation < 1) raise(ErrorKind::kInvalidArg, "dilation must be >= 1");
  TensorT<T> out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i) {
    for (int j = 0; j < y.width(); ++j) {
      const Taps taps = neighborhood(y, i, j, dilation);
      for (int c = 0; c < y.channels(); ++c) {
        double mx = y.at(i, j, c);
        for (int n = 0; n < 9; ++n)
          mx = std::max(mx, static_cast<double>(y.at(taps.ys[n], taps.xs[n], c)));
        double denom = 0.0;
        for (int n = 0; n < 9; ++n)
          denom += std::exp(static_cast<double>(y.at(taps.ys[n], taps.xs[n], c)) - mx);
        out.at(i, j, c) =
            static_cast<T>(std::exp(static_cast<double>(y.at(i, j, c)) - mx) / denom);
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> d2_channel_score(const TensorT<T>& y) {
  TensorT<T> out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i) {
    for (int j = 0; j < y.width(); ++j) {
      const T* src = y.cell(i, j);
      T* dst = out.cell(i, j);
      T mx = src[0];
      for (int c = 1; c < y.channels(); ++c) mx = std::max(mx, src[c]);
      if (!(mx > T(0))) {
        for (int c = 0; c < y.channels(); ++c) dst[c] = T(0);
      } else {
        for (int c = 0; c < y.channels(); ++c) dst[c] = src[c] / mx;
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> peakiness_beta(const TensorT<T>& y) {
  TensorT<T> out(y.height(), y.width(), y.channels());
  const int C = y.channels();
  for (int i = 0; i < y.height(); ++i) {
    for (int j = 0; j < y.width(); ++j) {
      const T* src = y.cell(i, j);
      T* dst = out.cell(i, j);
      double mean = 0.0;
      for (int c = 0; c < C; ++c) mean += src[c];
      mean /= C;
      for (int c = 0; c < C; ++c)
        dst[c] = static_cast<T>(softplus(src[c] - static_cast<T>(mean)));
    }
  }
  return out;
}

template <typename T>
TensorT<T> peakiness_alpha(const TensorT<T>& y, int dilation) {
  if (dilation < 1) raise(ErrorKind::kInvalidArg, "dilation must be >= 1");
  TensorT<T> out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i) {
    for (int j = 0; j < y.width(); ++j) {
      const Taps taps = neighborhood(y, i, j, dilation);
      for (int c = 0; c < y.channels(); ++c) {
        double mean = 0.0;
        for (int n = 0; n < 9; ++n) mean += y.at(taps.ys[n], taps.xs[n], c);
        mean /= 9.0;
        out.at(i, j, c) = static_cast<T>(
            softplus(static_cast<double>(y.at(i, j, c)) - mean));
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> peakiness_beta_vjp(const TensorT<T>& y, const TensorT<T>& upstream) {
  TensorT<T> grad(y.height(), y.width(), y.channels());
  const int C = y.channels();
  for (int i = 0; i < y.height(); ++i) {
    for (int j = 0; j < y.width(); ++j) {
      const T* src = y.cell(i, j);
      const T* up = upstream.cell(i, j);
      T* g = grad.cell(i, j);
      double mean = 0.0;
      for (int c = 0; c < C; ++c) mean += src[c];
      mean /= C;
      double pulled = 0.0;  // sum_c up_c * sigmoid(z_c), feeds the -1/C term
      for (int c = 0; c < C; ++c) {
        const double s = sigmoid(src[c] - mean) * up[c];
        g[c] += static_cast<T>(s);
        pulled += s;
      }
      for (int c = 0; c < C; ++c) g[c] -= static_cast<T>(pulled / C);
    }
  }
  return grad;
}

template <typename T>
TensorT<T> peakiness_alpha_vjp(const TensorT<T>& y, int dilation,
                               const TensorT<T>& upstream) {
  TensorT<T> grad(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i) {
    for (int j = 0; j < y.width(); ++j) {
      const Taps taps = neighborhood(y, i, j, dilation);
      for (int c = 0; c < y.channels(); ++c) {
        double mean = 0.0;
        for (int n = 0; n < 9; ++n) mean += y.at(taps.ys[n], taps.xs[n], c);
        mean /= 9.0;
        const double s =
            sigmoid(static_cast<double>(y.at(i, j, c)) - mean) *
            static_cast<double>(upstream.at(i, j, c));
        grad.at(i, j, c) += static_cast<T>(s);
        for (int n = 0; n < 9; ++n)
          grad.at(taps.ys[n], taps.xs[n], c) -= static_cast<T>(s / 9.0);
      }
    }
  }
  return grad;
}

template <typename T>
TensorT<T> combine_scores(const TensorT<T>& alpha, const TensorT<T>& beta) {
  if (alpha.height() != beta.height() || alpha.width() != beta.width() ||
      alpha.channels() != beta.channels())
    raise(ErrorKind::kInvalidArg, "score shape mismatch");
  TensorT<T> out(alpha.height(), alpha.width(), 1);
  for (int i = 0; i < alpha.height(); ++i) {
    for (int j = 0; j < alpha.width(); ++j) {
      const T* a = alpha.cell(i, j);
      const T* b = beta.cell(i, j);
      T best = a[0] * b[0];
      for (int c = 1; c < alpha.channels(); ++c)
        best = std::max(best, a[c] * b[c]);
      out.at(i, j, 0) = best;
    }
  }
  return out;
}

template <typename T>
TensorT<T> score_features(const TensorT<T>& y, Scoring scoring, int dilation) {
  if (scoring == Scoring::kPeakiness)
    return combine_scores(peakiness_alpha(y, dilation), peakiness_beta(y));
  return combine_scores(d2_local_score(y, dilation), d2_channel_score(y));
}

template TensorT<float> d2_local_score<float>(const TensorT<float>&, int);
template TensorT<double> d2_local_score<double>(const TensorT<double>&, int);
template TensorT<float> d2_channel_score<float>(const TensorT<float>&);
template TensorT<double> d2_channel_score<double>(const TensorT<double>&);
template TensorT<float> peakiness_beta<float>(const TensorT<float>&);
template TensorT<double> peakiness_beta<double>(const TensorT<double>&);
template TensorT<float> peakiness_alpha<float>(const TensorT<float>&, int);
template TensorT<double> peakiness_alpha<double>(const TensorT<double>&, int);
template TensorT<float> peakiness_beta_vjp<float>(const TensorT<float>&,
                                                  const TensorT<float>&);
template TensorT<double> peakiness_beta_vjp<double>(const TensorT<double>&,
                                                    const TensorT<double>&);
template TensorT<float> peakiness_alpha_vjp<float>(const TensorT<float>&, int,
                                                   const TensorT<float>&);
template TensorT<double> peakiness_alpha_vjp<double>(const TensorT<double>&,
                                                     int, const TensorT<double>&);
template TensorT<float> combine_scores<float>(const TensorT<float>&,
                                              const TensorT<float>&);
template TensorT<double> combine_scores<double>(const TensorT<double>&,
                                                const TensorT<double>&);
template TensorT<float> score_features<float>(const TensorT<float>&, Scoring, int);
template TensorT<double> score_features<double>(const TensorT<double>&, Scoring,
                                                int);

Tensor muldet_fuse(const std::vector<Tensor>& maps,
                   const std::vector<float>& weights) {
  if (maps.empty() || maps.size() != weights.size())
    raise(ErrorKind::kInvalidArg, "fusion level/weight count mismatch");
  float wsum = 0.0f;
  for (float w : weights) {
    if (w <= 0.0f) raise(ErrorKind::kInvalidArg, "fusion weights must be positive");
    wsum += w;
  }
  const int h = maps[0].height(), w = maps[0].width();
  for (const Tensor& m : maps)
    if (m.height() != h || m.width() != w || m.channels() != 1)
      raise(ErrorKind::kInvalidArg, "fused maps must share the input shape");
  Tensor out(h, w, 1);
  for (size_t l = 0; l < maps.size(); ++l) {
    const float scale = weights[l] / wsum;
    for (size_t i = 0; i < out.size(); ++i)
      out.data()[i] += scale * maps[l].data()[i];
  }
  return out;
}

Tensor innetwork_multiscale(const Tensor& conv8_features, Scoring scoring,
                            int n_scales, double range) {
  if (n_scales < 1) raise(ErrorKind::kInvalidArg, "need at least one scale");
  const int h = conv8_features.height(), w = conv8_features.width();
  std::vector<Tensor> score_maps;
  score_maps.reserve(n_scales);
  for (int i = 0; i < n_scales; ++i) {
    const double t = n_scales == 1
                         ? 0.0
                         : -1.0 + 2.0 * static_cast<double>(i) / (n_scales - 1);
    const double scale = std::pow(range, t);
    const int sh = std::max(1, static_cast<int>(std::lround(h * scale)));
    const int sw = std::max(1, static_cast<int>(std::lround(w * scale)));
    Tensor feats = (sh == h && sw == w) ? conv8_features
                                        : resize_bilinear(conv8_features, sh, sw);
    Tensor s = score_features(feats, scoring, 1);
    score_maps.push_back((sh == h && sw == w) ? std::move(s)
                                              : resize_bilinear(s, h, w));
  }

  Tensor out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mx = score_maps[0].at(y, x, 0);
      for (const Tensor& m : score_maps)
        mx = std::max(mx, static_cast<double>(m.at(y, x, 0)));
      double denom = 0.0, acc = 0.0;
      for (const Tensor& m : score_maps) {
        const double e = std::exp(static_cast<double>(m.at(y, x, 0)) - mx);
        denom += e;
        acc += e * m.at(y, x, 0);
      }
      out.at(y, x, 0) = static_cast<float>(acc / denom);
    }
  }
  return out;
}

namespace {

// Upsample a level score map by its stride and trim to the input size.
Tensor to_input_resolution(const Tensor& level_scores, int stride, int out_h,
                           int out_w) {
  if (stride == 1 && level_scores.height() == out_h &&
      level_scores.width() == out_w)
    return level_scores;
  Tensor up = upsample_bilinear(level_scores, stride);
  return crop(up, out_h, out_w);
}

}  // namespace

Tensor build_score_map(const net::FeatureHierarchy& h, const ScoreMapConfig& cfg,
                       int out_h, int out_w, std::vector<Tensor>* per_level) {
  if (cfg.fusion == Fusion::kSingle || cfg.fusion == Fusion::kInNetwork) {
    const net::FeatureLevel& top = h.levels.back();
    const int dil = cfg.level_dilations.back();
    Tensor s = cfg.fusion == Fusion::kInNetwork
                   ? innetwork_multiscale(top.features, cfg.scoring)
                   : score_features(top.features, cfg.scoring, dil);
    Tensor full = to_input_resolution(s, top.stride, out_h, out_w);
    if (per_level) *per_level = {full};
    return full;
  }
  // kMultiLevel (kPyramid scores each pyramid image the same way).
  if (h.levels.size() != cfg.level_weights.size() ||
      h.levels.size() != cfg.level_dilations.size())
    raise(ErrorKind::kInvalidArg, "level/weight/dilation count mismatch");
  std::vector<Tensor> upsampled;
  upsampled.reserve(h.levels.size());
  for (size_t l = 0; l < h.levels.size(); ++l) {
    Tensor s =
        score_features(h.levels[l].features, cfg.scoring, cfg.level_dilations[l]);
    upsampled.push_back(
        to_input_resolution(s, h.levels[l].stride, out_h, out_w));
  }
  Tensor fused = muldet_fuse(upsampled, cfg.level_weights);
  if (per_level) *per_level = std::move(upsampled);
  return fused;
}

int dominant_level(const std::vector<Tensor>& upsampled,
                   const std::vector<float>& weights, int y, int x) {
  int best = 0;
  double best_v = -1.0;
  for (size_t l = 0; l < upsampled.size(); ++l) {
    const double v = weights[l] * upsampled[l].at(y, x, 0);
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(l);
    }
  }
  return best;
}

}  // namespace asl::detect
