#ifndef ASL_DETECT_SCORING_HPP
#define ASL_DETECT_SCORING_HPP

#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "net/backbone.hpp"

namespace asl::detect {

enum class Scoring { kPeakiness, kD2NetRatio };
enum class Fusion { kMultiLevel, kPyramid, kInNetwork, kSingle };

Scoring parse_scoring(const std::string& name);
Fusion parse_fusion(const std::string& name);
const char* scoring_name(Scoring s);
const char* fusion_name(Fusion f);

// Ratio-to-neighborhood softmax: alpha = exp(y) / sum_{N(i,j)} exp(y'),
// per channel, max-subtracted. The neighborhood is the 3x3 grid spaced by
// `dilation`, taps clamped at the borders.
template <typename T>
TensorT<T> d2_local_score(const TensorT<T>& y, int dilation);

// Ratio-to-max across channels: beta_c = y_c / max_t y_t. Positions whose
// channel max is not positive are zeroed (flagged degenerate).
template <typename T>
TensorT<T> d2_channel_score(const TensorT<T>& y);

// Peakiness: softplus of the excess over the channel mean (beta) and over
// the dilated 3x3 spatial neighborhood mean (alpha).
template <typename T>
TensorT<T> peakiness_beta(const TensorT<T>& y);
template <typename T>
TensorT<T> peakiness_alpha(const TensorT<T>& y, int dilation);

// Adjoints for the gradient suite: accumulate d(sum(upstream * out))/dy.
template <typename T>
TensorT<T> peakiness_beta_vjp(const TensorT<T>& y, const TensorT<T>& upstream);
template <typename T>
TensorT<T> peakiness_alpha_vjp(const TensorT<T>& y, int dilation,
                               const TensorT<T>& upstream);

// s = max_c(alpha_c * beta_c), one channel out.
template <typename T>
TensorT<T> combine_scores(const TensorT<T>& alpha, const TensorT<T>& beta);

// Full per-level scoring for the chosen measurement.
template <typename T>
TensorT<T> score_features(const TensorT<T>& y, Scoring scoring, int dilation);

// Weighted sum of same-size score maps, normalized by the weight total.
Tensor muldet_fuse(const std::vector<Tensor>& maps,
                   const std::vector<float>& weights);

// LF-Net-style in-network scale space: resize the conv8 features to
// `n_scales` scales log-spaced in [1/range, range], score each, resize the
// score maps back, and merge with per-position softmax weights.
Tensor innetwork_multiscale(const Tensor& conv8_features, Scoring scoring,
                            int n_scales = 5, double range = 1.4142135623730951);

struct ScoreMapConfig {
  Scoring scoring = Scoring::kPeakiness;
  Fusion fusion = Fusion::kMultiLevel;
  std::vector<float> level_weights = {1.0f, 2.0f, 3.0f};
  std::vector<int> level_dilations = {3, 2, 1};
};

// Builds the detection score map at input resolution (out_h x out_w) from a
// feature hierarchy. kPyramid is handled a level up (it re-runs extraction);
// here it scores like kMultiLevel. When per_level is non-null it receives
// the upsampled per-level maps that entered the fusion.
Tensor build_score_map(const net::FeatureHierarchy& h,
                       const ScoreMapConfig& cfg, int out_h, int out_w,
                       std::vector<Tensor>* per_level = nullptr);

// Per-level upsampled weighted score at one position; used to attribute a
// detection to its dominant level.
int dominant_level(const std::vector<Tensor>& upsampled,
                   const std::vector<float>& weights, int y, int x);

}  // namespace asl::detect

#endif
