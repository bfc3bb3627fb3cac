#ifndef ASL_DETECT_KEYPOINTS_HPP
#define ASL_DETECT_KEYPOINTS_HPP

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"
#include "detect/scoring.hpp"

namespace asl::detect {

struct Keypoint {
  float x = 0.0f, y = 0.0f;  // sub-pixel image coordinates
  float score = 0.0f;
  int level_hint = -1;          // dominant detection level, -1 if unattributed
  float pyramid_scale = 1.0f;   // image scale the detection came from
};

struct DetectorConfig {
  Scoring scoring = Scoring::kPeakiness;
  Fusion fusion = Fusion::kMultiLevel;
  std::vector<float> level_weights = {1.0f, 2.0f, 3.0f};
  std::vector<int> level_dilations = {3, 2, 1};
  int nms_size = 3;
  float edge_threshold = 10.0f;
  float score_min = 0.5f;
  int top_k = 5000;
  int border = 8;  // detections this close to the image edge are discarded

  ScoreMapConfig score_map() const {
    return {scoring, fusion, level_weights, level_dilations};
  }
};

// Strict local maxima of the (H, W, 1) map over the size x size window.
// Score ties break toward the lexicographically smallest (y, x), so exactly
// one element of an equal-scored plateau window survives.
std::vector<uint8_t> nms_mask(const Tensor& s, int size);

// SIFT-style edge test on the 3x3 neighborhood: central-difference Hessian,
// reject if det <= 0 or tr^2/det >= (r+1)^2/r.
bool edge_keep(const Tensor& s, int x, int y, float r);

struct Refined {
  double dx = 0.0, dy = 0.0;
  double score = 0.0;
};

// Second-order fit on the 3x3 patch: offset = -H^-1 g, each component
// clamped to [-0.5, 0.5]; score is the fitted value at the (clamped) offset.
// A singular Hessian yields zero offset and the original score.
Refined subpixel_refine(const Tensor& s, int x, int y);

// NMS -> border exclusion -> edge elimination -> sub-pixel refinement ->
// score threshold -> sort (score desc, ties by (y, x)) -> top-K.
std::vector<Keypoint> select_keypoints(const Tensor& score,
                                       const DetectorConfig& cfg);

// Greedy cross-scale suppression in original coordinates: highest score
// first, drop anything within Chebyshev radius of a kept point. Returns the
// surviving indices in score order so parallel arrays can follow.
std::vector<size_t> cross_scale_nms(const std::vector<Keypoint>& kps,
                                    double radius);

}  // namespace asl::detect

#endif
