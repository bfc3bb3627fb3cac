#ifndef ASL_PIPELINE_EXTRACTOR_HPP
#define ASL_PIPELINE_EXTRACTOR_HPP

#include "core/image.hpp"
#include "core/weights.hpp"
#include "detect/feature_io.hpp"
#include "net/backbone.hpp"

namespace asl::pipeline {

struct ExtractorConfig {
  net::BackboneConfig backbone;
  detect::DetectorConfig detector;
};

// End-to-end feature extraction: grayscale + standardize, backbone forward,
// score-map fusion, keypoint selection, descriptor sampling at the refined
// locations. Pure given (config, weights, image).
class Extractor {
 public:
  Extractor(const ExtractorConfig& cfg, WeightStore weights);

  static Extractor with_seeded_weights(const ExtractorConfig& cfg,
                                       uint64_t seed);

  detect::FeatureSet extract(const Image& img) const;

  // 1-channel pixels in [0, 1]; shared by the image path and synthetic tests.
  detect::FeatureSet extract_gray(const Tensor& gray) const;

  const ExtractorConfig& config() const { return cfg_; }
  const WeightStore& weights() const { return weights_; }

 private:
  detect::FeatureSet extract_one_scale(const Tensor& gray,
                                       const detect::DetectorConfig& det) const;
  detect::FeatureSet extract_pyramid(const Tensor& gray) const;

  ExtractorConfig cfg_;
  WeightStore weights_;
  net::Backbone backbone_;
};

}  // namespace asl::pipeline

#endif
