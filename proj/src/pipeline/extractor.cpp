#include "pipeline/extractor.hpp"

#include <cmath>

#include "detect/pyramid.hpp"

namespace asl::pipeline {

Extractor::Extractor(const ExtractorConfig& cfg, WeightStore weights)
    : cfg_(cfg), weights_(std::move(weights)), backbone_(cfg.backbone, weights_) {}

Extractor Extractor::with_seeded_weights(const ExtractorConfig& cfg,
                                         uint64_t seed) {
  return Extractor(cfg, seeded_random_weights(seed, net::weight_specs(cfg.backbone)));
}

detect::FeatureSet Extractor::extract(const Image& img) const {
  const Image gray = to_grayscale(img);
  return extract_gray(gray.pixels);
}

detect::FeatureSet Extractor::extract_gray(const Tensor& gray) const {
  if (gray.channels() != 1)
    raise(ErrorKind::kInvalidArg, "extract_gray expects one channel");
  if (cfg_.detector.fusion == detect::Fusion::kPyramid)
    return extract_pyramid(gray);
  return extract_one_scale(gray, cfg_.detector);
}

detect::FeatureSet Extractor::extract_one_scale(
    const Tensor& gray, const detect::DetectorConfig& det) const {
  const Tensor standardized = standardize(Image{gray, ""});
  const net::FeatureHierarchy h = backbone_.forward(standardized);

  std::vector<Tensor> per_level;
  const Tensor score = detect::build_score_map(h, det.score_map(),
                                               gray.height(), gray.width(),
                                               &per_level);
  std::vector<detect::Keypoint> kps = detect::select_keypoints(score, det);

  detect::FeatureSet fs;
  fs.image_width = gray.width();
  fs.image_height = gray.height();
  fs.desc_dim = net::kDescriptorDim;
  fs.keypoints.reserve(kps.size());
  fs.descriptors.reserve(kps.size() * net::kDescriptorDim);
  for (detect::Keypoint& kp : kps) {
    kp.level_hint = detect::dominant_level(
        per_level, det.level_weights, static_cast<int>(std::lround(kp.y)),
        static_cast<int>(std::lround(kp.x)));
    const std::vector<float> d = net::sample_descriptor(h, kp.x, kp.y);
    fs.keypoints.push_back(kp);
    fs.descriptors.insert(fs.descriptors.end(), d.begin(), d.end());
  }
  return fs;
}

detect::FeatureSet Extractor::extract_pyramid(const Tensor& gray) const {
  const detect::PyramidPlan plan =
      detect::plan_pyramid(gray.width(), gray.height());

  // Per-scale selection keeps everything above the score threshold; the
  // global top-K happens after the cross-scale merge.
  detect::DetectorConfig level_cfg = cfg_.detector;
  level_cfg.fusion = detect::Fusion::kMultiLevel;
  level_cfg.top_k = -1;

  detect::FeatureSet merged;
  merged.image_width = gray.width();
  merged.image_height = gray.height();
  merged.desc_dim = net::kDescriptorDim;

  Tensor current = gray;
  if (plan.levels[0].width != gray.width() ||
      plan.levels[0].height != gray.height())
    current = resize_bilinear(gray, plan.levels[0].height, plan.levels[0].width);

  for (size_t li = 0; li < plan.levels.size(); ++li) {
    const detect::PyramidLevel& level = plan.levels[li];
    if (li > 0) {
      const Tensor blurred = detect::gaussian_blur(current, 0.8);
      current = resize_bilinear(blurred, level.height, level.width);
    }
    detect::FeatureSet fs = extract_one_scale(current, level_cfg);
    const double inv_scale = 1.0 / level.scale;
    for (size_t i = 0; i < fs.count(); ++i) {
      detect::Keypoint kp = fs.keypoints[i];
      kp.x = static_cast<float>(kp.x * inv_scale);
      kp.y = static_cast<float>(kp.y * inv_scale);
      kp.pyramid_scale = static_cast<float>(level.scale);
      merged.keypoints.push_back(kp);
      merged.descriptors.insert(merged.descriptors.end(), fs.desc(i),
                                fs.desc(i) + fs.desc_dim);
    }
  }

  const double radius = (cfg_.detector.nms_size - 1) / 2.0;
  const std::vector<size_t> kept =
      detect::cross_scale_nms(merged.keypoints, radius);

  detect::FeatureSet out;
  out.image_width = merged.image_width;
  out.image_height = merged.image_height;
  out.desc_dim = merged.desc_dim;
  const size_t limit =
      cfg_.detector.top_k >= 0
          ? std::min(kept.size(), static_cast<size_t>(cfg_.detector.top_k))
          : kept.size();
  for (size_t i = 0; i < limit; ++i) {
    out.keypoints.push_back(merged.keypoints[kept[i]]);
    out.descriptors.insert(out.descriptors.end(), merged.desc(kept[i]),
                           merged.desc(kept[i]) + merged.desc_dim);
  }
  return out;
}

}  // namespace asl::pipeline
