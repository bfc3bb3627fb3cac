#ifndef ASL_DETECT_FEATURE_IO_HPP
#define ASL_DETECT_FEATURE_IO_HPP

#include <string>
#include <vector>

#include "detect/keypoints.hpp"

namespace asl::detect {

// Keypoints with row-major unit-norm descriptors (count x desc_dim).
struct FeatureSet {
  int image_width = 0, image_height = 0;  // 0 when loaded from file
  int desc_dim = 128;
  std::vector<Keypoint> keypoints;
  std::vector<float> descriptors;

  size_t count() const { return keypoints.size(); }
  const float* desc(size_t i) const { return descriptors.data() + i * desc_dim; }
  float* desc(size_t i) { return descriptors.data() + i * desc_dim; }
};

// Text: header "ASLF1 <count> <desc_dim>", then one line per keypoint with
// "x y score pyramid_scale" followed by desc_dim floats. Binary twin: magic
// "ASLB", u32 count, u32 desc_dim, then per record f32
// x, y, score, pyramid_scale and the descriptor, all little-endian.
void save_features_text(const FeatureSet& fs, const std::string& path);
void save_features_binary(const FeatureSet& fs, const std::string& path);

// Sniffs the magic and dispatches to the right reader.
FeatureSet load_features(const std::string& path);

}  // namespace asl::detect

#endif
