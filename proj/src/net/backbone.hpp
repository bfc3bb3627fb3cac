#ifndef ASL_NET_BACKBONE_HPP
#define ASL_NET_BACKBONE_HPP

#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "core/weights.hpp"
#include "dcn/conv.hpp"

namespace asl::net {

// L2-Net-style trunk with the final 8x8 stage replaced by three 3x3 layers;
// conv6..conv8 run as deformable convolutions unless the variant is kNone.
// Taps for detection come from conv1 (stride 1), conv3 (stride 2) and
// conv8 (stride 4, 128-d raw features used for description).
struct LayerSpec {
  std::string name;
  int kernel = 3;
  int in_ch = 0, out_ch = 0;
  int stride = 1;
  bool dcn = false;
  bool norm_relu = true;
};

struct BackboneConfig {
  dcn::DcnVariant variant = dcn::DcnVariant::kFree;
};

constexpr int kDescriptorDim = 128;
constexpr int kDescriptorStride = 4;

std::vector<LayerSpec> layer_table(const BackboneConfig& cfg);
std::vector<WeightSpec> weight_specs(const BackboneConfig& cfg);
size_t parameter_count(const BackboneConfig& cfg);

struct FeatureLevel {
  std::string name;
  Tensor features;
  int stride = 1;
};

struct FeatureHierarchy {
  std::vector<FeatureLevel> levels;  // conv1, conv3, conv8 in order

  const Tensor& conv8() const { return levels.back().features; }
};

class Backbone {
 public:
  // Validates the store against the layer table (kFormat on mismatch).
  Backbone(const BackboneConfig& cfg, const WeightStore& store);

  // Input: standardized 1-channel tensor. Deterministic; raises kNumeric if
  // any tap comes out non-finite.
  FeatureHierarchy forward(const Tensor& input) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  struct BoundLayer {
    LayerSpec spec;
    dcn::ConvLayer conv;
    dcn::ConvLayer predictor;  // only for dcn layers with a variant
  };
  BackboneConfig cfg_;
  std::vector<BoundLayer> layers_;
};

// Channel-wise L2 normalization of the conv8 map. All-zero positions stay
// zero; *had_degenerate reports whether any did.
Tensor dense_descriptors(const FeatureHierarchy& h,
                         bool* had_degenerate = nullptr);

// Bilinear interpolation of the raw conv8 features at an image-space point
// (stride-center convention), L2-normalized afterwards.
std::vector<float> sample_descriptor(const FeatureHierarchy& h, double x,
                                     double y, bool* degenerate = nullptr);

}  // namespace asl::net

#endif
