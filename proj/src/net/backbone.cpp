#include "net/backbone.hpp"

#include <cmath>

namespace asl::net {

std::vector<LayerSpec> layer_table(const BackboneConfig& cfg) {
  const bool dcn = cfg.variant != dcn::DcnVariant::kNone;
  return {
      {"conv1", 3, 1, 32, 1, false, true},
      {"conv2", 3, 32, 32, 1, false, true},
      {"conv3", 3, 32, 64, 2, false, true},
      {"conv4", 3, 64, 64, 1, false, true},
      {"conv5", 3, 64, 128, 2, false, true},
      {"conv6", 3, 128, 128, 1, dcn, true},
      {"conv7", 3, 128, 128, 1, dcn, true},
      {"conv8", 3, 128, 128, 1, dcn, false},  // raw tap: detection + description
  };
}

std::vector<WeightSpec> weight_specs(const BackboneConfig& cfg) {
  std::vector<WeightSpec> specs;
  for (const LayerSpec& l : layer_table(cfg)) {
    const auto k = static_cast<uint32_t>(l.kernel);
    specs.push_back({l.name + "/kernel",
                     {k, k, static_cast<uint32_t>(l.in_ch),
                      static_cast<uint32_t>(l.out_ch)},
                     WeightInit::kHeNormal});
    specs.push_back({l.name + "/bias",
                     {static_cast<uint32_t>(l.out_ch)},
                     WeightInit::kZeros});
    if (l.norm_relu) {
      specs.push_back({l.name + "/norm_mean",
                       {static_cast<uint32_t>(l.out_ch)},
                       WeightInit::kZeros});
      specs.push_back({l.name + "/norm_var",
                       {static_cast<uint32_t>(l.out_ch)},
                       WeightInit::kOnes});
    }
    if (l.dcn) {
      // Zero-initialized predictor: offsets start at 0, modulation at 0.5.
      const auto pc = static_cast<uint32_t>(
          dcn::predictor_channels(cfg.variant, l.kernel));
      specs.push_back({l.name + "/offset_kernel",
                       {k, k, static_cast<uint32_t>(l.in_ch), pc},
                       WeightInit::kZeros});
      specs.push_back({l.name + "/offset_bias", {pc}, WeightInit::kZeros});
    }
  }
  return specs;
}

size_t parameter_count(const BackboneConfig& cfg) {
  size_t n = 0;
  for (const WeightSpec& s : weight_specs(cfg)) {
    size_t c = 1;
    for (uint32_t d : s.dims) c *= d;
    n += c;
  }
  return n;
}

namespace {

dcn::KernelT<float> kernel_from_entry(const WeightEntry& e) {
  if (e.dims.size() != 4)
    raise(ErrorKind::kFormat, "kernel entry must be rank 4: " + e.name);
  dcn::KernelT<float> kr;
  kr.k = static_cast<int>(e.dims[0]);
  kr.in_ch = static_cast<int>(e.dims[2]);
  kr.out_ch = static_cast<int>(e.dims[3]);
  kr.w = e.values;
  return kr;
}

}  // namespace

Backbone::Backbone(const BackboneConfig& cfg, const WeightStore& store)
    : cfg_(cfg) {
  validate_against(store, weight_specs(cfg));
  for (const LayerSpec& spec : layer_table(cfg)) {
    BoundLayer bl;
    bl.spec = spec;
    bl.conv.kernel = kernel_from_entry(store.get(spec.name + "/kernel"));
    bl.conv.bias = store.get(spec.name + "/bias").values;
    bl.conv.stride = spec.stride;
    bl.conv.norm_relu = spec.norm_relu;
    if (spec.norm_relu) {
      bl.conv.norm_mean = store.get(spec.name + "/norm_mean").values;
      bl.conv.norm_var = store.get(spec.name + "/norm_var").values;
    }
    if (spec.dcn) {
      bl.predictor.kernel =
          kernel_from_entry(store.get(spec.name + "/offset_kernel"));
      bl.predictor.bias = store.get(spec.name + "/offset_bias").values;
      bl.predictor.stride = spec.stride;
      bl.predictor.norm_relu = false;
    }
    layers_.push_back(std::move(bl));
  }
}

FeatureHierarchy Backbone::forward(const Tensor& input) const {
  if (input.channels() != 1)
    raise(ErrorKind::kInvalidArg, "backbone expects a 1-channel input");

  FeatureHierarchy h;
  Tensor x = input;
  int stride = 1;
  for (const BoundLayer& bl : layers_) {
    Tensor y;
    if (bl.spec.dcn) {
      const dcn::DeformField field = dcn::predict_deform_field(
          x, bl.predictor, cfg_.variant, bl.spec.kernel);
      y = dcn::deform_conv2d(x, bl.conv, field);
    } else {
      y = dcn::conv2d(x, bl.conv);
    }
    stride *= bl.spec.stride;
    x = std::move(y);
    if (bl.spec.name == "conv1" || bl.spec.name == "conv3" ||
        bl.spec.name == "conv8") {
      if (!x.all_finite())
        raise(ErrorKind::kNumeric, "non-finite features at " + bl.spec.name);
      h.levels.push_back({bl.spec.name, x, stride});
    }
  }
  return h;
}

Tensor dense_descriptors(const FeatureHierarchy& h, bool* had_degenerate) {
  const Tensor& f = h.conv8();
  Tensor out(f.height(), f.width(), f.channels());
  bool degenerate = false;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      const float* src = f.cell(y, x);
      float* dst = out.cell(y, x);
      double norm2 = 0.0;
      for (int c = 0; c < f.channels(); ++c)
        norm2 += static_cast<double>(src[c]) * src[c];
      if (norm2 < 1e-24) {
        degenerate = true;
        for (int c = 0; c < f.channels(); ++c) dst[c] = 0.0f;
      } else {
        const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (int c = 0; c < f.channels(); ++c) dst[c] = src[c] * inv;
      }
    }
  }
  if (had_degenerate) *had_degenerate = degenerate;
  return out;
}

std::vector<float> sample_descriptor(const FeatureHierarchy& h, double x,
                                     double y, bool* degenerate) {
  const Tensor& f = h.conv8();
  const int s = h.levels.back().stride;
  const double off = (s - 1) * 0.5;
  const double u = (x - off) / s;
  const double v = (y - off) / s;

  std::vector<float> desc(f.channels());
  double norm2 = 0.0;
  for (int c = 0; c < f.channels(); ++c) {
    const double val = bilinear_sample(f, u, v, c);
    desc[c] = static_cast<float>(val);
    norm2 += val * val;
  }
  if (degenerate) *degenerate = norm2 < 1e-24;
  if (norm2 >= 1e-24) {
    const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
    for (float& d : desc) d *= inv;
  }
  return desc;
}

}  // namespace asl::net
