#include "asl/asl.h"

#include <cstring>
#include <string>

#include "eval/harness.hpp"
#include "pipeline/extractor.hpp"
#include "selftest/selftest.hpp"

namespace {

thread_local std::string g_last_error;

asl_status status_of(const asl::Error& e) {
  g_last_error = e.what();
  switch (e.kind()) {
    case asl::ErrorKind::kInvalidArg: return ASL_ERR_INVALID_ARG;
    case asl::ErrorKind::kIo: return ASL_ERR_IO;
    case asl::ErrorKind::kFormat: return ASL_ERR_FORMAT;
    case asl::ErrorKind::kNumeric: return ASL_ERR_NUMERIC;
  }
  return ASL_ERR_INTERNAL;
}

template <typename Fn>
asl_status guarded(Fn&& fn) {
  try {
    fn();
    return ASL_OK;
  } catch (const asl::Error& e) {
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ASL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return ASL_ERR_INTERNAL;
  }
}

asl::pipeline::ExtractorConfig config_from(const asl_extract_options* opt) {
  asl::pipeline::ExtractorConfig cfg;
  if (!opt) return cfg;
  if (opt->dcn) cfg.backbone.variant = asl::dcn::parse_dcn_variant(opt->dcn);
  if (opt->scoring) cfg.detector.scoring = asl::detect::parse_scoring(opt->scoring);
  if (opt->fusion) cfg.detector.fusion = asl::detect::parse_fusion(opt->fusion);
  cfg.detector.top_k = opt->top_k;
  cfg.detector.score_min = static_cast<float>(opt->score_min);
  cfg.detector.nms_size = opt->nms_size;
  cfg.detector.edge_threshold = static_cast<float>(opt->edge_threshold);
  cfg.detector.border = opt->border;
  return cfg;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

asl::eval::HPatchesOptions hpatches_options(const asl_eval_options* opt) {
  asl::eval::HPatchesOptions h;
  if (!opt) return h;
  h.match.ratio = static_cast<float>(opt->match.ratio);
  h.match.mutual = opt->match.mutual != 0;
  h.threshold = opt->threshold;
  h.threads = opt->threads;
  return h;
}

asl::eval::EpipolarOptions epipolar_options(const asl_eval_options* opt) {
  asl::eval::EpipolarOptions e;
  if (!opt) return e;
  e.match.ratio = static_cast<float>(opt->match.ratio);
  e.match.mutual = opt->match.mutual != 0;
  e.ransac_iterations = opt->ransac_iterations;
  e.ransac_threshold = opt->ransac_threshold;
  e.ransac_seed = opt->ransac_seed;
  e.virtual_correspondences = opt->virtual_correspondences;
  e.recall_threshold = opt->recall_threshold;
  e.threads = opt->threads;
  return e;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) asl::raise(asl::ErrorKind::kIo, "cannot write report: " + path);
  std::fwrite(content.data(), 1, content.size(), f);
  if (std::fclose(f) != 0)
    asl::raise(asl::ErrorKind::kIo, "short write: " + path);
}

std::vector<std::string> filters_from(const char* filter) {
  std::vector<std::string> out;
  if (filter && *filter) out.emplace_back(filter);
  return out;
}

}  // namespace

struct asl_model {
  asl::pipeline::Extractor extractor;
};

struct asl_features {
  asl::detect::FeatureSet set;
};

struct asl_matches {
  asl::match::MatchSet set;
};

extern "C" {

const char* asl_last_error(void) { return g_last_error.c_str(); }

void asl_extract_options_init(asl_extract_options* opt) {
  opt->dcn = "free";
  opt->scoring = "peakiness";
  opt->fusion = "multilevel";
  opt->top_k = 5000;
  opt->score_min = 0.5;
  opt->nms_size = 3;
  opt->edge_threshold = 10.0;
  opt->border = 8;
}

asl_status asl_model_create_seeded(const asl_extract_options* opt,
                                   uint64_t seed, asl_model** out) {
  if (!out) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    const auto cfg = config_from(opt);
    *out = new asl_model{asl::pipeline::Extractor::with_seeded_weights(cfg, seed)};
  });
}

asl_status asl_model_open(const asl_extract_options* opt,
                          const char* weights_path, asl_model** out) {
  if (!out || !weights_path) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    const auto cfg = config_from(opt);
    asl::WeightStore store = asl::read_weights(weights_path);
    *out = new asl_model{asl::pipeline::Extractor(cfg, std::move(store))};
  });
}

asl_status asl_model_save_weights(const asl_model* model, const char* path) {
  if (!model || !path) return ASL_ERR_INVALID_ARG;
  return guarded([&] { asl::write_weights(model->extractor.weights(), path); });
}

void asl_model_destroy(asl_model* model) { delete model; }

asl_status asl_extract_file(const asl_model* model, const char* image_path,
                            asl_features** out) {
  if (!model || !image_path || !out) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    const asl::Image img = asl::load_image(image_path);
    *out = new asl_features{model->extractor.extract(img)};
  });
}

asl_status asl_extract_gray(const asl_model* model, const float* pixels,
                            int width, int height, asl_features** out) {
  if (!model || !pixels || !out) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    asl::Tensor gray(height, width, 1);
    std::memcpy(gray.data(), pixels,
                sizeof(float) * static_cast<size_t>(width) * height);
    *out = new asl_features{model->extractor.extract_gray(gray)};
  });
}

size_t asl_features_count(const asl_features* f) {
  return f ? f->set.count() : 0;
}

int asl_features_desc_dim(const asl_features* f) {
  return f ? f->set.desc_dim : 0;
}

asl_status asl_features_get(const asl_features* f, size_t index, float kp4[4],
                            float* desc) {
  if (!f || index >= f->set.count()) return ASL_ERR_INVALID_ARG;
  const asl::detect::Keypoint& kp = f->set.keypoints[index];
  if (kp4) {
    kp4[0] = kp.x;
    kp4[1] = kp.y;
    kp4[2] = kp.score;
    kp4[3] = kp.pyramid_scale;
  }
  if (desc)
    std::memcpy(desc, f->set.desc(index), sizeof(float) * f->set.desc_dim);
  return ASL_OK;
}

asl_status asl_features_save(const asl_features* f, const char* path,
                             int binary) {
  if (!f || !path) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    if (binary)
      asl::detect::save_features_binary(f->set, path);
    else
      asl::detect::save_features_text(f->set, path);
  });
}

asl_status asl_features_load(const char* path, asl_features** out) {
  if (!path || !out) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    *out = new asl_features{asl::detect::load_features(path)};
  });
}

void asl_features_destroy(asl_features* f) { delete f; }

void asl_match_options_init(asl_match_options* opt) {
  opt->ratio = 0.8;
  opt->mutual = 1;
}

asl_status asl_match_features(const asl_features* a, const asl_features* b,
                              const asl_match_options* opt, asl_matches** out) {
  if (!a || !b || !out) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    asl::match::MatchOptions mo;
    if (opt) {
      mo.ratio = static_cast<float>(opt->ratio);
      mo.mutual = opt->mutual != 0;
    }
    *out = new asl_matches{asl::match::match_descriptors(a->set, b->set, mo)};
  });
}

size_t asl_matches_count(const asl_matches* m) {
  return m ? m->set.matches.size() : 0;
}

void asl_matches_counts(const asl_matches* m, int* candidates, int* after_ratio,
                        int* after_mutual) {
  if (!m) return;
  if (candidates) *candidates = m->set.candidates;
  if (after_ratio) *after_ratio = m->set.after_ratio;
  if (after_mutual) *after_mutual = m->set.after_mutual;
}

asl_status asl_matches_get(const asl_matches* m, size_t index, int* index_a,
                           int* index_b, float* distance) {
  if (!m || index >= m->set.matches.size()) return ASL_ERR_INVALID_ARG;
  const asl::match::Match& match = m->set.matches[index];
  if (index_a) *index_a = match.index_a;
  if (index_b) *index_b = match.index_b;
  if (distance) *distance = match.distance;
  return ASL_OK;
}

void asl_matches_destroy(asl_matches* m) { delete m; }

void asl_eval_options_init(asl_eval_options* opt) {
  asl_match_options_init(&opt->match);
  opt->threshold = 3.0;
  opt->ransac_iterations = 2000;
  opt->ransac_threshold = 1e-4;
  opt->ransac_seed = 0;
  opt->virtual_correspondences = 300;
  opt->recall_threshold = 0.05;
  opt->threads = 1;
}

asl_status asl_eval_hpatches(const asl_model* model, const char* root,
                             const asl_eval_options* opt, const char* out_tsv,
                             char** summary) {
  if (!model || !root) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    const auto report =
        asl::eval::eval_hpatches(model->extractor, root, hpatches_options(opt));
    if (out_tsv) write_text_file(out_tsv, report.tsv());
    if (summary) *summary = dup_string(report.summary());
  });
}

asl_status asl_eval_epipolar(const asl_model* model, const char* pairs_file,
                             const asl_eval_options* opt, const char* out_tsv,
                             char** summary) {
  if (!model || !pairs_file) return ASL_ERR_INVALID_ARG;
  return guarded([&] {
    const auto report = asl::eval::eval_epipolar(model->extractor, pairs_file,
                                                 epipolar_options(opt));
    if (out_tsv) write_text_file(out_tsv, report.tsv());
    if (summary) *summary = dup_string(report.summary());
  });
}

asl_status asl_selftest(const char* filter, int inject_dlt_fault,
                        char** report, int* failures) {
  return guarded([&] {
    asl::selftest::Options opt;
    opt.filters = filters_from(filter);
    opt.inject_dlt_jacobian_fault = inject_dlt_fault != 0;
    const auto results = asl::selftest::run(opt);
    if (report) *report = dup_string(asl::selftest::format_report(results));
    if (failures) *failures = asl::selftest::count_failures(results);
  });
}

asl_status asl_gradcheck(const char* filter, int inject_dlt_fault,
                         char** report, int* failures) {
  return guarded([&] {
    asl::selftest::Options opt;
    opt.filters = {"grad"};
    if (filter && *filter) opt.filters.emplace_back(filter);
    opt.inject_dlt_jacobian_fault = inject_dlt_fault != 0;
    const auto results = asl::selftest::run(opt);
    if (report) *report = dup_string(asl::selftest::format_report(results));
    if (failures) *failures = asl::selftest::count_failures(results);
  });
}

void asl_string_free(char* s) { std::free(s); }

}  // extern "C"
