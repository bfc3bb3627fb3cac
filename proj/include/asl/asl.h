/* asl — local feature extraction, matching and two-view evaluation.
 *
 * C interface to the shared library: opaque handles, integer status codes,
 * UTF-8 paths. Every object returned through an out-parameter is owned by
 * the caller and released with the matching *_destroy/_free call. Handles
 * are immutable after creation and safe to share across threads.
 */
#ifndef ASL_H
#define ASL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum asl_status {
  ASL_OK = 0,
  ASL_ERR_INVALID_ARG = 1, /* bad parameters or configuration */
  ASL_ERR_IO = 2,          /* missing/truncated/unwritable file */
  ASL_ERR_FORMAT = 3,      /* recognizable file with malformed content */
  ASL_ERR_NUMERIC = 4,     /* singular configuration or non-finite values */
  ASL_ERR_INTERNAL = 5
} asl_status;

/* Message for the most recent failure on this thread. */
const char* asl_last_error(void);

typedef struct asl_model asl_model;
typedef struct asl_features asl_features;
typedef struct asl_matches asl_matches;

typedef struct asl_extract_options {
  const char* dcn;     /* "free" | "similarity" | "affine" | "homography" | "none" */
  const char* scoring; /* "peakiness" | "d2net-ratio" */
  const char* fusion;  /* "multilevel" | "pyramid" | "in-network" | "single" */
  int top_k;           /* <0 keeps everything above the threshold */
  double score_min;
  int nms_size;
  double edge_threshold;
  int border;
} asl_extract_options;

/* Fills in the defaults: free-form DCN, peakiness scoring, multilevel fusion,
 * top-k 5000, score threshold 0.5, NMS 3, edge threshold 10, border 8. */
void asl_extract_options_init(asl_extract_options* opt);

/* Deterministic random weights (documented generator, fan-in scaled). */
asl_status asl_model_create_seeded(const asl_extract_options* opt,
                                   uint64_t seed, asl_model** out);
/* Weights from an ASLW file, validated against the architecture table. */
asl_status asl_model_open(const asl_extract_options* opt,
                          const char* weights_path, asl_model** out);
asl_status asl_model_save_weights(const asl_model* model, const char* path);
void asl_model_destroy(asl_model* model);

/* Feature extraction from a PGM/PPM file or a row-major grayscale buffer
 * with values in [0, 1]. */
asl_status asl_extract_file(const asl_model* model, const char* image_path,
                            asl_features** out);
asl_status asl_extract_gray(const asl_model* model, const float* pixels,
                            int width, int height, asl_features** out);

size_t asl_features_count(const asl_features* f);
int asl_features_desc_dim(const asl_features* f);
/* kp4 receives {x, y, score, pyramid_scale}; desc (when non-NULL) must hold
 * desc_dim floats. */
asl_status asl_features_get(const asl_features* f, size_t index, float kp4[4],
                            float* desc);
/* binary != 0 writes the ASLB container, otherwise ASLF1 text. */
asl_status asl_features_save(const asl_features* f, const char* path,
                             int binary);
asl_status asl_features_load(const char* path, asl_features** out);
void asl_features_destroy(asl_features* f);

typedef struct asl_match_options {
  double ratio;  /* nearest/second-nearest bound, in (0, 1] */
  int mutual;    /* nonzero enables the cross-check */
} asl_match_options;
void asl_match_options_init(asl_match_options* opt);

asl_status asl_match_features(const asl_features* a, const asl_features* b,
                              const asl_match_options* opt, asl_matches** out);
size_t asl_matches_count(const asl_matches* m);
/* Per-stage candidate counts: raw NN, after the ratio test, after the
 * mutual check. */
void asl_matches_counts(const asl_matches* m, int* candidates, int* after_ratio,
                        int* after_mutual);
asl_status asl_matches_get(const asl_matches* m, size_t index, int* index_a,
                           int* index_b, float* distance);
void asl_matches_destroy(asl_matches* m);

typedef struct asl_eval_options {
  asl_match_options match;
  double threshold;            /* px, homography metrics */
  int ransac_iterations;
  double ransac_threshold;     /* normalized symmetric epipolar distance */
  uint64_t ransac_seed;
  int virtual_correspondences;
  double recall_threshold;
  int threads;
} asl_eval_options;
void asl_eval_options_init(asl_eval_options* opt);

/* Runs the homography-ground-truth protocol over an HPatches-layout tree
 * (a sequence directory or a directory of sequences). The TSV lands at
 * out_tsv when non-NULL; *summary receives a printable table (free with
 * asl_string_free). */
asl_status asl_eval_hpatches(const asl_model* model, const char* root,
                             const asl_eval_options* opt, const char* out_tsv,
                             char** summary);

/* Epipolar protocol over a pair-list file ("imgA imgB F_file" per line). */
asl_status asl_eval_epipolar(const asl_model* model, const char* pairs_file,
                             const asl_eval_options* opt, const char* out_tsv,
                             char** summary);

/* Self-test and gradient-check suites. `filter` (may be NULL) selects checks
 * by substring. *failures receives the failed-check count; *report a
 * printable log. inject_dlt_fault is a test hook that corrupts one analytic
 * Jacobian so the harness can prove the checks bite. */
asl_status asl_selftest(const char* filter, int inject_dlt_fault,
                        char** report, int* failures);
asl_status asl_gradcheck(const char* filter, int inject_dlt_fault,
                         char** report, int* failures);

void asl_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* ASL_H */
