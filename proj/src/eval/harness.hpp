#ifndef ASL_EVAL_HARNESS_HPP
#define ASL_EVAL_HARNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include "match/epipolar.hpp"
#include "pipeline/extractor.hpp"

namespace asl::eval {

struct HPatchesOptions {
  match::MatchOptions match;
  double threshold = 3.0;  // px, for repeatability and M.S.
  int threads = 1;
};

struct HPatchesPairRow {
  std::string sequence;
  int target_index = 0;   // image 2..6
  bool skipped = false;
  std::string skip_reason;
  int keypoints_a = 0, keypoints_b = 0, matches = 0;
  std::optional<double> repeatability, matching_score;
  std::array<std::optional<double>, 10> mma;  // thresholds 1..10
};

struct HPatchesReport {
  std::vector<HPatchesPairRow> rows;
  int pairs_evaluated = 0, pairs_skipped = 0;

  std::optional<double> mean_repeatability() const;
  std::optional<double> mean_matching_score() const;
  std::array<std::optional<double>, 10> mean_mma() const;
  std::string tsv() const;
  std::string summary() const;
};

// `root` is either one sequence directory (images 1..6 plus H_1_2..H_1_6) or
// a directory of such sequences. Pairs with unreadable inputs are skipped
// with a warning row and counted.
HPatchesReport eval_hpatches(const pipeline::Extractor& extractor,
                             const std::string& root,
                             const HPatchesOptions& opt);

struct EpipolarOptions {
  match::MatchOptions match;
  int ransac_iterations = 2000;
  double ransac_threshold = 1e-4;  // normalized SED
  uint64_t ransac_seed = 0;
  int virtual_correspondences = 300;
  double recall_threshold = 0.05;
  int threads = 1;
};

struct EpipolarPairRow {
  std::string image_a, image_b;
  bool skipped = false;
  std::string skip_reason;
  bool estimate_ok = false;
  bool recalled = false;
  double mean_distance = 0.0;     // virtual-corr SED under the estimate
  int corrs_m = 0;                // matches before RANSAC
  int corrs = 0;                  // RANSAC inliers
  std::optional<double> inlier_pct;    // GT-consistent share of RANSAC inliers
  std::optional<double> inlier_m_pct;  // GT-consistent share of raw matches
};

struct EpipolarReport {
  std::vector<EpipolarPairRow> rows;
  int pairs_evaluated = 0, pairs_skipped = 0;

  double recall_pct() const;
  std::optional<double> mean_inlier_pct() const;
  std::optional<double> mean_inlier_m_pct() const;
  double mean_corrs() const;
  double mean_corrs_m() const;
  std::string tsv() const;
  std::string summary() const;
};

// Pair list: one "imgA imgB F_file" triple per line, paths resolved relative
// to the list file. F is a 3x3 row-major text matrix with x_b^T F x_a = 0.
EpipolarReport eval_epipolar(const pipeline::Extractor& extractor,
                             const std::string& pairs_file,
                             const EpipolarOptions& opt);

}  // namespace asl::eval

#endif
