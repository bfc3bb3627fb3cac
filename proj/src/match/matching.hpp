#ifndef ASL_MATCH_MATCHING_HPP
#define ASL_MATCH_MATCHING_HPP

#include <vector>

#include "detect/feature_io.hpp"

namespace asl::match {

struct MatchOptions {
  float ratio = 0.8f;   // d1/d2 must be strictly below this; (0, 1]
  bool mutual = true;
};

struct Match {
  int index_a = -1, index_b = -1;
  float distance = 0.0f;
  bool ratio_passed = false;
  bool mutual = false;
  bool ransac_inlier = false;
};

struct MatchSet {
  std::vector<Match> matches;  // candidates that passed the enabled filters
  int candidates = 0;          // nearest-neighbor pairs before filtering
  int after_ratio = 0;
  int after_mutual = 0;        // equals matches.size() when mutual is on
};

// Exhaustive L2 nearest neighbor from a into b, Lowe ratio test (skipped when
// b has fewer than two descriptors), optional mutual cross-check.
MatchSet match_descriptors(const detect::FeatureSet& a,
                           const detect::FeatureSet& b,
                           const MatchOptions& opt);

}  // namespace asl::match

#endif
