#ifndef ASL_MATCH_HOMOGRAPHY_EVAL_HPP
#define ASL_MATCH_HOMOGRAPHY_EVAL_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "geom/transforms.hpp"
#include "match/matching.hpp"

namespace asl::match {

struct ImageSize {
  int width = 0, height = 0;
};

struct HomographyGT {
  geom::Mat3 H;  // maps image A points to image B, H33 normalized to 1
  ImageSize size_a, size_b;
};

// Projective transform with division; nullopt when |h3 . p| <= 1e-12.
std::optional<geom::Vec2> warp_homography(const geom::Vec2& p,
                                          const geom::Mat3& H);

// Keypoint repeatability with the symmetric check: a keypoint counts when its
// warp lands within `threshold` of some keypoint of the other image, the two
// directions are averaged, and the denominator is the smaller shared-view
// count. Returns percent; nullopt when no keypoint survives the shared-view
// test on one side.
std::optional<double> repeatability(const std::vector<detect::Keypoint>& kp_a,
                                    const std::vector<detect::Keypoint>& kp_b,
                                    const HomographyGT& gt, double threshold);

struct MatchMetrics {
  std::optional<double> matching_score;  // percent
  std::optional<double> mma;             // percent
  int correct = 0;
  double possible = 0.0;
  int shared_min = 0;
};

// correct = matches whose warped distance falls below the threshold;
// M.S. = correct / min shared keypoints, MMA = correct / possible matches.
MatchMetrics match_metrics(const MatchSet& matches,
                           const std::vector<detect::Keypoint>& kp_a,
                           const std::vector<detect::Keypoint>& kp_b,
                           const HomographyGT& gt, double threshold);

// MMA at integer thresholds 1..10 px; monotone by construction.
std::array<std::optional<double>, 10> mma_curve(
    const MatchSet& matches, const std::vector<detect::Keypoint>& kp_a,
    const std::vector<detect::Keypoint>& kp_b, const HomographyGT& gt);

// Whitespace-separated row-major 3x3 text matrix.
geom::Mat3 read_mat3(const std::string& path);
void write_mat3(const geom::Mat3& m, const std::string& path);

}  // namespace asl::match

#endif
