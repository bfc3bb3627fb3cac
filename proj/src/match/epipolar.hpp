#ifndef ASL_MATCH_EPIPOLAR_HPP
#define ASL_MATCH_EPIPOLAR_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "geom/transforms.hpp"
#include "match/homography_eval.hpp"

namespace asl::match {

struct FundamentalGT {
  geom::Mat3 F;  // x_b^T F x_a = 0, rank 2
  ImageSize size_a, size_b;
};

// Symmetric epipolar distance of a correspondence, evaluated in coordinates
// normalized by each image's diagonal length (so thresholds like 0.05 are
// resolution-independent); F is given in pixel units and rescaled internally.
// nullopt when both epipolar line normals vanish.
std::optional<double> symmetric_epipolar_distance(const geom::Vec2& x,
                                                  const geom::Vec2& xp,
                                                  const geom::Mat3& F,
                                                  const ImageSize& size_a,
                                                  const ImageSize& size_b);

// F = Kb^-T [t]x R Ka^-1 for x_b ~ Kb (R X + t), X in camera A coordinates.
geom::Mat3 fundamental_from_pose(const geom::Mat3& k_a, const geom::Mat3& k_b,
                                 const geom::Mat3& rotation,
                                 const std::array<double, 3>& translation);

// Hartley-normalized least-squares 8-point solve (>= 8 correspondences),
// rank-2 enforced by truncating the smallest singular value.
geom::Mat3 eight_point(const std::vector<geom::Vec2>& a,
                       const std::vector<geom::Vec2>& b);

struct RansacOptions {
  int iterations = 2000;
  double inlier_threshold = 1e-4;  // on the normalized SED
  uint64_t seed = 0;
  ImageSize size_a, size_b;
  int refit_rounds = 4;
};

struct RansacResult {
  bool success = false;
  geom::Mat3 F{};
  std::vector<char> inlier_mask;
  int inlier_count = 0;
};

// Classic 8-point RANSAC: seeded minimal samples, best model by inlier count,
// then refit on the inlier set until it stabilizes. Fewer than 8 input
// matches yields a failed result (never throws for that case).
RansacResult estimate_fundamental_ransac(const std::vector<geom::Vec2>& a,
                                         const std::vector<geom::Vec2>& b,
                                         const RansacOptions& opt);

// Correspondences exactly consistent with F: random points in image A paired
// with points sampled on their epipolar lines clipped to image B. Seeded and
// deterministic; points whose line misses image B are re-drawn.
std::vector<std::pair<geom::Vec2, geom::Vec2>> virtual_correspondences_from_f(
    const geom::Mat3& F, const ImageSize& size_a, const ImageSize& size_b,
    int count, uint64_t seed);

// Mean normalized SED of a correspondence set under F.
double mean_sed(const std::vector<std::pair<geom::Vec2, geom::Vec2>>& corrs,
                const geom::Mat3& F, const ImageSize& size_a,
                const ImageSize& size_b);

struct PairRecallInput {
  bool estimate_ok = false;
  double mean_distance = 0.0;  // normalized SED of virtual corrs under the estimate
};

// Share of pairs whose estimate is valid and lands under the threshold.
double pose_recall(const std::vector<PairRecallInput>& pairs,
                   double threshold = 0.05);

}  // namespace asl::match

#endif
