#ifndef ASL_LOSS_CORRESPONDENCE_HPP
#define ASL_LOSS_CORRESPONDENCE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "core/tensor.hpp"
#include "geom/transforms.hpp"
#include "match/epipolar.hpp"

namespace asl::loss {

// Two pinhole views of the same scene with a per-pixel depth map for view A
// (meters; 0 marks invalid).
struct CameraPair {
  geom::Mat3 k_a = geom::mat3_identity();
  geom::Mat3 k_b = geom::mat3_identity();
  geom::Mat3 rotation = geom::mat3_identity();  // orthonormal, det 1
  std::array<double, 3> translation{};
  Tensor depth;  // (H, W, 1) for image A
  match::ImageSize size_a, size_b;

  geom::Mat3 fundamental() const {
    return match::fundamental_from_pose(k_a, k_b, rotation, translation);
  }
};

struct Correspondence {
  geom::Vec2 a{}, b{};
  bool valid = false;
};

enum class CorrespondenceSource { kDepthWarp, kHomography };

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  CorrespondenceSource source = CorrespondenceSource::kHomography;

  // Training-batch bounds: a loss evaluation wants at least 32 valid pairs
  // and is capped at 512.
  static constexpr int kMinForLoss = 32;
  static constexpr int kMaxForLoss = 512;

  int valid_count() const;
  bool eligible_for_loss() const { return valid_count() >= kMinForLoss; }

  // Valid pairs only, truncated to kMaxForLoss in order.
  std::vector<Correspondence> loss_batch() const;
};

// p' = project(Kb (R d Ka^-1 p~ + t)); zero depth, points behind the camera
// or landing outside image B are flagged invalid. Depth is read at the
// nearest pixel.
CorrespondenceSet warp_points_depth(const std::vector<geom::Vec2>& points,
                                    const CameraPair& cam);

// Same validity rules with a plain homography (synthetic stand-in data).
CorrespondenceSet warp_points_homography(const std::vector<geom::Vec2>& points,
                                         const geom::Mat3& H,
                                         const match::ImageSize& size_b);

struct SceneOptions {
  uint64_t seed = 7;
  double pose_magnitude = 0.15;  // radians of rotation / relative baseline
  double depth_min = 4.0, depth_max = 8.0;
  int width = 640, height = 480;
};

// Random smooth positive depth plus a small rigid motion; every warped pair
// satisfies the pair's fundamental matrix exactly by construction.
CameraPair make_synthetic_camera_pair(const SceneOptions& opt);

}  // namespace asl::loss

#endif
