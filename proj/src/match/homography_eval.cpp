#include "match/homography_eval.hpp"

#include <cmath>
#include <fstream>

namespace asl::match {

std::optional<geom::Vec2> warp_homography(const geom::Vec2& p,
                                          const geom::Mat3& H) {
  const double den = H[6] * p[0] + H[7] * p[1] + H[8];
  if (std::abs(den) <= 1e-12) return std::nullopt;
  return geom::Vec2{(H[0] * p[0] + H[1] * p[1] + H[2]) / den,
                    (H[3] * p[0] + H[4] * p[1] + H[5]) / den};
}

namespace {

bool inside(const geom::Vec2& p, const ImageSize& s) {
  return p[0] >= 0.0 && p[0] <= s.width - 1.0 && p[1] >= 0.0 &&
         p[1] <= s.height - 1.0;
}

struct WarpedSet {
  std::vector<geom::Vec2> points;  // warped positions of shared-view keypoints
};

WarpedSet shared_view(const std::vector<detect::Keypoint>& kps,
                      const geom::Mat3& H, const ImageSize& other) {
  WarpedSet out;
  for (const detect::Keypoint& kp : kps) {
    const auto w = warp_homography({kp.x, kp.y}, H);
    if (w && inside(*w, other)) out.points.push_back(*w);
  }
  return out;
}

int count_covered(const std::vector<geom::Vec2>& warped,
                  const std::vector<detect::Keypoint>& targets,
                  double threshold) {
  int covered = 0;
  const double t2 = threshold * threshold;
  for (const geom::Vec2& w : warped) {
    for (const detect::Keypoint& kp : targets) {
      const double dx = w[0] - kp.x, dy = w[1] - kp.y;
      if (dx * dx + dy * dy < t2) {
        ++covered;
        break;
      }
    }
  }
  return covered;
}

// Symmetric possible-match count: average of the two directional cover
// counts. Returns the shared-view sizes alongside.
struct PossibleMatches {
  double possible = 0.0;
  int shared_a = 0, shared_b = 0;
};

PossibleMatches possible_matches(const std::vector<detect::Keypoint>& kp_a,
                                 const std::vector<detect::Keypoint>& kp_b,
                                 const HomographyGT& gt, double threshold) {
  const geom::Mat3 Hinv = geom::mat3_inverse(gt.H);
  const WarpedSet a_in_b = shared_view(kp_a, gt.H, gt.size_b);
  const WarpedSet b_in_a = shared_view(kp_b, Hinv, gt.size_a);
  PossibleMatches out;
  out.shared_a = static_cast<int>(a_in_b.points.size());
  out.shared_b = static_cast<int>(b_in_a.points.size());
  const int c1 = count_covered(a_in_b.points, kp_b, threshold);
  const int c2 = count_covered(b_in_a.points, kp_a, threshold);
  out.possible = 0.5 * (c1 + c2);
  return out;
}

}  // namespace

std::optional<double> repeatability(const std::vector<detect::Keypoint>& kp_a,
                                    const std::vector<detect::Keypoint>& kp_b,
                                    const HomographyGT& gt, double threshold) {
  const PossibleMatches pm = possible_matches(kp_a, kp_b, gt, threshold);
  const int denom = std::min(pm.shared_a, pm.shared_b);
  if (denom == 0) return std::nullopt;
  return 100.0 * pm.possible / denom;
}

MatchMetrics match_metrics(const MatchSet& matches,
                           const std::vector<detect::Keypoint>& kp_a,
                           const std::vector<detect::Keypoint>& kp_b,
                           const HomographyGT& gt, double threshold) {
  MatchMetrics out;
  const PossibleMatches pm = possible_matches(kp_a, kp_b, gt, threshold);
  out.possible = pm.possible;
  out.shared_min = std::min(pm.shared_a, pm.shared_b);

  for (const Match& m : matches.matches) {
    const detect::Keypoint& a = kp_a[m.index_a];
    const detect::Keypoint& b = kp_b[m.index_b];
    const auto w = warp_homography({a.x, a.y}, gt.H);
    if (!w) continue;
    const double dx = (*w)[0] - b.x, dy = (*w)[1] - b.y;
    if (std::sqrt(dx * dx + dy * dy) < threshold) ++out.correct;
  }

  if (out.shared_min > 0)
    out.matching_score = 100.0 * out.correct / out.shared_min;
  if (out.possible > 0.0) out.mma = 100.0 * out.correct / out.possible;
  return out;
}

std::array<std::optional<double>, 10> mma_curve(
    const MatchSet& matches, const std::vector<detect::Keypoint>& kp_a,
    const std::vector<detect::Keypoint>& kp_b, const HomographyGT& gt) {
  std::array<std::optional<double>, 10> curve;
  for (int t = 1; t <= 10; ++t)
    curve[t - 1] = match_metrics(matches, kp_a, kp_b, gt, t).mma;
  return curve;
}

geom::Mat3 read_mat3(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open matrix file: " + path);
  geom::Mat3 m;
  for (double& v : m)
    if (!(in >> v)) raise(ErrorKind::kFormat, "malformed 3x3 matrix: " + path);
  return m;
}

void write_mat3(const geom::Mat3& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::kIo, "cannot write matrix file: " + path);
  char buf[64];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m[r * 3 + c]);
      out << buf << (c == 2 ? "\n" : " ");
    }
  }
  if (!out) raise(ErrorKind::kIo, "short write: " + path);
}

}  // namespace asl::match
