#include "match/epipolar.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace asl::match {

namespace {

double diagonal(const ImageSize& s) {
  return std::sqrt(static_cast<double>(s.width) * s.width +
                   static_cast<double>(s.height) * s.height);
}

// Rescale F from pixel units to diagonal-normalized units:
// x_n = x / d, so F_n = diag(d_b, d_b, 1) F diag(d_a, d_a, 1).
geom::Mat3 normalize_f(const geom::Mat3& F, const ImageSize& size_a,
                       const ImageSize& size_b) {
  const double da = diagonal(size_a), db = diagonal(size_b);
  geom::Mat3 out = F;
  for (int c = 0; c < 3; ++c) {
    out[0 * 3 + c] *= db;
    out[1 * 3 + c] *= db;
  }
  for (int r = 0; r < 3; ++r) {
    out[r * 3 + 0] *= da;
    out[r * 3 + 1] *= da;
  }
  return out;
}

std::optional<double> sed_normalized(const geom::Vec2& xn,
                                     const geom::Vec2& xpn,
                                     const geom::Mat3& Fn) {
  const std::array<double, 3> l = geom::mat3_apply(Fn, {xn[0], xn[1], 1.0});
  const geom::Mat3 Ft = geom::mat3_transpose(Fn);
  const std::array<double, 3> lp = geom::mat3_apply(Ft, {xpn[0], xpn[1], 1.0});
  const double e = xpn[0] * l[0] + xpn[1] * l[1] + l[2];
  const double n1 = l[0] * l[0] + l[1] * l[1];
  const double n2 = lp[0] * lp[0] + lp[1] * lp[1];
  if (n1 <= 0.0 && n2 <= 0.0) return std::nullopt;
  double acc = 0.0;
  if (n1 > 0.0) acc += 1.0 / n1;
  if (n2 > 0.0) acc += 1.0 / n2;
  return e * e * acc;
}

}  // namespace

std::optional<double> symmetric_epipolar_distance(const geom::Vec2& x,
                                                  const geom::Vec2& xp,
                                                  const geom::Mat3& F,
                                                  const ImageSize& size_a,
                                                  const ImageSize& size_b) {
  const double da = diagonal(size_a), db = diagonal(size_b);
  return sed_normalized({x[0] / da, x[1] / da}, {xp[0] / db, xp[1] / db},
                        normalize_f(F, size_a, size_b));
}

geom::Mat3 fundamental_from_pose(const geom::Mat3& k_a, const geom::Mat3& k_b,
                                 const geom::Mat3& rotation,
                                 const std::array<double, 3>& translation) {
  const geom::Mat3 tx = {0.0, -translation[2], translation[1],
                         translation[2], 0.0, -translation[0],
                         -translation[1], translation[0], 0.0};
  const geom::Mat3 e = geom::mat3_mul(tx, rotation);  // essential matrix
  const geom::Mat3 kb_inv_t = geom::mat3_transpose(geom::mat3_inverse(k_b));
  return geom::mat3_mul(geom::mat3_mul(kb_inv_t, e), geom::mat3_inverse(k_a));
}

namespace {

struct Normalization {
  Eigen::Matrix3d T;
  std::vector<Eigen::Vector2d> pts;
};

Normalization hartley_normalize(const std::vector<geom::Vec2>& pts) {
  Normalization n;
  n.pts.reserve(pts.size());
  Eigen::Vector2d centroid(0, 0);
  for (const auto& p : pts) centroid += Eigen::Vector2d(p[0], p[1]);
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts)
    mean_dist += (Eigen::Vector2d(p[0], p[1]) - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  n.T << scale, 0, -scale * centroid.x(), 0, scale, -scale * centroid.y(), 0, 0, 1;
  for (const auto& p : pts)
    n.pts.emplace_back(scale * (p[0] - centroid.x()),
                       scale * (p[1] - centroid.y()));
  return n;
}

}  // namespace

geom::Mat3 eight_point(const std::vector<geom::Vec2>& a,
                       const std::vector<geom::Vec2>& b) {
  if (a.size() != b.size() || a.size() < 8)
    raise(ErrorKind::kInvalidArg, "eight_point needs >= 8 correspondences");
  const Normalization na = hartley_normalize(a);
  const Normalization nb = hartley_normalize(b);

  Eigen::MatrixXd A(static_cast<Eigen::Index>(a.size()), 9);
  for (size_t i = 0; i < a.size(); ++i) {
    const double x = na.pts[i].x(), y = na.pts[i].y();
    const double xp = nb.pts[i].x(), yp = nb.pts[i].y();
    A.row(static_cast<Eigen::Index>(i)) << xp * x, xp * y, xp, yp * x, yp * y,
        yp, x, y, 1.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Eigen::Matrix3d Fn;
  Fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);

  // Rank-2 enforcement.
  Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(
      Fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = fsvd.singularValues();
  s(2) = 0.0;
  Fn = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();

  const Eigen::Matrix3d F = nb.T.transpose() * Fn * na.T;
  geom::Mat3 out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = F(r, c);
  return out;
}

RansacResult estimate_fundamental_ransac(const std::vector<geom::Vec2>& a,
                                         const std::vector<geom::Vec2>& b,
                                         const RansacOptions& opt) {
  RansacResult result;
  const size_t n = a.size();
  if (b.size() != n) raise(ErrorKind::kInvalidArg, "point count mismatch");
  if (n < 8) return result;  // declared estimation-failure case

  const double da = diagonal(opt.size_a), db = diagonal(opt.size_b);
  std::vector<geom::Vec2> an(n), bn(n);
  for (size_t i = 0; i < n; ++i) {
    an[i] = {a[i][0] / da, a[i][1] / da};
    bn[i] = {b[i][0] / db, b[i][1] / db};
  }

  auto count_inliers = [&](const geom::Mat3& F, std::vector<char>* mask) {
    const geom::Mat3 Fn = normalize_f(F, opt.size_a, opt.size_b);
    int count = 0;
    for (size_t i = 0; i < n; ++i) {
      const auto d = sed_normalized(an[i], bn[i], Fn);
      const bool in = d && *d < opt.inlier_threshold;
      if (mask) (*mask)[i] = in ? 1 : 0;
      if (in) count += 1;
    }
    return count;
  };

  std::mt19937_64 gen(opt.seed);
  std::vector<size_t> indices(n);
  for (size_t i = 0; i < n; ++i) indices[i] = i;

  int best_count = -1;
  geom::Mat3 best_f{};
  std::vector<geom::Vec2> sa(8), sb(8);
  for (int it = 0; it < opt.iterations; ++it) {
    // Partial Fisher-Yates; gen() % k is reproducible across platforms.
    for (int j = 0; j < 8; ++j) {
      const size_t pick = j + static_cast<size_t>(gen() % (n - j));
      std::swap(indices[j], indices[pick]);
      sa[j] = a[indices[j]];
      sb[j] = b[indices[j]];
    }
    geom::Mat3 F;
    try {
      F = eight_point(sa, sb);
    } catch (const Error&) {
      continue;  // degenerate sample
    }
    const int count = count_inliers(F, nullptr);
    if (count > best_count) {
      best_count = count;
      best_f = F;
    }
  }

  if (best_count < 8) return result;

  // Refit on the inlier set until it stops changing.
  std::vector<char> mask(n, 0);
  int count = count_inliers(best_f, &mask);
  geom::Mat3 F = best_f;
  for (int round = 0; round < opt.refit_rounds; ++round) {
    if (count < 8) break;
    std::vector<geom::Vec2> ia, ib;
    ia.reserve(count);
    ib.reserve(count);
    for (size_t i = 0; i < n; ++i)
      if (mask[i]) {
        ia.push_back(a[i]);
        ib.push_back(b[i]);
      }
    geom::Mat3 refit;
    try {
      refit = eight_point(ia, ib);
    } catch (const Error&) {
      break;
    }
    std::vector<char> new_mask(n, 0);
    const int new_count = count_inliers(refit, &new_mask);
    if (new_count < count) break;
    F = refit;
    const bool stable = new_mask == mask;
    mask.swap(new_mask);
    count = new_count;
    if (stable) break;
  }

  result.success = true;
  result.F = F;
  result.inlier_mask = std::move(mask);
  result.inlier_count = count;
  return result;
}

std::vector<std::pair<geom::Vec2, geom::Vec2>> virtual_correspondences_from_f(
    const geom::Mat3& F, const ImageSize& size_a, const ImageSize& size_b,
    int count, uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto uniform = [&gen](double lo, double hi) {
    const double u =
        static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  };

  std::vector<std::pair<geom::Vec2, geom::Vec2>> corrs;
  corrs.reserve(count);
  const double wb = size_b.width - 1.0, hb = size_b.height - 1.0;
  int attempts = 0;
  while (static_cast<int>(corrs.size()) < count && attempts < count * 200) {
    ++attempts;
    const geom::Vec2 x{uniform(0.0, size_a.width - 1.0),
                       uniform(0.0, size_a.height - 1.0)};
    const std::array<double, 3> l = geom::mat3_apply(F, {x[0], x[1], 1.0});
    // Clip the epipolar line l . p = 0 to the image-B rectangle.
    std::vector<geom::Vec2> hits;
    auto push_if_inside = [&](double px, double py) {
      if (px >= -1e-9 && px <= wb + 1e-9 && py >= -1e-9 && py <= hb + 1e-9)
        hits.push_back({std::clamp(px, 0.0, wb), std::clamp(py, 0.0, hb)});
    };
    if (std::abs(l[1]) > 1e-15) {
      push_if_inside(0.0, -l[2] / l[1]);
      push_if_inside(wb, -(l[2] + l[0] * wb) / l[1]);
    }
    if (std::abs(l[0]) > 1e-15) {
      push_if_inside(-l[2] / l[0], 0.0);
      push_if_inside(-(l[2] + l[1] * hb) / l[0], hb);
    }
    if (hits.size() < 2) continue;
    // The two extreme hits delimit the in-image segment.
    size_t i0 = 0, i1 = 0;
    double best = -1.0;
    for (size_t i = 0; i < hits.size(); ++i)
      for (size_t j = i + 1; j < hits.size(); ++j) {
        const double dx = hits[i][0] - hits[j][0];
        const double dy = hits[i][1] - hits[j][1];
        const double d2 = dx * dx + dy * dy;
        if (d2 > best) {
          best = d2;
          i0 = i;
          i1 = j;
        }
      }
    if (best < 1.0) continue;  // degenerate sliver
    const double u = uniform(0.05, 0.95);
    corrs.emplace_back(x, geom::Vec2{hits[i0][0] + u * (hits[i1][0] - hits[i0][0]),
                                     hits[i0][1] + u * (hits[i1][1] - hits[i0][1])});
  }
  if (static_cast<int>(corrs.size()) < count)
    raise(ErrorKind::kNumeric,
          "could not place virtual correspondences inside the image");
  return corrs;
}

double mean_sed(const std::vector<std::pair<geom::Vec2, geom::Vec2>>& corrs,
                const geom::Mat3& F, const ImageSize& size_a,
                const ImageSize& size_b) {
  if (corrs.empty()) raise(ErrorKind::kInvalidArg, "no correspondences");
  double acc = 0.0;
  int used = 0;
  for (const auto& [x, xp] : corrs) {
    const auto d = symmetric_epipolar_distance(x, xp, F, size_a, size_b);
    if (d) {
      acc += *d;
      ++used;
    }
  }
  if (used == 0) raise(ErrorKind::kNumeric, "all epipolar lines degenerate");
  return acc / used;
}

double pose_recall(const std::vector<PairRecallInput>& pairs, double threshold) {
  if (pairs.empty()) raise(ErrorKind::kInvalidArg, "no pairs");
  int recalled = 0;
  for (const PairRecallInput& p : pairs)
    if (p.estimate_ok && p.mean_distance < threshold) ++recalled;
  return 100.0 * recalled / static_cast<double>(pairs.size());
}

}  // namespace asl::match
