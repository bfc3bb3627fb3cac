#include "detect/keypoints.hpp"

#include <algorithm>
#include <cmath>

namespace asl::detect {

std::vector<uint8_t> nms_mask(const Tensor& s, int size) {
  if (size < 3 || size % 2 == 0)
    raise(ErrorKind::kInvalidArg, "nms window must be odd and >= 3");
  if (s.channels() != 1)
    raise(ErrorKind::kInvalidArg, "nms expects a single-channel map");
  const int r = (size - 1) / 2;
  const int h = s.height(), w = s.width();
  std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = s.at(y, x, 0);
      bool keep = true;
      for (int dy = -r; dy <= r && keep; ++dy) {
        const int qy = y + dy;
        if (qy < 0 || qy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int qx = x + dx;
          if (qx < 0 || qx >= w || (dy == 0 && dx == 0)) continue;
          const float q = s.at(qy, qx, 0);
          if (q > v || (q == v && (qy < y || (qy == y && qx < x)))) {
            keep = false;
            break;
          }
        }
      }
      if (keep) mask[static_cast<size_t>(y) * w + x] = 1;
    }
  }
  return mask;
}

namespace {

struct Quad {
  double gx, gy;            // central-difference gradient
  double dxx, dyy, dxy;     // central-difference Hessian
};

Quad fit_quadratic(const Tensor& s, int x, int y) {
  auto v = [&](int dy, int dx) -> double { return s.at(y + dy, x + dx, 0); };
  Quad q;
  q.gx = 0.5 * (v(0, 1) - v(0, -1));
  q.gy = 0.5 * (v(1, 0) - v(-1, 0));
  q.dxx = v(0, 1) - 2.0 * v(0, 0) + v(0, -1);
  q.dyy = v(1, 0) - 2.0 * v(0, 0) + v(-1, 0);
  q.dxy = 0.25 * (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1));
  return q;
}

}  // namespace

bool edge_keep(const Tensor& s, int x, int y, float r) {
  const Quad q = fit_quadratic(s, x, y);
  const double det = q.dxx * q.dyy - q.dxy * q.dxy;
  if (det <= 0.0) return false;
  const double tr = q.dxx + q.dyy;
  const double limit = (r + 1.0) * (r + 1.0) / r;
  return tr * tr / det < limit;
}

Refined subpixel_refine(const Tensor& s, int x, int y) {
  const Quad q = fit_quadratic(s, x, y);
  const double det = q.dxx * q.dyy - q.dxy * q.dxy;
  Refined out;
  out.score = s.at(y, x, 0);
  if (std::abs(det) < 1e-12) return out;
  // -H^-1 g
  double dx = -(q.dyy * q.gx - q.dxy * q.gy) / det;
  double dy = -(-q.dxy * q.gx + q.dxx * q.gy) / det;
  dx = std::clamp(dx, -0.5, 0.5);
  dy = std::clamp(dy, -0.5, 0.5);
  out.dx = dx;
  out.dy = dy;
  out.score = s.at(y, x, 0) + q.gx * dx + q.gy * dy +
              0.5 * (q.dxx * dx * dx + 2.0 * q.dxy * dx * dy + q.dyy * dy * dy);
  return out;
}

std::vector<Keypoint> select_keypoints(const Tensor& score,
                                       const DetectorConfig& cfg) {
  const int h = score.height(), w = score.width();
  const int border = std::max(cfg.border, 1);  // the 3x3 fits need one pixel
  const std::vector<uint8_t> mask = nms_mask(score, cfg.nms_size);

  std::vector<Keypoint> kps;
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      if (!mask[static_cast<size_t>(y) * w + x]) continue;
      if (!edge_keep(score, x, y, cfg.edge_threshold)) continue;
      const Refined ref = subpixel_refine(score, x, y);
      if (ref.score < cfg.score_min) continue;
      Keypoint kp;
      kp.x = static_cast<float>(x + ref.dx);
      kp.y = static_cast<float>(y + ref.dy);
      kp.score = static_cast<float>(ref.score);
      kps.push_back(kp);
    }
  }

  std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (cfg.top_k >= 0 && kps.size() > static_cast<size_t>(cfg.top_k))
    kps.resize(cfg.top_k);
  return kps;
}

std::vector<size_t> cross_scale_nms(const std::vector<Keypoint>& kps,
                                    double radius) {
  std::vector<size_t> order(kps.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&kps](size_t ia, size_t ib) {
    const Keypoint& a = kps[ia];
    const Keypoint& b = kps[ib];
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<size_t> kept;
  for (size_t idx : order) {
    const Keypoint& kp = kps[idx];
    bool suppressed = false;
    for (size_t kidx : kept) {
      const Keypoint& k = kps[kidx];
      if (std::max(std::abs(k.x - kp.x), std::abs(k.y - kp.y)) <= radius) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

}  // namespace asl::detect
