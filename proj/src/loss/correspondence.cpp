#include "loss/correspondence.hpp"

#include <cmath>
#include <random>

namespace asl::loss {

int CorrespondenceSet::valid_count() const {
  int n = 0;
  for (const Correspondence& c : pairs) n += c.valid ? 1 : 0;
  return n;
}

std::vector<Correspondence> CorrespondenceSet::loss_batch() const {
  std::vector<Correspondence> out;
  for (const Correspondence& c : pairs) {
    if (!c.valid) continue;
    out.push_back(c);
    if (static_cast<int>(out.size()) == kMaxForLoss) break;
  }
  return out;
}

namespace {

bool inside(const geom::Vec2& p, const match::ImageSize& s) {
  return p[0] >= 0.0 && p[0] <= s.width - 1.0 && p[1] >= 0.0 &&
         p[1] <= s.height - 1.0;
}

}  // namespace

CorrespondenceSet warp_points_depth(const std::vector<geom::Vec2>& points,
                                    const CameraPair& cam) {
  CorrespondenceSet set;
  set.source = CorrespondenceSource::kDepthWarp;
  const geom::Mat3 ka_inv = geom::mat3_inverse(cam.k_a);
  set.pairs.reserve(points.size());
  for (const geom::Vec2& p : points) {
    Correspondence c;
    c.a = p;
    const int px = static_cast<int>(std::lround(p[0]));
    const int py = static_cast<int>(std::lround(p[1]));
    if (px < 0 || py < 0 || px >= cam.depth.width() || py >= cam.depth.height()) {
      set.pairs.push_back(c);
      continue;
    }
    const double d = cam.depth.at(py, px, 0);
    if (d <= 0.0) {
      set.pairs.push_back(c);
      continue;
    }
    const auto ray = geom::mat3_apply(ka_inv, {p[0], p[1], 1.0});
    const std::array<double, 3> X = {d * ray[0], d * ray[1], d * ray[2]};
    auto Xb = geom::mat3_apply(cam.rotation, X);
    for (int i = 0; i < 3; ++i) Xb[i] += cam.translation[i];
    if (Xb[2] <= 1e-9) {
      set.pairs.push_back(c);
      continue;
    }
    const auto proj = geom::mat3_apply(cam.k_b, Xb);
    c.b = {proj[0] / proj[2], proj[1] / proj[2]};
    c.valid = inside(c.b, cam.size_b);
    set.pairs.push_back(c);
  }
  return set;
}

CorrespondenceSet warp_points_homography(const std::vector<geom::Vec2>& points,
                                         const geom::Mat3& H,
                                         const match::ImageSize& size_b) {
  CorrespondenceSet set;
  set.source = CorrespondenceSource::kHomography;
  set.pairs.reserve(points.size());
  for (const geom::Vec2& p : points) {
    Correspondence c;
    c.a = p;
    const auto w = match::warp_homography(p, H);
    if (w) {
      c.b = *w;
      c.valid = inside(c.b, size_b);
    }
    set.pairs.push_back(c);
  }
  return set;
}

namespace {

geom::Mat3 rodrigues(double ax, double ay, double az) {
  const double angle = std::sqrt(ax * ax + ay * ay + az * az);
  if (angle < 1e-12) return geom::mat3_identity();
  const double x = ax / angle, y = ay / angle, z = az / angle;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
          t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
          t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

}  // namespace

CameraPair make_synthetic_camera_pair(const SceneOptions& opt) {
  std::mt19937_64 gen(opt.seed);
  auto uniform = [&gen](double lo, double hi) {
    const double u =
        static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  };

  CameraPair cam;
  cam.size_a = {opt.width, opt.height};
  cam.size_b = {opt.width, opt.height};
  const double f = 0.9 * std::max(opt.width, opt.height);
  cam.k_a = {f, 0.0, opt.width / 2.0, 0.0, f, opt.height / 2.0, 0.0, 0.0, 1.0};
  cam.k_b = cam.k_a;

  const double m = opt.pose_magnitude;
  cam.rotation = rodrigues(uniform(-m, m), uniform(-m, m), uniform(-m, m));
  const double baseline = m * 0.5 * (opt.depth_min + opt.depth_max);
  cam.translation = {uniform(-baseline, baseline), uniform(-baseline, baseline),
                     uniform(-baseline, baseline) * 0.25};

  // Smooth positive depth: a tilted plane plus low-frequency waves.
  cam.depth = Tensor(opt.height, opt.width, 1);
  const double span = opt.depth_max - opt.depth_min;
  const double tilt_x = uniform(-0.2, 0.2), tilt_y = uniform(-0.2, 0.2);
  const double phase = uniform(0.0, 6.28);
  for (int y = 0; y < opt.height; ++y) {
    for (int x = 0; x < opt.width; ++x) {
      const double u = static_cast<double>(x) / opt.width;
      const double v = static_cast<double>(y) / opt.height;
      const double wave = 0.5 + 0.5 * std::sin(4.0 * u + phase) *
                                    std::cos(3.0 * v - phase);
      double d = opt.depth_min +
                 span * std::clamp(0.25 + 0.5 * wave + tilt_x * u + tilt_y * v,
                                   0.0, 1.0);
      cam.depth.at(y, x, 0) = static_cast<float>(d);
    }
  }
  return cam;
}

}  // namespace asl::loss
