#include "detect/pyramid.hpp"

#include <cmath>

namespace asl::detect {

PyramidPlan plan_pyramid(int width, int height, int max_side, int min_side) {
  if (width < 1 || height < 1)
    raise(ErrorKind::kInvalidArg, "empty image in pyramid plan");
  PyramidPlan plan;
  const int longest = std::max(width, height);
  plan.cap_scale = longest > max_side
                       ? static_cast<double>(max_side) / longest
                       : 1.0;

  const double step = 1.0 / std::sqrt(2.0);
  for (int k = 0;; ++k) {
    const double scale = plan.cap_scale * std::pow(step, k);
    const int w = std::max(1, static_cast<int>(std::lround(width * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(height * scale)));
    if (k > 0 && std::max(w, h) < min_side) break;
    plan.levels.push_back({w, h, scale, k});
  }
  return plan;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) raise(ErrorKind::kInvalidArg, "sigma must be positive");
  const int radius = static_cast<int>(std::floor(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Tensor gaussian_blur(const Tensor& t, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = (static_cast<int>(k.size()) - 1) / 2;
  const int h = t.height(), w = t.width(), c = t.channels();

  Tensor horiz(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * t.at_clamped(y, x + i, ch);
        horiz.at(y, x, ch) = static_cast<float>(acc);
      }

  Tensor out(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * horiz.at_clamped(y + i, x, ch);
        out.at(y, x, ch) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace asl::detect
