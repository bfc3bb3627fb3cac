#ifndef ASL_DETECT_PYRAMID_HPP
#define ASL_DETECT_PYRAMID_HPP

#include <vector>

#include "core/tensor.hpp"

namespace asl::detect {

// One image-pyramid level. `scale` is the closed-form size ratio relative to
// the original image (cap_scale / sqrt(2)^index); keypoint coordinates found
// at this level map back by dividing by it.
struct PyramidLevel {
  int width = 0, height = 0;
  double scale = 1.0;
  int index = 0;
};

struct PyramidPlan {
  std::vector<PyramidLevel> levels;
  double cap_scale = 1.0;  // < 1 when the input exceeded max_side
};

// Level 0 is the input (shrunk so the longest side is at most max_side);
// each further level divides the size by sqrt(2) and is included while its
// longest side is still >= min_side. The original scale always yields at
// least one level.
PyramidPlan plan_pyramid(int width, int height, int max_side = 2048,
                         int min_side = 128);

// Separable Gaussian, taps at |i| <= floor(3 sigma), normalized to sum 1,
// clamp-to-edge borders.
Tensor gaussian_blur(const Tensor& t, double sigma);
std::vector<double> gaussian_kernel(double sigma);

}  // namespace asl::detect

#endif
