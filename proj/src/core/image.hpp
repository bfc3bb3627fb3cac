#ifndef ASL_CORE_IMAGE_HPP
#define ASL_CORE_IMAGE_HPP

#include <string>

#include "core/tensor.hpp"

namespace asl {

// Pixels in [0, 1]; 1 channel (gray) or 3 channels (RGB).
struct Image {
  Tensor pixels;
  std::string source_path;

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
  int channels() const { return pixels.channels(); }
};

// Binary PGM (P5) / PPM (P6), maxval up to 255. Values are scaled by the
// declared maxval. Malformed headers raise kFormat, truncated data kIo.
Image load_image(const std::string& path);

// Writes P5 for 1-channel, P6 for 3-channel input; values clamped to [0, 1].
void save_image(const Image& img, const std::string& path);

// BT.601 luma: 0.299 R + 0.587 G + 0.114 B. 1-channel input passes through.
Image to_grayscale(const Image& img);

// Zero mean, unit population standard deviation over the whole tensor
// (all channels pooled). Sigma is clamped at 1e-6, so a constant image maps
// to all zeros.
Tensor standardize(const Image& img);

}  // namespace asl

#endif
