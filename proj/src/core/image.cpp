#include "core/image.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <vector>

namespace asl {

namespace {

// Reads the next header token, skipping whitespace and '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      while ((ch = in.get()) != EOF && !std::isspace(ch) && ch != '#')
        tok.push_back(static_cast<char>(ch));
      if (ch == '#') in.unget();
      break;
    }
  }
  return tok;
}

int parse_header_int(std::istream& in, const char* field) {
  const std::string tok = next_token(in);
  if (tok.empty()) raise(ErrorKind::kFormat, std::string("missing ") + field);
  int value = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      raise(ErrorKind::kFormat, std::string("non-numeric ") + field);
    value = value * 10 + (c - '0');
    if (value > 1 << 26) raise(ErrorKind::kFormat, std::string("absurd ") + field);
  }
  return value;
}

}  // namespace

Image load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open image: " + path);

  const std::string magic = next_token(in);
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    raise(ErrorKind::kFormat, "not a binary PGM/PPM file: " + path);

  const int width = parse_header_int(in, "width");
  const int height = parse_header_int(in, "height");
  const int maxval = parse_header_int(in, "maxval");
  if (width <= 0 || height <= 0)
    raise(ErrorKind::kFormat, "bad image dimensions in " + path);
  if (maxval <= 0 || maxval > 255)
    raise(ErrorKind::kFormat, "unsupported maxval (expected 1..255) in " + path);

  // Exactly one whitespace byte separates the header from the raster.
  in.get();

  const size_t count = static_cast<size_t>(width) * height * channels;
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<size_t>(in.gcount()) != count)
    raise(ErrorKind::kIo, "truncated pixel data in " + path);

  Tensor px(height, width, channels);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (size_t i = 0; i < count; ++i)
    px.data()[i] = static_cast<float>(raw[i]) * scale;
  return Image{std::move(px), path};
}

void save_image(const Image& img, const std::string& path) {
  const int c = img.channels();
  if (c != 1 && c != 3)
    raise(ErrorKind::kInvalidArg, "save_image expects 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kIo, "cannot write image: " + path);
  out << (c == 1 ? "P5" : "P6") << "\n"
      << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(img.pixels.data()[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) raise(ErrorKind::kIo, "short write: " + path);
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3)
    raise(ErrorKind::kInvalidArg, "to_grayscale expects 1 or 3 channels");
  Tensor gray(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float* p = img.pixels.cell(y, x);
      gray.at(y, x, 0) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return Image{std::move(gray), img.source_path};
}

Tensor standardize(const Image& img) {
  const size_t n = img.pixels.size();
  if (n < 2) raise(ErrorKind::kInvalidArg, "standardize needs at least 2 pixels");
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += img.pixels.data()[i];
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = img.pixels.data()[i] - mean;
    var += d * d;
  }
  const double sigma = std::max(std::sqrt(var / static_cast<double>(n)), 1e-6);

  Tensor out(img.height(), img.width(), img.channels());
  const float fmean = static_cast<float>(mean);
  const float inv = static_cast<float>(1.0 / sigma);
  for (size_t i = 0; i < n; ++i)
    out.data()[i] = (img.pixels.data()[i] - fmean) * inv;
  return out;
}

}  // namespace asl
