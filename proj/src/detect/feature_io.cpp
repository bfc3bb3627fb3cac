#include "detect/feature_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace asl::detect {

namespace {

void check_consistent(const FeatureSet& fs) {
  if (fs.descriptors.size() != fs.count() * static_cast<size_t>(fs.desc_dim))
    raise(ErrorKind::kInvalidArg, "descriptor buffer size mismatch");
}

}  // namespace

void save_features_text(const FeatureSet& fs, const std::string& path) {
  check_consistent(fs);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) raise(ErrorKind::kIo, "cannot write features: " + path);
  std::fprintf(f, "ASLF1 %zu %d\n", fs.count(), fs.desc_dim);
  for (size_t i = 0; i < fs.count(); ++i) {
    const Keypoint& kp = fs.keypoints[i];
    // %.9g round-trips IEEE f32 exactly, keeping reruns byte-identical.
    std::fprintf(f, "%.9g %.9g %.9g %.9g", kp.x, kp.y, kp.score,
                 kp.pyramid_scale);
    const float* d = fs.desc(i);
    for (int c = 0; c < fs.desc_dim; ++c) std::fprintf(f, " %.9g", d[c]);
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) raise(ErrorKind::kIo, "short write: " + path);
}

void save_features_binary(const FeatureSet& fs, const std::string& path) {
  check_consistent(fs);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kIo, "cannot write features: " + path);
  out.write("ASLB", 4);
  const uint32_t count = static_cast<uint32_t>(fs.count());
  const uint32_t dim = static_cast<uint32_t>(fs.desc_dim);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (size_t i = 0; i < fs.count(); ++i) {
    const Keypoint& kp = fs.keypoints[i];
    const float rec[4] = {kp.x, kp.y, kp.score, kp.pyramid_scale};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    out.write(reinterpret_cast<const char*>(fs.desc(i)),
              static_cast<std::streamsize>(sizeof(float) * fs.desc_dim));
  }
  if (!out) raise(ErrorKind::kIo, "short write: " + path);
}

namespace {

FeatureSet load_features_binary(std::ifstream& in, const std::string& path) {
  uint32_t count = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in) raise(ErrorKind::kIo, "truncated feature file: " + path);
  if (dim == 0 || dim > 4096)
    raise(ErrorKind::kFormat, "implausible descriptor dim in " + path);
  FeatureSet fs;
  fs.desc_dim = static_cast<int>(dim);
  fs.keypoints.resize(count);
  fs.descriptors.resize(static_cast<size_t>(count) * dim);
  for (uint32_t i = 0; i < count; ++i) {
    float rec[4];
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    in.read(reinterpret_cast<char*>(fs.desc(i)),
            static_cast<std::streamsize>(sizeof(float) * dim));
    if (!in) raise(ErrorKind::kIo, "truncated feature file: " + path);
    fs.keypoints[i] = {rec[0], rec[1], rec[2], -1, rec[3]};
  }
  return fs;
}

FeatureSet load_features_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open features: " + path);
  std::string magic;
  size_t count = 0;
  int dim = 0;
  if (!(in >> magic >> count >> dim) || magic != "ASLF1")
    raise(ErrorKind::kFormat, "bad feature file header: " + path);
  if (dim <= 0 || dim > 4096)
    raise(ErrorKind::kFormat, "implausible descriptor dim in " + path);
  FeatureSet fs;
  fs.desc_dim = dim;
  fs.keypoints.resize(count);
  fs.descriptors.resize(count * static_cast<size_t>(dim));
  for (size_t i = 0; i < count; ++i) {
    Keypoint& kp = fs.keypoints[i];
    if (!(in >> kp.x >> kp.y >> kp.score >> kp.pyramid_scale))
      raise(ErrorKind::kIo, "truncated feature file: " + path);
    float* d = fs.desc(i);
    for (int c = 0; c < dim; ++c)
      if (!(in >> d[c]))
        raise(ErrorKind::kIo, "truncated feature file: " + path);
  }
  return fs;
}

}  // namespace

FeatureSet load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open features: " + path);
  char magic[5] = {0};
  in.read(magic, 5);
  if (in.gcount() >= 4 && std::memcmp(magic, "ASLB", 4) == 0)
    return load_features_binary(in, path);
  if (in.gcount() >= 5 && std::memcmp(magic, "ASLF1", 5) == 0)
    return load_features_text(path);
  raise(ErrorKind::kFormat, "unrecognized feature file magic: " + path);
}

}  // namespace asl::detect
