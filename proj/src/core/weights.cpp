#include "core/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace asl {

static_assert(std::endian::native == std::endian::little,
              "weight file I/O assumes a little-endian host");

void WeightStore::add(WeightEntry entry) {
  if (entry.name.empty())
    raise(ErrorKind::kInvalidArg, "weight entry needs a name");
  if (index_.count(entry.name))
    raise(ErrorKind::kInvalidArg, "duplicate weight entry: " + entry.name);
  if (entry.values.size() != entry.element_count())
    raise(ErrorKind::kInvalidArg,
          "weight value count does not match dims: " + entry.name);
  index_[entry.name] = entries_.size();
  entries_.push_back(std::move(entry));
}

bool WeightStore::has(const std::string& name) const {
  return index_.count(name) != 0;
}

const WeightEntry& WeightStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    raise(ErrorKind::kFormat, "missing weight entry: " + name);
  return entries_[it->second];
}

namespace {

class BoxMuller {
 public:
  explicit BoxMuller(uint64_t seed) : gen_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1], u2 in [0, 1); 53-bit mantissas from the raw stream.
    const double u1 =
        (static_cast<double>(gen_() >> 11) + 1.0) * (1.0 / 9007199254740992.0);
    const double u2 =
        static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

size_t fan_in(const std::vector<uint32_t>& dims) {
  // Convention: the last dim is the output count; everything before it feeds in.
  if (dims.size() <= 1) return 1;
  size_t n = 1;
  for (size_t i = 0; i + 1 < dims.size(); ++i) n *= dims[i];
  return n == 0 ? 1 : n;
}

}  // namespace

WeightStore seeded_random_weights(uint64_t seed,
                                  const std::vector<WeightSpec>& specs) {
  BoxMuller rng(seed);
  WeightStore store;
  for (const WeightSpec& spec : specs) {
    WeightEntry e;
    e.name = spec.name;
    e.dims = spec.dims;
    e.values.resize(e.element_count());
    switch (spec.init) {
      case WeightInit::kZeros:
        break;
      case WeightInit::kOnes:
        std::fill(e.values.begin(), e.values.end(), 1.0f);
        break;
      case WeightInit::kHeNormal: {
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in(spec.dims)));
        for (float& v : e.values) v = static_cast<float>(stddev * rng.next());
        break;
      }
    }
    store.add(std::move(e));
  }
  return store;
}

void validate_against(const WeightStore& store,
                      const std::vector<WeightSpec>& specs) {
  for (const WeightSpec& spec : specs) {
    if (!store.has(spec.name))
      raise(ErrorKind::kFormat, "weight store is missing layer: " + spec.name);
    const WeightEntry& e = store.get(spec.name);
    if (e.dims != spec.dims)
      raise(ErrorKind::kFormat, "weight shape mismatch for layer: " + spec.name);
  }
  if (store.size() != specs.size())
    raise(ErrorKind::kFormat, "weight store carries unexpected extra entries");
}

namespace {

constexpr char kMagic[4] = {'A', 'S', 'L', 'W'};
constexpr uint8_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) raise(ErrorKind::kIo, "truncated weight file");
  return v;
}

}  // namespace

void write_weights(const WeightStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kIo, "cannot write weights: " + path);
  out.write(kMagic, 4);
  write_le(out, kVersion);
  for (const WeightEntry& e : store.entries()) {
    if (e.name.size() > 0xFFFF || e.dims.size() > 0xFF)
      raise(ErrorKind::kInvalidArg, "weight entry exceeds format limits");
    write_le(out, static_cast<uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_le(out, static_cast<uint8_t>(e.dims.size()));
    for (uint32_t d : e.dims) write_le(out, d);
    out.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(float)));
  }
  write_le(out, static_cast<uint16_t>(0));
  if (!out) raise(ErrorKind::kIo, "short write: " + path);
}

WeightStore read_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open weights: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    raise(ErrorKind::kFormat, "bad magic in weight file: " + path);
  const auto version = read_le<uint8_t>(in);
  if (version != kVersion)
    raise(ErrorKind::kFormat, "unsupported weight file version");

  WeightStore store;
  for (;;) {
    const auto name_len = read_le<uint16_t>(in);
    if (name_len == 0) break;
    WeightEntry e;
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    if (!in) raise(ErrorKind::kIo, "truncated weight file");
    const auto rank = read_le<uint8_t>(in);
    e.dims.resize(rank);
    for (uint8_t i = 0; i < rank; ++i) e.dims[i] = read_le<uint32_t>(in);
    const size_t count = e.element_count();
    if (count > (1u << 28))
      raise(ErrorKind::kFormat, "weight entry implausibly large: " + e.name);
    e.values.resize(count);
    in.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) raise(ErrorKind::kIo, "truncated weight file");
    store.add(std::move(e));
  }
  return store;
}

}  // namespace asl
