#ifndef ASL_CORE_WEIGHTS_HPP
#define ASL_CORE_WEIGHTS_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/error.hpp"

namespace asl {

struct WeightEntry {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<float> values;

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
};

// Named weight arrays in insertion order. Order matters: the file format and
// the seeded initializer both walk entries sequentially, which is what makes
// round-trips byte-exact and seeds reproducible.
class WeightStore {
 public:
  void add(WeightEntry entry);
  bool has(const std::string& name) const;
  const WeightEntry& get(const std::string& name) const;
  const std::vector<WeightEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  std::vector<WeightEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// How a seeded store fills each array.
enum class WeightInit {
  kHeNormal,  // N(0, sqrt(2 / fan_in)); fan_in from dims (all but the last)
  kZeros,
  kOnes,
};

struct WeightSpec {
  std::string name;
  std::vector<uint32_t> dims;
  WeightInit init = WeightInit::kHeNormal;
};

// Deterministic for a fixed seed: one mt19937_64 stream over the specs in
// order, normals via explicit Box-Muller (std::normal_distribution is not
// portable across standard libraries).
WeightStore seeded_random_weights(uint64_t seed,
                                  const std::vector<WeightSpec>& specs);

// Checks that the store carries exactly the named entries with the declared
// shapes; raises kFormat naming the first offending layer.
void validate_against(const WeightStore& store,
                      const std::vector<WeightSpec>& specs);

// File format: magic "ASLW", one version byte (=1), then little-endian
// records [name_len:u16][name:utf8][rank:u8][dims:u32 each][values:f32 each],
// terminated by a record with name_len == 0.
WeightStore read_weights(const std::string& path);
void write_weights(const WeightStore& store, const std::string& path);

}  // namespace asl

#endif
