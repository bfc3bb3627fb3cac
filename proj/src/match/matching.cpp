#include "match/matching.hpp"

#include <cmath>

namespace asl::match {

namespace {

struct Neighbors {
  int best = -1;
  double d1 = 0.0, d2 = 0.0;
  int count = 0;
};

double l2_distance(const float* a, const float* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Neighbors nearest_two(const detect::FeatureSet& from, size_t i,
                      const detect::FeatureSet& to) {
  Neighbors nn;
  nn.count = static_cast<int>(to.count());
  double d1 = 1e30, d2 = 1e30;
  for (size_t j = 0; j < to.count(); ++j) {
    const double d = l2_distance(from.desc(i), to.desc(j), from.desc_dim);
    if (d < d1) {
      d2 = d1;
      d1 = d;
      nn.best = static_cast<int>(j);
    } else if (d < d2) {
      d2 = d;
    }
  }
  nn.d1 = d1;
  nn.d2 = d2;
  return nn;
}

}  // namespace

MatchSet match_descriptors(const detect::FeatureSet& a,
                           const detect::FeatureSet& b,
                           const MatchOptions& opt) {
  if (opt.ratio <= 0.0f || opt.ratio > 1.0f)
    raise(ErrorKind::kInvalidArg, "ratio must be in (0, 1]");
  MatchSet out;
  if (a.count() == 0 || b.count() == 0) return out;
  if (a.desc_dim != b.desc_dim)
    raise(ErrorKind::kInvalidArg, "descriptor dimension mismatch");

  // Reverse nearest neighbors for the mutual check.
  std::vector<int> nn_of_b(b.count(), -1);
  if (opt.mutual)
    for (size_t j = 0; j < b.count(); ++j)
      nn_of_b[j] = nearest_two(b, j, a).best;

  for (size_t i = 0; i < a.count(); ++i) {
    const Neighbors nn = nearest_two(a, i, b);
    ++out.candidates;
    Match m;
    m.index_a = static_cast<int>(i);
    m.index_b = nn.best;
    m.distance = static_cast<float>(nn.d1);
    m.ratio_passed = nn.count < 2 || nn.d1 < opt.ratio * nn.d2;
    if (!m.ratio_passed) continue;
    ++out.after_ratio;
    m.mutual = !opt.mutual || nn_of_b[nn.best] == static_cast<int>(i);
    if (!m.mutual) continue;
    ++out.after_mutual;
    out.matches.push_back(m);
  }
  return out;
}

}  // namespace asl::match
