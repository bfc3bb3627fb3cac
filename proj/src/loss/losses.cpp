#include "loss/losses.hpp"

#include <cmath>

namespace asl::loss {

namespace {

double chebyshev(const geom::Vec2& a, const geom::Vec2& b) {
  return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

double euclid(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double dot(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) acc += a[i] * b[i];
  return acc;
}

struct NegativeRef {
  bool from_b = true;  // true: (f_c, f'_k); false: (f_k, f'_c)
  int k = -1;
};

struct Candidates {
  std::vector<NegativeRef> refs;
};

void validate_inputs(const DescSet& a, const DescSet& b,
                     const std::vector<geom::Vec2>& cells_a,
                     const std::vector<geom::Vec2>& cells_b) {
  if (a.n != b.n || a.dim != b.dim)
    raise(ErrorKind::kInvalidArg, "descriptor tables must be congruent");
  if (a.n < 2) raise(ErrorKind::kInvalidArg, "need at least 2 correspondences");
  if (cells_a.size() != static_cast<size_t>(a.n) ||
      cells_b.size() != static_cast<size_t>(b.n))
    raise(ErrorKind::kInvalidArg, "cell position count mismatch");
}

Candidates negatives_for(int c, const std::vector<geom::Vec2>& cells_a,
                         const std::vector<geom::Vec2>& cells_b, int n,
                         double safe_radius) {
  Candidates out;
  for (int k = 0; k < n; ++k) {
    if (k == c) continue;
    if (chebyshev(cells_b[k], cells_b[c]) > safe_radius)
      out.refs.push_back({true, k});
    if (chebyshev(cells_a[k], cells_a[c]) > safe_radius)
      out.refs.push_back({false, k});
  }
  return out;
}

double negative_distance(const DescSet& a, const DescSet& b, int c,
                         const NegativeRef& ref) {
  return ref.from_b ? euclid(a.row(c), b.row(ref.k), a.dim)
                    : euclid(a.row(ref.k), b.row(c), a.dim);
}

double negative_similarity(const DescSet& a, const DescSet& b, int c,
                           const NegativeRef& ref) {
  return ref.from_b ? dot(a.row(c), b.row(ref.k), a.dim)
                    : dot(a.row(ref.k), b.row(c), a.dim);
}

// grad += scale * d(D(x, y))/dx accumulated into gx, and the mirror into gy.
void add_distance_grad(const double* x, const double* y, int dim, double d,
                       double scale, double* gx, double* gy) {
  if (d < 1e-12) return;  // kink at zero distance; callers stay away
  const double s = scale / d;
  for (int i = 0; i < dim; ++i) {
    const double diff = (x[i] - y[i]) * s;
    gx[i] += diff;
    gy[i] -= diff;
  }
}

}  // namespace

LossResult hardest_contrastive_grad(const DescSet& a, const DescSet& b,
                                    const std::vector<geom::Vec2>& cells_a,
                                    const std::vector<geom::Vec2>& cells_b,
                                    const LossParams& p,
                                    std::vector<double>* grad_a,
                                    std::vector<double>* grad_b) {
  validate_inputs(a, b, cells_a, cells_b);
  if (grad_a) grad_a->assign(a.v.size(), 0.0);
  if (grad_b) grad_b->assign(b.v.size(), 0.0);

  LossResult res;
  const double inv_n = 1.0 / a.n;
  for (int c = 0; c < a.n; ++c) {
    const double pos = euclid(a.row(c), b.row(c), a.dim);
    if (pos > p.margin_pos) {
      res.value += (pos - p.margin_pos) * inv_n;
      if (grad_a)
        add_distance_grad(a.row(c), b.row(c), a.dim, pos, inv_n,
                          grad_a->data() + static_cast<size_t>(c) * a.dim,
                          grad_b->data() + static_cast<size_t>(c) * a.dim);
    }

    const Candidates cands = negatives_for(c, cells_a, cells_b, a.n, p.safe_radius);
    if (cands.refs.empty()) {
      ++res.skipped_negatives;
      continue;
    }
    double hardest = 1e30;
    NegativeRef best;
    for (const NegativeRef& ref : cands.refs) {
      const double d = negative_distance(a, b, c, ref);
      if (d < hardest) {
        hardest = d;
        best = ref;
      }
    }
    if (hardest < p.margin_neg) {
      res.value += (p.margin_neg - hardest) * inv_n;
      if (grad_a) {
        if (best.from_b)
          add_distance_grad(a.row(c), b.row(best.k), a.dim, hardest, -inv_n,
                            grad_a->data() + static_cast<size_t>(c) * a.dim,
                            grad_b->data() + static_cast<size_t>(best.k) * a.dim);
        else
          add_distance_grad(a.row(best.k), b.row(c), a.dim, hardest, -inv_n,
                            grad_a->data() + static_cast<size_t>(best.k) * a.dim,
                            grad_b->data() + static_cast<size_t>(c) * a.dim);
      }
    }
  }
  return res;
}

LossResult hardest_contrastive(const DescSet& a, const DescSet& b,
                               const std::vector<geom::Vec2>& cells_a,
                               const std::vector<geom::Vec2>& cells_b,
                               const LossParams& p) {
  return hardest_contrastive_grad(a, b, cells_a, cells_b, p, nullptr, nullptr);
}

double hardest_contrastive_kink_margin(const DescSet& a, const DescSet& b,
                                       const std::vector<geom::Vec2>& cells_a,
                                       const std::vector<geom::Vec2>& cells_b,
                                       const LossParams& p) {
  validate_inputs(a, b, cells_a, cells_b);
  double margin = 1e30;
  for (int c = 0; c < a.n; ++c) {
    const double pos = euclid(a.row(c), b.row(c), a.dim);
    margin = std::min(margin, std::abs(pos - p.margin_pos));
    margin = std::min(margin, pos);  // sqrt kink at zero distance
    const Candidates cands = negatives_for(c, cells_a, cells_b, a.n, p.safe_radius);
    if (cands.refs.empty()) continue;
    double d1 = 1e30, d2 = 1e30;
    for (const NegativeRef& ref : cands.refs) {
      const double d = negative_distance(a, b, c, ref);
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else {
        d2 = std::min(d2, d);
      }
    }
    margin = std::min(margin, std::abs(p.margin_neg - d1));
    if (d2 < 1e29) margin = std::min(margin, d2 - d1);  // min switch
  }
  return margin;
}

LossResult circle_loss_grad(const DescSet& a, const DescSet& b,
                            const std::vector<geom::Vec2>& cells_a,
                            const std::vector<geom::Vec2>& cells_b,
                            const LossParams& p, std::vector<double>* grad_a,
                            std::vector<double>* grad_b) {
  validate_inputs(a, b, cells_a, cells_b);
  if (grad_a) grad_a->assign(a.v.size(), 0.0);
  if (grad_b) grad_b->assign(b.v.size(), 0.0);

  const double m = p.circle_m, gamma = p.circle_gamma;
  const double op = 1.0 + m, on = -m, dp = 1.0 - m, dn = m;

  LossResult res;
  const double inv_n = 1.0 / a.n;
  for (int c = 0; c < a.n; ++c) {
    const double sp = dot(a.row(c), b.row(c), a.dim);
    const double alpha_p = std::max(0.0, op - sp);
    const double ep = -gamma * alpha_p * (sp - dp);

    const Candidates cands = negatives_for(c, cells_a, cells_b, a.n, p.safe_radius);
    if (cands.refs.empty()) {
      ++res.skipped_negatives;
      continue;  // log(1 + 0) = 0
    }

    // loss_c = logsumexp(0, {en_k + ep}) with the stable max shift.
    std::vector<double> z(cands.refs.size());
    std::vector<double> sn(cands.refs.size());
    double zmax = 0.0;
    for (size_t k = 0; k < cands.refs.size(); ++k) {
      sn[k] = negative_similarity(a, b, c, cands.refs[k]);
      const double alpha_n = std::max(0.0, sn[k] - on);
      z[k] = gamma * alpha_n * (sn[k] - dn) + ep;
      zmax = std::max(zmax, z[k]);
    }
    double sum = std::exp(0.0 - zmax);
    for (double zc : z) sum += std::exp(zc - zmax);
    const double loss_c = zmax + std::log(sum);
    res.value += loss_c * inv_n;

    if (!grad_a) continue;
    const double dep_dsp = alpha_p > 0.0 ? gamma * (2.0 * sp - op - dp) : 0.0;
    double weight_sum = 0.0;
    for (size_t k = 0; k < cands.refs.size(); ++k) {
      const double w = std::exp(z[k] - loss_c);
      weight_sum += w;
      const double alpha_n = std::max(0.0, sn[k] - on);
      const double den_dsn = alpha_n > 0.0 ? gamma * (2.0 * sn[k] - on - dn) : 0.0;
      const double scale = w * den_dsn * inv_n;
      if (scale == 0.0) continue;
      const NegativeRef& ref = cands.refs[k];
      const double* xa = ref.from_b ? a.row(c) : a.row(ref.k);
      const double* xb = ref.from_b ? b.row(ref.k) : b.row(c);
      double* ga = grad_a->data() +
                   static_cast<size_t>(ref.from_b ? c : ref.k) * a.dim;
      double* gb = grad_b->data() +
                   static_cast<size_t>(ref.from_b ? ref.k : c) * a.dim;
      for (int i = 0; i < a.dim; ++i) {
        ga[i] += scale * xb[i];
        gb[i] += scale * xa[i];
      }
    }
    const double pscale = weight_sum * dep_dsp * inv_n;
    if (pscale != 0.0) {
      double* ga = grad_a->data() + static_cast<size_t>(c) * a.dim;
      double* gb = grad_b->data() + static_cast<size_t>(c) * a.dim;
      for (int i = 0; i < a.dim; ++i) {
        ga[i] += pscale * b.row(c)[i];
        gb[i] += pscale * a.row(c)[i];
      }
    }
  }
  return res;
}

LossResult circle_loss(const DescSet& a, const DescSet& b,
                       const std::vector<geom::Vec2>& cells_a,
                       const std::vector<geom::Vec2>& cells_b,
                       const LossParams& p) {
  return circle_loss_grad(a, b, cells_a, cells_b, p, nullptr, nullptr);
}

double circle_kink_margin(const DescSet& a, const DescSet& b,
                          const std::vector<geom::Vec2>& cells_a,
                          const std::vector<geom::Vec2>& cells_b,
                          const LossParams& p) {
  validate_inputs(a, b, cells_a, cells_b);
  const double op = 1.0 + p.circle_m, on = -p.circle_m;
  double margin = 1e30;
  for (int c = 0; c < a.n; ++c) {
    margin = std::min(margin, std::abs(op - dot(a.row(c), b.row(c), a.dim)));
    const Candidates cands = negatives_for(c, cells_a, cells_b, a.n, p.safe_radius);
    for (const NegativeRef& ref : cands.refs)
      margin = std::min(margin,
                        std::abs(negative_similarity(a, b, c, ref) - on));
  }
  return margin;
}

LossResult weighted_detection_loss_grad(const std::vector<double>& scores_a,
                                        const std::vector<double>& scores_b,
                                        const std::vector<double>& pair_losses,
                                        std::vector<double>* grad_sa,
                                        std::vector<double>* grad_sb,
                                        std::vector<double>* grad_m) {
  const size_t n = scores_a.size();
  if (n == 0 || scores_b.size() != n || pair_losses.size() != n)
    raise(ErrorKind::kInvalidArg, "score/loss arrays must be congruent");

  double total = 0.0, weighted = 0.0;
  for (size_t c = 0; c < n; ++c) {
    const double prod = scores_a[c] * scores_b[c];
    total += prod;
    weighted += prod * pair_losses[c];
  }

  LossResult res;
  if (total <= 0.0) {
    res.degenerate = true;
    return res;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  res.value = inv_n * weighted / total;

  if (grad_sa) {
    grad_sa->assign(n, 0.0);
    grad_sb->assign(n, 0.0);
    grad_m->assign(n, 0.0);
    for (size_t c = 0; c < n; ++c) {
      const double prod = scores_a[c] * scores_b[c];
      (*grad_m)[c] = inv_n * prod / total;
      const double common =
          inv_n * (pair_losses[c] * total - weighted) / (total * total);
      (*grad_sa)[c] = scores_b[c] * common;
      (*grad_sb)[c] = scores_a[c] * common;
    }
  }
  return res;
}

LossResult weighted_detection_loss(const std::vector<double>& scores_a,
                                   const std::vector<double>& scores_b,
                                   const std::vector<double>& pair_losses) {
  return weighted_detection_loss_grad(scores_a, scores_b, pair_losses, nullptr,
                                      nullptr, nullptr);
}

}  // namespace asl::loss
