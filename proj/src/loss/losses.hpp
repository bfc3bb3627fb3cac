#ifndef ASL_LOSS_LOSSES_HPP
#define ASL_LOSS_LOSSES_HPP

#include <vector>

#include "geom/transforms.hpp"

namespace asl::loss {

struct LossParams {
  double margin_pos = 0.2;   // positive-distance hinge
  double margin_neg = 1.0;   // hardest-negative hinge
  double safe_radius = 3.0;  // Chebyshev exclusion, in feature cells
  double circle_m = 0.1;
  double circle_gamma = 512.0;
};

// Row-major descriptor table in double precision for the gradient suite.
struct DescSet {
  int n = 0, dim = 0;
  std::vector<double> v;

  static DescSet zeros(int n, int dim) { return {n, dim, std::vector<double>(static_cast<size_t>(n) * dim, 0.0)}; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * dim; }
  double* row(int i) { return v.data() + static_cast<size_t>(i) * dim; }
};

struct LossResult {
  double value = 0.0;
  bool degenerate = false;   // e.g. all detection weights zero
  int skipped_negatives = 0; // anchors with no eligible negative
};

// Descriptors at correspondence locations: a.row(i) <-> b.row(i) are
// positives; everything else is a negative candidate unless it sits within
// safe_radius (Chebyshev, feature cells) of the anchor's correspondent.
// Per pair: [D(f, f') - margin_pos]+ + [margin_neg - hardest negative]+,
// averaged over the pairs.
LossResult hardest_contrastive(const DescSet& a, const DescSet& b,
                               const std::vector<geom::Vec2>& cells_a,
                               const std::vector<geom::Vec2>& cells_b,
                               const LossParams& p);

// Same value plus d(loss)/d(descriptor entries); grad_a/grad_b are resized
// to match the descriptor tables.
LossResult hardest_contrastive_grad(const DescSet& a, const DescSet& b,
                                    const std::vector<geom::Vec2>& cells_a,
                                    const std::vector<geom::Vec2>& cells_b,
                                    const LossParams& p,
                                    std::vector<double>* grad_a,
                                    std::vector<double>* grad_b);

// Distance from the nearest hinge kink or negative-min tie; the gradient
// suite redraws points where this is tiny.
double hardest_contrastive_kink_margin(const DescSet& a, const DescSet& b,
                                       const std::vector<geom::Vec2>& cells_a,
                                       const std::vector<geom::Vec2>& cells_b,
                                       const LossParams& p);

// Circle loss on cosine similarities with Op = 1+m, On = -m, Dp = 1-m,
// Dn = m and non-negative self-paced weights; per-anchor log-sum-exp over
// the anchor's positive and its negative candidates, averaged.
LossResult circle_loss(const DescSet& a, const DescSet& b,
                       const std::vector<geom::Vec2>& cells_a,
                       const std::vector<geom::Vec2>& cells_b,
                       const LossParams& p);

LossResult circle_loss_grad(const DescSet& a, const DescSet& b,
                            const std::vector<geom::Vec2>& cells_a,
                            const std::vector<geom::Vec2>& cells_b,
                            const LossParams& p, std::vector<double>* grad_a,
                            std::vector<double>* grad_b);

double circle_kink_margin(const DescSet& a, const DescSet& b,
                          const std::vector<geom::Vec2>& cells_a,
                          const std::vector<geom::Vec2>& cells_b,
                          const LossParams& p);

// (1/|C|) sum_c (s_c s'_c / sum_q s_q s'_q) M_c, as printed: the weights are
// normalized to sum 1 and the 1/|C| factor is applied on top of them.
LossResult weighted_detection_loss(const std::vector<double>& scores_a,
                                   const std::vector<double>& scores_b,
                                   const std::vector<double>& pair_losses);

LossResult weighted_detection_loss_grad(const std::vector<double>& scores_a,
                                        const std::vector<double>& scores_b,
                                        const std::vector<double>& pair_losses,
                                        std::vector<double>* grad_sa,
                                        std::vector<double>* grad_sb,
                                        std::vector<double>* grad_m);

}  // namespace asl::loss

#endif
