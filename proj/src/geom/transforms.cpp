#include "geom/transforms.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace asl::geom {

Mat3 mat3_identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return r;
}

std::array<double, 3> mat3_apply(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

double mat3_det(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) -
         m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 mat3_inverse(const Mat3& m) {
  const double det = mat3_det(m);
  if (std::abs(det) < 1e-12)
    raise(ErrorKind::kNumeric, "singular 3x3 matrix");
  const double inv = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv,
          (m[1] * m[5] - m[2] * m[4]) * inv, (m[5] * m[6] - m[3] * m[8]) * inv,
          (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
          (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv,
          (m[0] * m[4] - m[1] * m[3]) * inv};
}

Mat3 mat3_transpose(const Mat3& m) {
  return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

double activate_scale(double x) { return std::exp(std::tanh(x)); }

double activate_scale_grad(double x) {
  const double t = std::tanh(x);
  return std::exp(t) * (1.0 - t * t);
}

AngleResult activate_angle(double x, double y) {
  if (x == 0.0 && y == 0.0) return {0.0, true};
  return {std::atan2(x, y), false};
}

Mat2 similarity_matrix(double scale, double angle) {
  if (scale <= 0.0) raise(ErrorKind::kInvalidArg, "similarity scale must be > 0");
  const double c = std::cos(angle), s = std::sin(angle);
  return {scale * c, scale * s, -scale * s, scale * c};
}

Mat2 residual_shape_matrix(double r11, double r21, double r22) {
  const double d11 = std::abs(1.0 + r11);
  const double d22 = std::abs(1.0 + r22);
  if (d11 < 1e-9 || d22 < 1e-9)
    raise(ErrorKind::kNumeric, "degenerate residual shape (diagonal ~ 0)");
  const double s = 1.0 / (d11 * d22);
  return {d11 * s, 0.0, r21 * s, d22};
}

Mat2 affine_matrix(double scale, double angle, double r11, double r21,
                   double r22) {
  const Mat2 sim = similarity_matrix(scale, angle);
  const Mat2 shape = residual_shape_matrix(r11, r21, r22);
  return {sim[0] * shape[0] + sim[1] * shape[2], sim[1] * shape[3],
          sim[2] * shape[0] + sim[3] * shape[2], sim[3] * shape[3]};
}

namespace {

std::array<Vec2, 4> dlt_targets(const std::array<double, 8>& offsets) {
  std::array<Vec2, 4> targets;
  for (int i = 0; i < 4; ++i) {
    targets[i] = {kDltCorners[i][0] + offsets[2 * i],
                  kDltCorners[i][1] + offsets[2 * i + 1]};
  }
  return targets;
}

// Twice the triangle area; |.| below 2e-6 counts as collinear.
double triangle_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

void check_not_collinear(const std::array<Vec2, 4>& targets) {
  static const int triples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& tr : triples) {
    const double area =
        0.5 * std::abs(triangle_area2(targets[tr[0]], targets[tr[1]], targets[tr[2]]));
    if (area <= 1e-6)
      raise(ErrorKind::kNumeric,
            "singular configuration: collinear target corners in DLT");
  }
}

struct DltSystem {
  Eigen::Matrix<double, 8, 6> M;
  Eigen::Matrix<double, 8, 1> b;
};

// Row pair per correspondence (u, v) -> (up, vp), unknowns
// (h11 h12 h21 h22 h31 h32):
//   [ 0   0  -u  -v  vp*u  vp*v ] h = -vp
//   [ u   v   0   0 -up*u -up*v ] h =  up
DltSystem build_dlt_system(const std::array<Vec2, 4>& targets) {
  DltSystem sys;
  sys.M.setZero();
  for (int i = 0; i < 4; ++i) {
    const double u = kDltCorners[i][0], v = kDltCorners[i][1];
    const double up = targets[i][0], vp = targets[i][1];
    sys.M(2 * i, 2) = -u;
    sys.M(2 * i, 3) = -v;
    sys.M(2 * i, 4) = vp * u;
    sys.M(2 * i, 5) = vp * v;
    sys.b(2 * i) = -vp;
    sys.M(2 * i + 1, 0) = u;
    sys.M(2 * i + 1, 1) = v;
    sys.M(2 * i + 1, 4) = -up * u;
    sys.M(2 * i + 1, 5) = -up * v;
    sys.b(2 * i + 1) = up;
  }
  return sys;
}

// Normal-equation solve with eigenvalue truncation as the pseudo-inverse
// fallback once the condition number passes 1e8.
struct NormalSolver {
  Eigen::Matrix<double, 6, 6> inv;  // N^-1 (or pinv of N)

  explicit NormalSolver(const Eigen::Matrix<double, 6, 6>& normal) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(normal);
    const auto& lam = eig.eigenvalues();
    const double lam_max = lam(5);
    if (lam_max <= 0.0)
      raise(ErrorKind::kNumeric, "singular configuration: DLT normal matrix");
    const bool ill = lam(0) <= 0.0 || lam_max / lam(0) > 1e8;
    Eigen::Matrix<double, 6, 1> inv_lam;
    for (int i = 0; i < 6; ++i) {
      if (ill)
        inv_lam(i) = lam(i) > lam_max * 1e-12 ? 1.0 / lam(i) : 0.0;
      else
        inv_lam(i) = 1.0 / lam(i);
    }
    inv = eig.eigenvectors() * inv_lam.asDiagonal() *
          eig.eigenvectors().transpose();
  }

  Eigen::Matrix<double, 6, 1> solve(const Eigen::Matrix<double, 6, 1>& rhs) const {
    return inv * rhs;
  }
};

Mat3 h_from_reduced(const Eigen::Matrix<double, 6, 1>& h) {
  return {h(0), h(1), 0.0, h(2), h(3), 0.0, h(4), h(5), 1.0};
}

}  // namespace

Mat3 dlt_solve(const std::array<double, 8>& corner_offsets) {
  const auto targets = dlt_targets(corner_offsets);
  check_not_collinear(targets);
  const DltSystem sys = build_dlt_system(targets);
  const NormalSolver solver(sys.M.transpose() * sys.M);
  return h_from_reduced(solver.solve(sys.M.transpose() * sys.b));
}

std::array<std::array<double, 8>, 6> dlt_solve_jacobian(
    const std::array<double, 8>& corner_offsets) {
  const auto targets = dlt_targets(corner_offsets);
  check_not_collinear(targets);
  const DltSystem sys = build_dlt_system(targets);
  const Eigen::Matrix<double, 6, 6> N = sys.M.transpose() * sys.M;
  const NormalSolver solver(N);
  const Eigen::Matrix<double, 6, 1> h = solver.solve(sys.M.transpose() * sys.b);

  std::array<std::array<double, 8>, 6> jac{};
  for (int p = 0; p < 8; ++p) {
    const int corner = p / 2;
    const bool is_dy = (p % 2) != 0;  // moves vp, else up
    const double u = kDltCorners[corner][0], v = kDltCorners[corner][1];

    Eigen::Matrix<double, 8, 6> dM = Eigen::Matrix<double, 8, 6>::Zero();
    Eigen::Matrix<double, 8, 1> db = Eigen::Matrix<double, 8, 1>::Zero();
    if (is_dy) {
      dM(2 * corner, 4) = u;
      dM(2 * corner, 5) = v;
      db(2 * corner) = -1.0;
    } else {
      dM(2 * corner + 1, 4) = -u;
      dM(2 * corner + 1, 5) = -v;
      db(2 * corner + 1) = 1.0;
    }

    const Eigen::Matrix<double, 6, 6> dN =
        dM.transpose() * sys.M + sys.M.transpose() * dM;
    const Eigen::Matrix<double, 6, 1> dg =
        dM.transpose() * sys.b + sys.M.transpose() * db;
    const Eigen::Matrix<double, 6, 1> dh = solver.solve(dg - dN * h);
    for (int r = 0; r < 6; ++r) jac[r][p] = dh(r);
  }
  return jac;
}

std::vector<Vec2> kernel_grid(int k) {
  if (k < 1 || k % 2 == 0)
    raise(ErrorKind::kInvalidArg, "kernel size must be odd and positive");
  const int r = (k - 1) / 2;
  std::vector<Vec2> grid;
  grid.reserve(static_cast<size_t>(k) * k);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      grid.push_back({static_cast<double>(dx), static_cast<double>(dy)});
  return grid;
}

namespace {

std::vector<double> offsets_from_mat2(const Mat2& m, int k) {
  const auto grid = kernel_grid(k);
  std::vector<double> out(grid.size() * 2);
  for (size_t n = 0; n < grid.size(); ++n) {
    const Vec2 q = mat2_apply(m, grid[n]);
    out[2 * n] = q[0] - grid[n][0];
    out[2 * n + 1] = q[1] - grid[n][1];
  }
  return out;
}

struct ProjectedPoint {
  double x, y;      // mapped coordinates
  double num_x, num_y, den;
};

ProjectedPoint project(const Mat3& h, const Vec2& p) {
  const double den = h[6] * p[0] + h[7] * p[1] + 1.0;
  if (std::abs(den) < 1e-8)
    raise(ErrorKind::kNumeric, "singular projection in offset generation");
  const double num_x = h[0] * p[0] + h[1] * p[1];
  const double num_y = h[3] * p[0] + h[4] * p[1];
  return {num_x / den, num_y / den, num_x, num_y, den};
}

}  // namespace

std::vector<double> offsets_from_transform(const LocalTransform& t, int k) {
  if (const auto* f = std::get_if<FreeForm>(&t)) {
    if (f->offsets.size() != static_cast<size_t>(2 * k * k))
      raise(ErrorKind::kInvalidArg, "free-form offset count mismatch");
    return f->offsets;
  }
  if (const auto* s = std::get_if<Similarity>(&t))
    return offsets_from_mat2(similarity_matrix(s->scale, s->angle), k);
  if (const auto* a = std::get_if<Affine>(&t))
    return offsets_from_mat2(
        affine_matrix(a->scale, a->angle, a->r11, a->r21, a->r22), k);

  const auto& h = std::get<Homography>(t);
  const Mat3 H = dlt_solve(h.corner_offsets);
  const auto grid = kernel_grid(k);
  std::vector<double> out(grid.size() * 2);
  for (size_t n = 0; n < grid.size(); ++n) {
    const ProjectedPoint q = project(H, grid[n]);
    out[2 * n] = q.x - grid[n][0];
    out[2 * n + 1] = q.y - grid[n][1];
  }
  return out;
}

std::array<Mat2, 2> similarity_jacobian(double scale, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {Mat2{c, s, -s, c},
          Mat2{-scale * s, scale * c, -scale * c, -scale * s}};
}

std::array<Mat2, 5> affine_jacobian(double scale, double angle, double r11,
                                    double r21, double r22) {
  const Mat2 shape = residual_shape_matrix(r11, r21, r22);
  const Mat2 sim = similarity_matrix(scale, angle);
  const auto sim_jac = similarity_jacobian(scale, angle);

  // Residuals stay in (-1, 1), so 1 + r > 0 and the |.| terms are identities.
  const double d11 = 1.0 + r11, d22 = 1.0 + r22;
  const Mat2 dshape_dr11 = {0.0, 0.0, -r21 / (d11 * d11 * d22), 0.0};
  const Mat2 dshape_dr21 = {0.0, 0.0, 1.0 / (d11 * d22), 0.0};
  const Mat2 dshape_dr22 = {-1.0 / (d22 * d22), 0.0, -r21 / (d11 * d22 * d22),
                            1.0};

  auto mul = [](const Mat2& a, const Mat2& b) -> Mat2 {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
  };
  return {mul(sim_jac[0], shape), mul(sim_jac[1], shape), mul(sim, dshape_dr11),
          mul(sim, dshape_dr21), mul(sim, dshape_dr22)};
}

std::vector<std::vector<double>> offsets_jacobian(const LocalTransform& t,
                                                  int k) {
  const auto grid = kernel_grid(k);
  const size_t rows = grid.size() * 2;

  auto from_mat2_jacs = [&](const auto& mat_jacs) {
    std::vector<std::vector<double>> jac(rows,
                                         std::vector<double>(mat_jacs.size()));
    for (size_t n = 0; n < grid.size(); ++n) {
      for (size_t p = 0; p < mat_jacs.size(); ++p) {
        const Vec2 d = mat2_apply(mat_jacs[p], grid[n]);
        jac[2 * n][p] = d[0];
        jac[2 * n + 1][p] = d[1];
      }
    }
    return jac;
  };

  if (std::holds_alternative<FreeForm>(t))
    raise(ErrorKind::kInvalidArg,
          "free-form offsets have no transform parameters");
  if (const auto* s = std::get_if<Similarity>(&t))
    return from_mat2_jacs(similarity_jacobian(s->scale, s->angle));
  if (const auto* a = std::get_if<Affine>(&t))
    return from_mat2_jacs(
        affine_jacobian(a->scale, a->angle, a->r11, a->r21, a->r22));

  const auto& hvar = std::get<Homography>(t);
  const Mat3 H = dlt_solve(hvar.corner_offsets);
  const auto dh = dlt_solve_jacobian(hvar.corner_offsets);  // 6x8

  std::vector<std::vector<double>> jac(rows, std::vector<double>(8, 0.0));
  for (size_t n = 0; n < grid.size(); ++n) {
    const Vec2 p = grid[n];
    const ProjectedPoint q = project(H, p);
    // d(mapped)/d(hhat) rows, hhat = (h11 h12 h21 h22 h31 h32).
    const double w = q.den, w2 = w * w;
    const double dx_dh[6] = {p[0] / w, p[1] / w, 0.0, 0.0,
                             -q.num_x * p[0] / w2, -q.num_x * p[1] / w2};
    const double dy_dh[6] = {0.0, 0.0, p[0] / w, p[1] / w,
                             -q.num_y * p[0] / w2, -q.num_y * p[1] / w2};
    for (int col = 0; col < 8; ++col) {
      double gx = 0.0, gy = 0.0;
      for (int r = 0; r < 6; ++r) {
        gx += dx_dh[r] * dh[r][col];
        gy += dy_dh[r] * dh[r][col];
      }
      jac[2 * n][col] = gx;
      jac[2 * n + 1][col] = gy;
    }
  }
  return jac;
}

}  // namespace asl::geom
