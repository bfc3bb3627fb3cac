#ifndef ASL_GEOM_TRANSFORMS_HPP
#define ASL_GEOM_TRANSFORMS_HPP

#include <array>
#include <variant>
#include <vector>

#include "core/error.hpp"

namespace asl::geom {

// Row-major fixed-size matrices. Everything in this module runs in double:
// the parameters are tiny and the Jacobians are held to finite-difference
// tolerances the f32 path cannot meet.
using Mat2 = std::array<double, 4>;
using Mat3 = std::array<double, 9>;
using Vec2 = std::array<double, 2>;

inline Vec2 mat2_apply(const Mat2& m, const Vec2& p) {
  return {m[0] * p[0] + m[1] * p[1], m[2] * p[0] + m[3] * p[1]};
}
inline double mat2_det(const Mat2& m) { return m[0] * m[3] - m[1] * m[2]; }

Mat3 mat3_identity();
Mat3 mat3_mul(const Mat3& a, const Mat3& b);
std::array<double, 3> mat3_apply(const Mat3& m, const std::array<double, 3>& v);
double mat3_det(const Mat3& m);
Mat3 mat3_inverse(const Mat3& m);  // kNumeric on |det| < 1e-12
Mat3 mat3_transpose(const Mat3& m);

// Local deformation parameterizations. FreeForm carries raw per-tap offsets
// (already in sampling units); the constrained variants are expanded through
// offsets_from_transform.
struct FreeForm {
  std::vector<double> offsets;  // 2*k*k, (dx, dy) per tap
};
struct Similarity {
  double scale = 1.0;   // > 0
  double angle = 0.0;   // radians
};
struct Affine {
  double scale = 1.0;
  double angle = 0.0;
  double r11 = 0.0, r21 = 0.0, r22 = 0.0;  // residual shape, in (-1, 1)
};
struct Homography {
  std::array<double, 8> corner_offsets{};  // (dx, dy) per corner, in (-1, 1)
};
using LocalTransform = std::variant<FreeForm, Similarity, Affine, Homography>;

// scale(x) = exp(tanh(x)), bounded to [1/e, e].
double activate_scale(double x);
double activate_scale_grad(double x);

// angle(x, y) = atan2(x, y); (0, 0) resolves to 0 and sets the flag.
struct AngleResult {
  double theta = 0.0;
  bool degenerate = false;
};
AngleResult activate_angle(double x, double y);

// S = scale * [[cos, sin], [-sin, cos]].
Mat2 similarity_matrix(double scale, double angle);

// A = S * A' with the residual-shape normalization that pins det(A') = 1,
// so det(A) = scale^2. Residuals live in (-1, 1); the diagonal terms use
// |1 + r|, which is smooth on that open interval.
Mat2 affine_matrix(double scale, double angle, double r11, double r21,
                   double r22);
Mat2 residual_shape_matrix(double r11, double r21, double r22);

// Source corners for the 4-point parameterization.
constexpr std::array<Vec2, 4> kDltCorners = {
    Vec2{-1.0, -1.0}, Vec2{1.0, -1.0}, Vec2{1.0, 1.0}, Vec2{-1.0, 1.0}};

// Solves the reduced homography with H13 = H23 = 0, H33 = 1 from the four
// corner->corner+offset correspondences, via normal equations on the stacked
// 8x6 system (pseudo-inverse fallback above condition 1e8). Raises kNumeric
// when any three target corners are (near-)collinear.
Mat3 dlt_solve(const std::array<double, 8>& corner_offsets);

// d(hhat)/d(corner_offsets): 6x8, rows ordered (h11 h12 h21 h22 h31 h32),
// columns (dx0 dy0 ... dx3 dy3). Differentiates the solve with
// dh = N^-1 (dg - dN h) around the normal equations.
std::array<std::array<double, 8>, 6> dlt_solve_jacobian(
    const std::array<double, 8>& corner_offsets);

// Grid taps for an odd kernel size k, row-major over (dy, dx).
std::vector<Vec2> kernel_grid(int k);

// The tap displacements induced by a transform: delta_n = T p_n - p_n, with
// projective division for the homography variant. Output is 2*k*k doubles,
// (dx, dy) per tap. FreeForm passes through unchanged.
std::vector<double> offsets_from_transform(const LocalTransform& t, int k);

// d(offsets)/d(raw parameters) for the constrained variants, with parameter
// order: Similarity (scale, angle); Affine (scale, angle, r11, r21, r22);
// Homography (the 8 corner offsets). Rows follow the offset layout.
std::vector<std::vector<double>> offsets_jacobian(const LocalTransform& t,
                                                  int k);

// d(matrix entries)/d(params) as flattened row-major Mat2 per parameter.
std::array<Mat2, 2> similarity_jacobian(double scale, double angle);
std::array<Mat2, 5> affine_jacobian(double scale, double angle, double r11,
                                    double r21, double r22);

}  // namespace asl::geom

#endif
