#pragma once

#include "blowup/geometry.hpp"

#include <Eigen/Dense>

#include <vector>

namespace blowup::bubble {

using geometry::Dim;

struct BubbleParams {
  BubbleParams(Dim n, double delta);
  Dim n;
  double delta;
};

/// y = (z, t) in the closed half-space.
struct HalfSpacePoint {
  HalfSpacePoint(double t, Eigen::VectorXd z);
  double t;
  Eigen::VectorXd z;
  double r() const { return z.norm(); }
};

/// U(z,t) = ((1+t)^2 + |z|^2)^{-(n-2)/2}
double eval_U(Dim n, const HalfSpacePoint& p);
/// δ^{-(n-2)/2} U(y/δ)
double eval_U(const BubbleParams& bp, const HalfSpacePoint& p);

/// Full gradient and Hessian over (z_1..z_{n-1}, t), t last.
struct UDerivs {
  double value;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};
UDerivs eval_U_derivs(Dim n, const HalfSpacePoint& p);

/// j_b for b = 1..n: j_i = ∂U/∂z_i, j_n = (n-2)/2 U + y·∇U.
double eval_kernel(Dim n, int b, const HalfSpacePoint& p);
/// ∂_t j_b, used by the linearized boundary condition.
double eval_kernel_dt(Dim n, int b, const HalfSpacePoint& p);
/// Laplacian of j_b (closed form).
double eval_kernel_laplacian(Dim n, int b, const HalfSpacePoint& p);

struct ResidualReport {
  double max_interior = 0.0;  // max |ΔU|, scaled by |U|
  double max_boundary = 0.0;  // max |∂_t U + (n-2) U^{n/(n-2)}|
  std::size_t n_interior = 0;
  std::size_t n_boundary = 0;
  bool passed(double tol = 1e-12) const { return max_interior <= tol && max_boundary <= tol; }
};

/// Points with t > 0 feed the interior check, t == 0 the boundary check.
ResidualReport check_bubble_residual(Dim n, const std::vector<HalfSpacePoint>& samples,
                                     double delta = 1.0);

}  // namespace blowup::bubble
