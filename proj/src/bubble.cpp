#include "blowup/bubble.hpp"

#include "blowup/errors.hpp"

#include <cmath>

namespace blowup::bubble {

BubbleParams::BubbleParams(Dim n_, double delta_) : n(n_), delta(delta_) {
  if (!(delta > 0.0)) throw DomainError("bubble: delta must be positive");
}

HalfSpacePoint::HalfSpacePoint(double t_, Eigen::VectorXd z_) : t(t_), z(std::move(z_)) {
  if (!(t >= 0.0)) throw DomainError("half-space point needs t >= 0");
}

namespace {

void check_dim(Dim n, const HalfSpacePoint& p) {
  if (p.z.size() != n.boundary()) throw StructuralError("half-space point has wrong dimension");
}

double denom(const HalfSpacePoint& p) {
  const double s = 1.0 + p.t;
  return s * s + p.z.squaredNorm();
}

// Δ(P D^{-q}) given ΔP and y'·∇P, where y' = (z, 1+t) and D = |y'|^2.
double lap_poly_times_power(int n, double P, double y_dot_gradP, double lapP, double D,
                            double q) {
  const double Dq = std::pow(D, -q);
  const double lapF = 2.0 * q * (2.0 * q + 2.0 - n) * Dq / D;
  const double cross = 2.0 * (-2.0 * q * Dq / D) * y_dot_gradP;
  return lapP * Dq + cross + P * lapF;
}

}  // namespace

double eval_U(Dim n, const HalfSpacePoint& p) {
  check_dim(n, p);
  return std::pow(denom(p), -0.5 * (n.value() - 2));
}

double eval_U(const BubbleParams& bp, const HalfSpacePoint& p) {
  const HalfSpacePoint q(p.t / bp.delta, p.z / bp.delta);
  return std::pow(bp.delta, -0.5 * (bp.n.value() - 2)) * eval_U(bp.n, q);
}

UDerivs eval_U_derivs(Dim n, const HalfSpacePoint& p) {
  check_dim(n, p);
  const int nn = n.value();
  const int m = n.boundary();
  const double D = denom(p);
  const double s = 1.0 + p.t;
  Eigen::VectorXd y(nn);
  y.head(m) = p.z;
  y(m) = s;
  const double Dn2 = std::pow(D, -0.5 * nn);
  UDerivs out;
  out.value = std::pow(D, -0.5 * (nn - 2));
  out.grad = -(nn - 2) * Dn2 * y;
  out.hess = (nn * (nn - 2) * Dn2 / D) * (y * y.transpose());
  out.hess.diagonal().array() -= (nn - 2) * Dn2;
  return out;
}

double eval_kernel(Dim n, int b, const HalfSpacePoint& p) {
  check_dim(n, p);
  const int nn = n.value();
  if (b < 1 || b > nn) throw DomainError("kernel index must lie in 1..n");
  const double D = denom(p);
  const double Dn2 = std::pow(D, -0.5 * nn);
  if (b < nn) return -(nn - 2) * p.z(b - 1) * Dn2;
  return 0.5 * (nn - 2) * (1.0 - p.t * p.t - p.z.squaredNorm()) * Dn2;
}

double eval_kernel_dt(Dim n, int b, const HalfSpacePoint& p) {
  check_dim(n, p);
  const int nn = n.value();
  if (b < 1 || b > nn) throw DomainError("kernel index must lie in 1..n");
  const double D = denom(p);
  const double s = 1.0 + p.t;
  const double Dn21 = std::pow(D, -0.5 * nn - 1.0);
  if (b < nn) return nn * (nn - 2) * p.z(b - 1) * s * Dn21;
  const double w = 1.0 - p.t * p.t - p.z.squaredNorm();
  return 0.5 * (nn - 2) * Dn21 * (-2.0 * p.t * D - nn * s * w);
}

double eval_kernel_laplacian(Dim n, int b, const HalfSpacePoint& p) {
  check_dim(n, p);
  const int nn = n.value();
  if (b < 1 || b > nn) throw DomainError("kernel index must lie in 1..n");
  const double D = denom(p);
  const double s = 1.0 + p.t;
  const double q = 0.5 * nn;
  if (b < nn) {
    const double P = -(nn - 2) * p.z(b - 1);
    return lap_poly_times_power(nn, P, P, 0.0, D, q);
  }
  // P = c (2s - s^2 - r^2) in the shifted variable s = 1 + t
  const double c = 0.5 * (nn - 2);
  const double r2 = p.z.squaredNorm();
  const double P = c * (2.0 * s - s * s - r2);
  const double ydotgrad = c * (2.0 * s - 2.0 * s * s - 2.0 * r2);
  const double lapP = -2.0 * c * nn;
  return lap_poly_times_power(nn, P, ydotgrad, lapP, D, q);
}

ResidualReport check_bubble_residual(Dim n, const std::vector<HalfSpacePoint>& samples,
                                     double delta) {
  const BubbleParams bp(n, delta);
  const int nn = n.value();
  ResidualReport rep;
  for (const auto& p : samples) {
    // derivatives of U_δ at y equal δ^{-(n-2)/2-k} times those of U at y/δ
    const HalfSpacePoint q(p.t / delta, p.z / delta);
    const UDerivs d = eval_U_derivs(n, q);
    const double amp = std::pow(delta, -0.5 * (nn - 2));
    if (p.t > 0.0) {
      const double scale2 = amp / (delta * delta);
      const double lap = scale2 * d.hess.trace();
      const double mag = scale2 * d.hess.diagonal().cwiseAbs().sum();
      rep.max_interior = std::max(rep.max_interior, std::abs(lap) / mag);
      ++rep.n_interior;
    } else {
      const double dt = amp / delta * d.grad(nn - 1);
      const double u = amp * d.value;
      const double rhs = (nn - 2) * std::pow(u, double(nn) / (nn - 2));
      rep.max_boundary = std::max(rep.max_boundary, std::abs(dt + rhs) / std::abs(dt));
      ++rep.n_boundary;
    }
  }
  return rep;
}

}  // namespace blowup::bubble
