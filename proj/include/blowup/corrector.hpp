#pragma once

#include "blowup/geometry.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace blowup::corrector {

using geometry::CurvaturePoint;
using geometry::Dim;

/// Y(θ) = θᵀSθ on S^{n-2}, an ℓ = 2 spherical harmonic for traceless S.
struct HarmonicPattern {
  Eigen::MatrixXd S;
  int degree = 2;
  double mu = 0.0;  // ℓ(ℓ+n-3) at ℓ = 2

  static HarmonicPattern from(const CurvaturePoint& cp);
  double eval(const Eigen::VectorXd& theta) const { return theta.dot(S * theta); }
  /// ∫_{S^{n-2}} Y² = 2 ω |S|² / ((n-1)(n+1))
  double y2_integral() const;
  /// ∫_{S^{n-2}} Y
  double mean_integral() const;
};

/// Radial factor of ∂²_{ij}U = z_i z_j A + δ_ij B.
double radial_A(Dim n, double t, double r);
double radial_B(Dim n, double t, double r);

/// Right-hand side of the mode-reduced problem, t² r² A(t,r).
double reduced_source(Dim n, double t, double r);

struct ReducedRhs {
  HarmonicPattern pattern;
  Dim n;
  /// RHS(t,z) = S_ij z_i z_j t² A(t,r)
  double eval(double t, const Eigen::VectorXd& z) const;
};

ReducedRhs reduce_rhs(const CurvaturePoint& cp);

/// The bracket [1/3 R̄_ikjl z_k z_l + S_ij t²] ∂²_ij U evaluated directly.
double rhs_direct(const CurvaturePoint& cp, double t, const Eigen::VectorXd& z);

/// ∫_{R^n_+} RHS · j_b for b = 1..n (index 0 holds b = 1).
std::vector<double> check_solvability(const CurvaturePoint& cp, double tol = 1e-10);

struct GridConfig {
  int nodes = 256;          // intervals per direction
  double extent = 64.0;     // T_max = R_max
  double map_scale = 4.0;   // x = c ξ/(1-ξ)
  double residual_tol = 1e-8;  // max |Aψ - b| accepted after the sparse solve

  void validate() const;
};

/// ψ(t,r) on the tensor grid, uniform in the compactified coordinate ξ.
class Profile2D {
 public:
  Profile2D() = default;
  Profile2D(Dim n, GridConfig grid, Eigen::MatrixXd values);

  Dim n() const { return n_; }
  const GridConfig& grid() const { return grid_; }
  int size() const { return grid_.nodes + 1; }
  /// Physical coordinate of node k (same in t and r).
  double coord(int k) const;
  double xi_max() const { return xi_max_; }
  /// values(i, j) = ψ(t_i, r_j)
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }
  double far_exponent() const { return 4.0 - n_.value(); }

  struct Eval {
    double psi = 0.0, psi_t = 0.0, psi_r = 0.0, psi_tt = 0.0, psi_rr = 0.0, psi_tr = 0.0;
  };
  /// Local bicubic Lagrange interpolation in (ξ_t, ξ_r); zero outside the grid.
  Eval eval(double t, double r) const;

 private:
  Dim n_{Dim::kMinimum};
  GridConfig grid_;
  double xi_max_ = 0.0;
  double h_ = 0.0;
  Eigen::MatrixXd values_;
};

struct CorrectorDiagnostics {
  double residual = 0.0;        // max |A ψ - b| of the assembled system
  double sigma_min = 0.0;       // smallest singular value after row scaling
  double decay_exponent = 0.0;  // fitted along the t = 0 ray
  double orthogonality_mean = 0.0;  // ∫_{S^{n-2}} Y
  double orthogonality = 0.0;   // ∫_∂ U^{n/(n-2)} v_q
  double kernel_pairing_max = 0.0;  // max_b |∫ v_q j_b| from the angular structure
  double radial_pairing = 0.0;  // ∬ ψ t² r² A r^{n-2} dr dt
  double dirichlet_pairing = 0.0;  // ∫ v_q Δv_q
};

struct CorrectorSolution {
  Profile2D profile;
  HarmonicPattern pattern;
  CorrectorDiagnostics diagnostics;

  /// v_q(t, z) = ψ(t, r) Y(z/r)
  double eval(double t, const Eigen::VectorXd& z) const;
};

/// Solves the ℓ = 2 reduced profile problem (independent of S).
Profile2D solve_profile(Dim n, const GridConfig& grid, CorrectorDiagnostics* diag = nullptr,
                        bool check_conditioning = true);

CorrectorSolution solve_vq(const CurvaturePoint& cp, const GridConfig& grid = {});
/// Reuses a precomputed profile for another curvature point of the same n.
CorrectorSolution attach_pattern(const CurvaturePoint& cp, const Profile2D& profile,
                                 const CorrectorDiagnostics& base);

/// ∬ ψ t² r² A r^{n-2} over the grid (trapezoid in ξ).
double radial_pairing(const Profile2D& profile);

/// log-log slope of |ψ(0,r)| over r ∈ [lo, hi].
double fit_decay(const Profile2D& profile, double lo, double hi);

struct VerificationReport {
  bool decay_ok = false;
  bool orthogonality_ok = false;
  bool sign_ok = false;
  double decay_exponent = 0.0;
  double orthogonality = 0.0;
  double pairing = 0.0;
  bool passed() const { return decay_ok && orthogonality_ok && sign_ok; }
  std::string summary() const;
};

VerificationReport verify_corrector(const CorrectorSolution& sol);

struct ConvergenceStudy {
  std::vector<int> nodes;
  std::vector<double> pairings;
  double order_pairing = 0.0;  // from three nested grids
  double order_nodal = 0.0;    // max-norm differences on common nodes
};

ConvergenceStudy self_convergence(Dim n, const GridConfig& coarse);

/// Inversion F(y) = (y', y_n + 1)/(|y'|² + (y_n+1)²) - e_n mapping R^n_+ into
/// the ball of radius 1/2 centred at -e_n/2.
Eigen::VectorXd map_to_ball(const Eigen::VectorXd& y);
/// f_q at ξ = F(y): RHS(y) U(y)^{-(n+2)/(n-2)}.
double eval_fq(const CurvaturePoint& cp, const Eigen::VectorXd& xi);

/// CSV with columns t,r,psi and a JSON sidecar.
std::string profile_csv(const Profile2D& profile);
std::string diagnostics_json(const CorrectorSolution& sol);

}  // namespace blowup::corrector
