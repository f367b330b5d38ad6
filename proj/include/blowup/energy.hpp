#pragma once

#include "blowup/corrector.hpp"
#include "blowup/geometry.hpp"
#include "blowup/quadrature.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace blowup::energy {

using geometry::CurvaturePoint;
using geometry::Dim;

/// A = ½∫|∇U|² - (n-2)²/(2(n-1)) ∫_∂ U^{2(n-1)/(n-2)}
struct ATerms {
  double A = 0.0;
  double gradient_integral = 0.0;  // ∫_{R^n_+} |∇U|²
  double boundary_integral = 0.0;  // ∫_{R^{n-1}} U(0,z)^{2(n-1)/(n-2)}
  double error = 0.0;
};

ATerms compute_A(Dim n, double tol = 1e-11);
/// B = ½ ∫ U(0,z)² dz (needs n ≥ 5).
double compute_B(Dim n, double tol = 1e-12);

struct GTerms {
  double G1 = 0.0, G2 = 0.0, G3 = 0.0;
};
GTerms compute_G_terms(const CurvaturePoint& cp, double I2);

enum class WeylDenominator { Lemma, Proof };  // 96(n-1) or 96(n-1)²

struct PhiOptions {
  WeylDenominator weyl_denominator = WeylDenominator::Proof;
  /// φ may exceed 0 by at most tol·(sum of |summands|) before it is rejected.
  double sign_tol = 1e-10;
};

struct ReducedCoefficients {
  std::string label;
  int n = 0;
  double A = 0.0, B = 0.0, I2 = 0.0, I4 = 0.0;
  double G2 = 0.0, G3 = 0.0;
  double pairing = 0.0;  // ∫ v_q Δ v_q
  double phi = 0.0;
  // summands of φ
  double phi_pairing = 0.0, phi_normal = 0.0, phi_weyl = 0.0;
  double slope_residual = std::numeric_limits<double>::quiet_NaN();
  double slope_identity = std::numeric_limits<double>::quiet_NaN();
};

/// Throws ValidationError when φ comes out positive beyond tolerance.
ReducedCoefficients compute_phi(const CurvaturePoint& cp, const corrector::CorrectorSolution& sol,
                                quadrature::MomentTable& moments, const PhiOptions& opt = {});

/// Smooth radial cutoff: 1 for s ≤ R/2, 0 for s ≥ R.
struct Cutoff {
  double radius = 1.0;
  double value(double s) const;
  double d1(double s) const;
  double d2(double s) const;
};

std::vector<double> default_delta_ladder();

struct SlopeExperiment {
  std::string name;
  std::vector<double> delta;
  std::vector<double> value;
  std::vector<double> error;  // standard error per point (0 for quadrature)
  double slope = 0.0;
  double slope_stderr = 0.0;
  double band_low() const { return slope - 2.0 * slope_stderr; }
  double band_high() const { return slope + 2.0 * slope_stderr; }
  std::string status = "ok";  // ok, degenerate
  std::vector<std::pair<std::string, double>> extra;
};

/// Least-squares log-log slope with its standard error.
void fit_slope(SlopeExperiment& e);

struct IdentityOptions {
  std::vector<double> delta = default_delta_ladder();
  double cutoff_radius = 1.0;
};

struct IdentityResult {
  SlopeExperiment remainder;  // |A4+L2+L3 - δ⁴ c4| against δ
  double c4 = 0.0;            // δ⁴ coefficient of A4+L2+L3
  double half_pairing = 0.0;  // ½ ∫ v_q Δ v_q from the solver
  double relative_gap = 0.0;  // |c4 - ½ pairing| / |½ pairing|
  // pieces of c4
  double c4_A4 = 0.0, c4_L2 = 0.0, c4_L3 = 0.0;
  bool passed() const;
};

/// A4 + L2 + L3 on a δ-ladder, exact through O(δ⁶) in the metric expansion.
IdentityResult verify_A4_L2_L3_identity(const CurvaturePoint& cp, const geometry::MetricJet& jet,
                                        const corrector::CorrectorSolution& sol,
                                        const IdentityOptions& opt = {});

/// 0.001·32^{k/5}, k = 0..5: below the range where the cutoff terms (order δ^{(n-2)/2}) compete.
std::vector<double> residual_delta_ladder();

struct ResidualOptions {
  std::vector<double> delta = residual_delta_ladder();
  double cutoff_radius = 1.0;
  std::int64_t samples = 200000;
  std::uint64_t seed = 1;
  double epsilon_scale = 1.0;  // λ in ε = (δ/λ)³ for the combined bound
  double max_rel_error = 0.05;  // per-point relative standard error budget
  quadrature::MCProposal proposal{1.0, 1.0, 3.0};
};

struct ResidualResult {
  SlopeExperiment full;        // ‖Δ_g(W + δ²V)‖
  SlopeExperiment without_v;   // ‖Δ_g W‖
  SlopeExperiment second_order;  // ‖δ² G₂:∂²(Uχ)‖
  SlopeExperiment corrector_term;  // ‖δ² Δ(vχ)‖
  SlopeExperiment cancelled;   // ‖second_order + corrector_term‖
  SlopeExperiment combined;    // full + ε γ δ ‖U(0,·)‖ with ε = (δ/λ)³
  bool passed() const;
};

/// Importance-sampled L^{2n/(n+2)} norms on a δ-ladder with common random numbers.
/// Throws BudgetError when a point's relative standard error exceeds the budget.
ResidualResult residual_slope(const CurvaturePoint& cp, const geometry::MetricJet& jet,
                              const corrector::CorrectorSolution& sol,
                              const ResidualOptions& opt = {});

/// label,n,A,B,I2,I4,pairing,G2,G3,phi,slope_residual,slope_identity
std::string results_csv(const std::vector<ReducedCoefficients>& rows);

}  // namespace blowup::energy
