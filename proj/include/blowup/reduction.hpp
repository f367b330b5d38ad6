#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace blowup::reduction {

struct QPoint {
  std::string label;
  double gamma = 0.0;
  double phi = 0.0;
};

/// G(λ,q) = λγ(q)B + λ⁴φ(q) over a finite table of boundary points.
struct ReducedFunctional {
  int n = 11;
  double B = 0.0;
  std::vector<QPoint> points;

  /// Throws ValidationError on B ≤ 0, an empty table, φ > 0 or duplicate labels.
  void validate() const;
  const QPoint& at(const std::string& label) const;  // DomainError on unknown label
};

double eval_G(const ReducedFunctional& rf, double lambda, const std::string& label);
double eval_dG(const ReducedFunctional& rf, double lambda, const std::string& label);

bool admissible(const QPoint& p);

/// λ* = (-Bγ/(4φ))^{1/3}. Throws ValidationError unless γ > 0 and φ < 0.
double critical_lambda(const ReducedFunctional& rf, const std::string& label);
double critical_lambda(double B, double gamma, double phi);

struct BlowUpFamily {
  int n = 11;
  double B = 0.0;
  double lambda0 = 0.0;
  std::string q0;
  double G0 = 0.0;  // (3/4) B γ(q₀) λ₀
  double gamma0 = 0.0, phi0 = 0.0;
  std::pair<double, double> bracket{0.0, 0.0};
  std::string stability = "discrete-argmax";
  std::vector<std::string> admissible_labels;
  std::vector<std::string> excluded_labels;
};

/// Argmax of q ↦ G(λ*(q), q); ties go to the smallest label.
/// Throws ValidationError ("construction impossible") when no point is admissible.
BlowUpFamily find_blowup_point(const ReducedFunctional& rf);

struct FamilyRow {
  double epsilon = 0.0;
  double delta = 0.0;
  double peak = 0.0;
  double phi_bound = 0.0;
};

/// δ = λ₀ ε^{1/3}, peak = δ^{-(n-2)/2}, Φ-bound = c ε.
std::vector<FamilyRow> family_table(const BlowUpFamily& fam, const std::vector<double>& eps,
                                    double bound_constant = 1.0);

/// γ and φ as functions of a local parameter q ∈ R^k around q₀.
using PointData = std::function<std::pair<double, double>(const Eigen::VectorXd& q)>;

struct HessianReport {
  std::string classification;  // negative-definite, indefinite, semidefinite, inconclusive
  double lambda0 = 0.0;
  Eigen::MatrixXd hessian;       // (λ, q_1..q_k)
  double lambda_lambda = 0.0;    // finite difference
  double lambda_lambda_closed = 0.0;  // 12 λ₀² φ(q₀)
  double lambda_lambda_rel_error = 0.0;
  Eigen::VectorXd mixed;         // ∂²G/∂λ∂q_i
  Eigen::VectorXd eigenvalues;
  bool q_block_negative_definite = false;
};

/// Central finite differences with step h_lambda in λ and h in each q direction. q₀
/// must lie at least h inside [lower, upper] per coordinate, otherwise the
/// classification is "inconclusive".
HessianReport hessian_check(double B, const PointData& data, const Eigen::VectorXd& q0, double h,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                            double h_lambda = 1e-4);

/// Table-backed neighbourhood: samples on the grid q₀ + h·(offsets in {-1,0,1}^k).
struct GridSample {
  Eigen::VectorXd q;
  double gamma = 0.0;
  double phi = 0.0;
};
PointData grid_lookup(std::vector<GridSample> samples, double h);

/// {lambda0, q0, bracket, family, hessian, notes}
std::string report_json(const BlowUpFamily& fam, const std::vector<FamilyRow>& rows,
                        const HessianReport* hessian = nullptr);
/// epsilon,delta,peak,phi_bound
std::string family_csv(const std::vector<FamilyRow>& rows);
/// label,lambda,G on a geometric λ-grid around each admissible λ*.
std::string g_curves_csv(const ReducedFunctional& rf, int samples = 41);

}  // namespace blowup::reduction
