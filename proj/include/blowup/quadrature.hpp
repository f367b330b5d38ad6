#pragma once

#include "blowup/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace blowup::quadrature {

using geometry::Dim;

/// Surface area of the unit m-sphere S^m ⊂ R^{m+1}.
double sphere_area(int m);

/// ∫_{S^{dim-1}} θ^α dθ for an arbitrary exponent vector (dim = ambient dimension).
double sphere_monomial(int dim, const std::vector<int>& exponents);

/// ∫_{S^{n-2}} θ^pattern dθ. Degrees above 4 are rejected.
double angular_moment(Dim n, const std::vector<int>& pattern);

/// Integrals over S^{dim-1} of products of quadratic forms θᵀAθ.
double sphere_qq(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
double sphere_qqq(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C);

/// Uniform point on S^{dim-1}.
Eigen::VectorXd sample_sphere(int dim, std::mt19937_64& rng);

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// ∫_0^∞ f(x) dx through x = u/(1-u); relative tolerance.
QuadResult integrate_half_line(const std::function<double(double)>& f, double tol,
                               int max_depth = 18);

/// ∬ f(t,r) over {t >= 0, r >= 0, (1+t)^2 + r^2 <= P^2}, both variables
/// compactified by x = u/(1-u).
QuadResult integrate_quarter_disc(const std::function<double(double, double)>& f, double P,
                                  double tol, int max_depth = 15);

/// M(p,a,b) = ∬ t^a r^{b+n-2} ((1+t)^2+r^2)^{-p} dr dt.
struct MomentKey {
  double p;
  int a;
  int b;
  auto operator<=>(const MomentKey&) const = default;
};

/// Adaptive quadrature of M(p,a,b) with an analytic tail bound folded into the
/// error. Throws DomainError when not integrable and BudgetError (carrying the
/// best estimate) when the relative tolerance cannot be met.
QuadResult moment(Dim n, const MomentKey& key, double tol);

class MomentTable {
 public:
  MomentTable(Dim n, double tol);

  Dim n() const { return n_; }
  double tol() const { return tol_; }
  /// ω_{n-2}, the area of the boundary unit sphere.
  double omega() const { return omega_; }

  const QuadResult& get(const MomentKey& key);

  // Iₖ include the angular factor ω_{n-2}.
  double I1();  // ∫ t² ((1+t)²+|z|²)^{-(n-2)}
  double I2();  // ∫ t² |z|⁴ ((1+t)²+|z|²)^{-n}
  double I3();  // ∫ t⁴ |z|² ((1+t)²+|z|²)^{-n}
  double I4();  // ∫ |z|² ((1+t)²+|z|²)^{-(n-2)}

  const std::map<MomentKey, QuadResult>& entries() const { return table_; }
  /// Rows n,p,a,b,value,error in key order.
  std::string to_csv() const;

 private:
  Dim n_;
  double tol_;
  double omega_;
  std::map<MomentKey, QuadResult> table_;
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Heavy-tailed proposal on the half-space: half-Cauchy in t, multivariate
/// Student-t in z.
struct MCProposal {
  double t_scale = 1.0;
  double z_scale = 0.5;
  double nu = 3.0;
};

using HalfSpaceIntegrand = std::function<double(double t, const Eigen::VectorXd& z)>;
/// Several integrands sharing one sample stream (common random numbers).
using HalfSpaceIntegrandVec =
    std::function<void(double t, const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> out)>;

/// Importance-sampled estimate of ∫_{R^n_+} f. Samples are drawn in batches with
/// per-batch derived seeds and merged in batch order, so results depend only on
/// (seed, n_samples) and not on the thread count (BLOWUP_THREADS).
MCEstimate mc_halfspace(Dim n, const HalfSpaceIntegrand& f, std::int64_t n_samples,
                        std::uint64_t seed, const MCProposal& proposal = {});

std::vector<MCEstimate> mc_halfspace_multi(Dim n, int n_outputs, const HalfSpaceIntegrandVec& f,
                                           std::int64_t n_samples, std::uint64_t seed,
                                           const MCProposal& proposal = {});

/// Same sampler, returning the raw weighted samples f(y)/p(y) per output
/// (row = sample); used where a nonlinear functional of several integrals is needed.
Eigen::MatrixXd mc_halfspace_samples(Dim n, int n_outputs, const HalfSpaceIntegrandVec& f,
                                     std::int64_t n_samples, std::uint64_t seed,
                                     const MCProposal& proposal = {});

/// Worker count from BLOWUP_THREADS (default 1).
int thread_count();

}  // namespace blowup::quadrature
