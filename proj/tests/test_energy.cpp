#include "blowup/corrector.hpp"
#include "blowup/energy.hpp"
#include "blowup/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace blowup;
using namespace blowup::energy;
using geometry::CurvaturePoint;
using geometry::Dim;
using geometry::generate_sample;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const corrector::CorrectorSolution& base_solution(int n) {
  static std::map<int, corrector::CorrectorSolution> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, corrector::solve_vq(CurvaturePoint::zero(Dim(n)))).first;
  return it->second;
}

corrector::CorrectorSolution solution(const CurvaturePoint& cp) {
  const auto& b = base_solution(cp.n.value());
  return corrector::attach_pattern(cp, b.profile, b.diagnostics);
}

}  // namespace

TEST(A, BetaOracles) {
  for (int nn = 11; nn <= 15; ++nn) {
    const ATerms a = compute_A(Dim(nn));
    const double w = quadrature::sphere_area(nn - 2);
    const double h = 0.5 * (nn - 1);
    // ∫|∇U|² = (n-2)² ω ∬ r^{n-2} D^{-(n-1)}
    const double grad = (nn - 2.0) * (nn - 2.0) * w * 0.5 * std::beta(h, nn - 1 - h) * std::beta(1.0, nn - 2.0);
    const double bnd = w * 0.5 * std::beta(h, h);
    EXPECT_LE(rel(a.gradient_integral, grad), 1e-8);
    EXPECT_LE(rel(a.boundary_integral, bnd), 1e-8);
    const double A = 0.5 * grad - (nn - 2.0) * (nn - 2.0) / (2.0 * (nn - 1)) * bnd;
    EXPECT_LE(rel(a.A, A), 1e-8);
    EXPECT_GT(a.gradient_integral, 0.0);
    EXPECT_GT(a.boundary_integral, 0.0);
    // integration by parts and the resulting closed form
    EXPECT_LE(rel(a.gradient_integral, (nn - 2.0) * a.boundary_integral), 1e-8);
    EXPECT_LE(rel(a.A, (nn - 2.0) / (2.0 * (nn - 1)) * a.boundary_integral), 1e-8);
    EXPECT_GT(a.A, 0.0);
  }
}

TEST(B, BetaOracle) {
  for (int nn = 11; nn <= 15; ++nn) {
    const double w = quadrature::sphere_area(nn - 2);
    const double exact = 0.5 * w * 0.5 * std::beta(0.5 * (nn - 1), 0.5 * (nn - 3));
    const double B = compute_B(Dim(nn));
    EXPECT_GT(B, 0.0);
    EXPECT_LE(rel(B, exact), 1e-8);
    EXPECT_LE(rel(compute_B(Dim(nn), 1e-13), B), 1e-10);
  }
  EXPECT_THROW(compute_A(Dim(11), 1e-30), BudgetError);
}

TEST(G, ZeroCurvature) {
  const GTerms g = compute_G_terms(CurvaturePoint::zero(Dim(11)), 1.0);
  EXPECT_EQ(g.G1, 0.0);
  EXPECT_EQ(g.G2, 0.0);
  EXPECT_EQ(g.G3, 0.0);
}

TEST(G, AgainstMonteCarloOfDefiningIntegrals) {
  for (int nn : {11, 13}) {
    const CurvaturePoint cp = generate_sample(Dim(nn), 31 + nn, 1.0);
    const geometry::MetricJet jet = geometry::generate_jet(cp, 5, 1.0);
    quadrature::MomentTable mt(cp.n, 1e-10);
    const GTerms g = compute_G_terms(cp, mt.I2());
    EXPECT_GT(g.G3, 0.0);
    const oracle::GEstimate mc = oracle::g_terms_mc(cp, jet, 300000, 77);
    EXPECT_LE(std::abs(mc.G2.mean - g.G2), 3 * mc.G2.std_error) << mc.G2.mean << " vs " << g.G2;
    EXPECT_LE(std::abs(mc.G3.mean - g.G3), 3 * mc.G3.std_error) << mc.G3.mean << " vs " << g.G3;
    // the oracle resolves the terms, not just noise
    EXPECT_LT(mc.G3.std_error, 0.05 * g.G3);
  }
}

TEST(Phi, ZeroCurvatureIsZero) {
  const CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  quadrature::MomentTable mt(cp.n, 1e-10);
  const ReducedCoefficients rc = compute_phi(cp, solution(cp), mt);
  EXPECT_EQ(rc.phi, 0.0);
  EXPECT_GT(rc.B, 0.0);
  EXPECT_GT(rc.A, 0.0);
}

TEST(Phi, WeylOnly) {
  CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  cp.Wbar2 = 3.0;
  quadrature::MomentTable mt(cp.n, 1e-10);
  const ReducedCoefficients proof = compute_phi(cp, solution(cp), mt);
  EXPECT_LT(proof.phi, 0.0);
  EXPECT_DOUBLE_EQ(proof.phi, -9.0 / (96.0 * 100.0) * 3.0 * mt.I4());
  const ReducedCoefficients lemma = compute_phi(cp, solution(cp), mt, {WeylDenominator::Lemma});
  EXPECT_NEAR(lemma.phi / proof.phi, 10.0, 1e-13);
}

TEST(Phi, NegativeOnBattery) {
  for (int nn = 11; nn <= 15; ++nn) {
    quadrature::MomentTable mt(Dim(nn), 1e-10);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const CurvaturePoint cp = generate_sample(Dim(nn), seed, 1.0);
      const ReducedCoefficients rc = compute_phi(cp, solution(cp), mt);
      EXPECT_LT(rc.phi, 0.0);
      EXPECT_LE(rc.pairing, 0.0);
      EXPECT_LE(rc.phi_normal, 0.0);
      EXPECT_LE(rc.phi_weyl, 0.0);
      EXPECT_NEAR(rc.phi, rc.phi_pairing + rc.phi_normal + rc.phi_weyl, 1e-15 * std::abs(rc.phi));
    }
  }
}

// φ is a linear map of (pairing, Rnnnn, |W̄|²): scale each input alone.
TEST(Phi, LinearAssembly) {
  const CurvaturePoint cp = generate_sample(Dim(11), 3, 1.0);
  quadrature::MomentTable mt(cp.n, 1e-10);
  const auto sol = solution(cp);
  const ReducedCoefficients base = compute_phi(cp, sol, mt);
  auto scaled_sol = sol;
  scaled_sol.diagnostics.dirichlet_pairing *= 3.0;
  EXPECT_NEAR(compute_phi(cp, scaled_sol, mt).phi, base.phi + 2.0 * base.phi_pairing, 1e-14);
  CurvaturePoint c2 = cp;
  c2.Rnnnn *= 3.0;
  EXPECT_NEAR(compute_phi(c2, sol, mt).phi, base.phi + 2.0 * base.phi_normal, 1e-14);
  c2 = cp;
  c2.Wbar2 *= 3.0;
  EXPECT_NEAR(compute_phi(c2, sol, mt).phi, base.phi + 2.0 * base.phi_weyl, 1e-14);
}

TEST(Phi, PositiveIsRejected) {
  CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  cp.Rnnnn = 1.0;  // violates the gauge identity and makes φ > 0
  quadrature::MomentTable mt(cp.n, 1e-10);
  EXPECT_THROW(compute_phi(cp, solution(cp), mt), ValidationError);
  EXPECT_THROW(compute_phi(generate_sample(Dim(12), 1, 1.0), solution(cp), mt), StructuralError);
}

TEST(Cutoff, ValuesAndDerivatives) {
  const Cutoff c{2.0};
  EXPECT_EQ(c.value(0.0), 1.0);
  EXPECT_EQ(c.value(1.0), 1.0);
  EXPECT_EQ(c.value(2.0), 0.0);
  EXPECT_EQ(c.value(3.0), 0.0);
  EXPECT_NEAR(c.value(1.5), 0.5, 1e-15);
  const double h = 1e-5;
  for (double s = 1.02; s < 2.0; s += 0.05) {
    EXPECT_NEAR(c.d1(s), (c.value(s + h) - c.value(s - h)) / (2 * h), 1e-7);
    EXPECT_NEAR(c.d2(s), (c.d1(s + h) - c.d1(s - h)) / (2 * h), 1e-6);
    EXPECT_LE(c.value(s + 0.01), c.value(s));
  }
}

TEST(Slope, FitAndDegenerate) {
  SlopeExperiment e;
  e.delta = default_delta_ladder();
  ASSERT_EQ(e.delta.size(), 6u);
  EXPECT_GE(std::log10(e.delta.back() / e.delta.front()), 1.5);
  for (double d : e.delta) e.value.push_back(3.0 * std::pow(d, 5));
  fit_slope(e);
  EXPECT_NEAR(e.slope, 5.0, 1e-12);
  EXPECT_LT(e.slope_stderr, 1e-10);
  EXPECT_EQ(e.status, "ok");
  e.value[2] = 0.0;
  fit_slope(e);
  EXPECT_EQ(e.status, "degenerate");
  EXPECT_TRUE(std::isnan(e.slope));
  SlopeExperiment shortlad;
  shortlad.delta = {0.1, 0.2};
  shortlad.value = {1, 2};
  EXPECT_THROW(fit_slope(shortlad), StructuralError);
}

TEST(Identity, ZeroCurvatureIsDegenerate) {
  const CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  const IdentityResult r = verify_A4_L2_L3_identity(cp, geometry::isotropic_jet(cp), solution(cp));
  for (double v : r.remainder.value) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.remainder.status, "degenerate");
  EXPECT_TRUE(r.passed());
}

TEST(Identity, SlopeAndCoefficient) {
  for (int nn : {11, 13}) {
    const CurvaturePoint cp = generate_sample(Dim(nn), 2, 1.0);
    for (const auto& jet : {geometry::isotropic_jet(cp), geometry::generate_jet(cp, 9, 1.0)}) {
      const IdentityResult r = verify_A4_L2_L3_identity(cp, jet, solution(cp));
      EXPECT_TRUE(r.passed()) << "slope " << r.remainder.slope << " gap " << r.relative_gap;
      EXPECT_GE(r.remainder.slope, 4.5);
      EXPECT_LE(r.relative_gap, 0.02);
      EXPECT_NEAR(r.c4, r.c4_A4 + r.c4_L2 + r.c4_L3, 1e-12 * std::abs(r.c4));
    }
  }
}

TEST(Residual, ZeroCurvatureIsDegenerate) {
  const CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  ResidualOptions opt;
  opt.samples = 5000;
  const ResidualResult r = residual_slope(cp, geometry::MetricJet{}, solution(cp), opt);
  EXPECT_EQ(r.full.status, "degenerate");
  EXPECT_TRUE(r.passed());
}

TEST(Residual, SlopesWithAndWithoutCorrector) {
  const CurvaturePoint cp = generate_sample(Dim(11), 4, 1.0);
  ResidualOptions opt;
  opt.samples = 60000;
  const ResidualResult r = residual_slope(cp, geometry::generate_jet(cp, 4, 1.0), solution(cp), opt);
  EXPECT_TRUE(r.passed()) << r.full.slope << " " << r.without_v.slope << " " << r.cancelled.slope;
  EXPECT_GE(r.full.slope, 2.7);
  EXPECT_LE(r.full.slope, 3.3);
  EXPECT_NEAR(r.without_v.slope, 2.0, 0.3);
  EXPECT_GE(r.cancelled.slope, std::min(r.second_order.slope, r.corrector_term.slope) + 1.0);
  for (std::size_t k = 0; k < r.combined.value.size(); ++k) EXPECT_GE(r.combined.value[k], r.full.value[k]);
}

TEST(Residual, BudgetError) {
  const CurvaturePoint cp = generate_sample(Dim(11), 4, 1.0);
  ResidualOptions opt;
  opt.samples = 200;
  opt.max_rel_error = 1e-4;
  EXPECT_THROW(residual_slope(cp, geometry::isotropic_jet(cp), solution(cp), opt), BudgetError);
}

TEST(Results, CsvHeader) {
  ReducedCoefficients rc;
  rc.label = "q1";
  rc.n = 11;
  const std::string csv = results_csv({rc});
  EXPECT_EQ(csv.rfind("label,n,A,B,I2,I4,pairing,G2,G3,phi,slope_residual,slope_identity\n", 0), 0u);
  EXPECT_NE(csv.find("nan"), std::string::npos);
}
