#include "blowup/bubble.hpp"
#include "blowup/corrector.hpp"
#include "blowup/errors.hpp"
#include "blowup/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

using namespace blowup;
using namespace blowup::corrector;
using geometry::CurvaturePoint;
using geometry::Dim;
using geometry::generate_sample;

namespace {

// One profile per dimension, shared by the tests in this file.
const std::pair<Profile2D, CorrectorDiagnostics>& profile(int n) {
  static std::map<int, std::pair<Profile2D, CorrectorDiagnostics>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    CorrectorDiagnostics d;
    Profile2D p = solve_profile(Dim(n), GridConfig{}, &d);
    it = cache.emplace(n, std::make_pair(std::move(p), d)).first;
  }
  return it->second;
}

CorrectorSolution solution(const CurvaturePoint& cp) {
  const auto& [p, d] = profile(cp.n.value());
  return attach_pattern(cp, p, d);
}

Eigen::VectorXd random_z(int m, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g;
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z(i) = scale * g(rng);
  return z;
}

}  // namespace

TEST(Rhs, ReducedMatchesDirectBracket) {
  for (int nn : {11, 14}) {
    const CurvaturePoint cp = generate_sample(Dim(nn), 21, 1.0);
    const ReducedRhs rhs = reduce_rhs(cp);
    std::mt19937_64 rng(nn);
    std::exponential_distribution<double> e;
    for (int k = 0; k < 1000; ++k) {
      const Eigen::VectorXd z = random_z(nn - 1, rng, 1.5);
      const double t = e(rng);
      const double direct = rhs_direct(cp, t, z);
      const double reduced = rhs.eval(t, z);
      // scale: the R̄ part alone, which must cancel
      const double scale = std::abs(direct) + cp.Rbar.max_abs() * z.squaredNorm() *
                                                  bubble::eval_U_derivs(Dim(nn), bubble::HalfSpacePoint(t, z))
                                                      .hess.cwiseAbs()
                                                      .maxCoeff();
      EXPECT_LE(std::abs(direct - reduced), 1e-10 * scale);
    }
  }
}

TEST(Rhs, ZeroSource) {
  const CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  const ReducedRhs rhs = reduce_rhs(cp);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(10, 0.3);
  EXPECT_EQ(rhs.eval(0.5, z), 0.0);
  const CorrectorSolution sol = solution(cp);
  EXPECT_EQ(sol.eval(0.5, z), 0.0);
  const VerificationReport rep = verify_corrector(sol);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.pairing, 0.0);
}

TEST(Rhs, RadialFactorsMatchHessian) {
  const Dim n(12);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd z = random_z(11, rng, 1.0);
    const double t = 0.3 + 0.1 * k;
    const auto d = bubble::eval_U_derivs(n, bubble::HalfSpacePoint(t, z));
    const Eigen::MatrixXd h = z * z.transpose() * radial_A(n, t, z.norm()) +
                              radial_B(n, t, z.norm()) * Eigen::MatrixXd::Identity(11, 11);
    EXPECT_LT((h - d.hess.topLeftCorner(11, 11)).cwiseAbs().maxCoeff(), 1e-13 * d.hess.cwiseAbs().maxCoeff());
  }
}

TEST(Pattern, Y2FormulaAgainstSphereMonteCarlo) {
  const CurvaturePoint cp = generate_sample(Dim(11), 5, 1.0);
  const HarmonicPattern hp = HarmonicPattern::from(cp);
  EXPECT_DOUBLE_EQ(hp.mu, 2.0 * 10);
  std::mt19937_64 rng(8);
  const int N = 400000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < N; ++k) {
    const double y = hp.eval(quadrature::sample_sphere(10, rng));
    s += y * y;
    s2 += y * y * y * y;
  }
  const double w = quadrature::sphere_area(9);
  const double mean = w * s / N, se = w * std::sqrt((s2 / N - (s / N) * (s / N)) / N);
  EXPECT_LE(std::abs(mean - hp.y2_integral()), 3 * se);
  EXPECT_LE(std::abs(hp.mean_integral()), 1e-14);
}

TEST(Solvability, TwentySamples) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CurvaturePoint cp = generate_sample(Dim(11 + seed % 5), seed, 1.0);
    const std::vector<double> v = check_solvability(cp);
    ASSERT_EQ(static_cast<int>(v.size()), cp.n.value());
    for (int b = 0; b + 1 < cp.n.value(); ++b) EXPECT_EQ(v[b], 0.0);
    EXPECT_LE(std::abs(v.back()), 1e-8);
  }
  for (double x : check_solvability(CurvaturePoint::zero(Dim(11)))) EXPECT_EQ(x, 0.0);
}

TEST(Solve, Diagnostics) {
  const auto& [p, d] = profile(11);
  EXPECT_LE(d.residual, 1e-8);
  EXPECT_GE(d.sigma_min, 1e-6);
  for (int i = 0; i < p.size(); ++i) EXPECT_EQ(p.values()(i, 0), 0.0);
  EXPECT_TRUE(p.values().allFinite());
  EXPECT_DOUBLE_EQ(p.far_exponent(), -7.0);
}

TEST(Solve, Linearity) {
  const CurvaturePoint cp = generate_sample(Dim(11), 6, 1.0);
  CurvaturePoint cp2 = cp;
  cp2.S *= 2.0;
  cp2.Rnnnn *= 4.0;
  const CorrectorSolution a = solution(cp), b = solution(cp2);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd z = random_z(10, rng, 2.0);
    const double t = 0.05 * k;
    EXPECT_NEAR(b.eval(t, z), 2.0 * a.eval(t, z), 1e-10 * std::max(1.0, std::abs(a.eval(t, z))));
  }
  EXPECT_NEAR(verify_corrector(b).pairing, 4.0 * verify_corrector(a).pairing,
              1e-10 * std::abs(verify_corrector(b).pairing));
}

TEST(Solve, VerifyOnTwentySamplesPerDimension) {
  for (int nn : {11, 13, 15})
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const CurvaturePoint cp = generate_sample(Dim(nn), 1000 * nn + seed, 1.0);
      const VerificationReport rep = verify_corrector(solution(cp));
      EXPECT_TRUE(rep.passed()) << "n=" << nn << " seed=" << seed << ": " << rep.summary();
      EXPECT_LT(rep.pairing, 0.0);
      EXPECT_NEAR(rep.decay_exponent, 4.0 - nn, 0.5);
    }
}

TEST(Solve, SelfConvergence) {
  GridConfig g;
  g.nodes = 64;
  const ConvergenceStudy st = self_convergence(Dim(11), g);
  RecordProperty("order_pairing", std::to_string(st.order_pairing));
  RecordProperty("order_nodal", std::to_string(st.order_nodal));
  EXPECT_GE(st.order_pairing, 1.9);
  EXPECT_GE(st.order_nodal, 1.9);
}

TEST(Solve, FarFieldInsensitivity) {
  GridConfig wide;
  wide.extent = 128.0;
  const double base = radial_pairing(profile(11).first);
  const double doubled = radial_pairing(solve_profile(Dim(11), wide));
  EXPECT_LE(std::abs(doubled - base) / std::abs(base), 0.01);
}

TEST(Grid, ValidationAndMismatch) {
  GridConfig g;
  g.nodes = 2;
  EXPECT_THROW(g.validate(), Error);
  g = GridConfig{};
  g.extent = -1;
  EXPECT_THROW(g.validate(), Error);
  EXPECT_THROW(attach_pattern(generate_sample(Dim(12), 1, 1.0), profile(11).first, profile(11).second),
               StructuralError);
}

TEST(Inversion, BoundaryMapsToSphere) {
  Eigen::VectorXd center = Eigen::VectorXd::Zero(11);
  center(10) = -0.5;
  EXPECT_NEAR((map_to_ball(Eigen::VectorXd::Zero(11)) - center).norm(), 0.5, 1e-15);
  EXPECT_LT(map_to_ball(Eigen::VectorXd::Zero(11)).norm(), 1e-15);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(11);
    y.head(10) = random_z(10, rng, 5.0);
    EXPECT_NEAR((map_to_ball(y) - center).norm(), 0.5, 1e-12);
  }
  Eigen::VectorXd far = Eigen::VectorXd::Constant(11, 1e8);
  Eigen::VectorXd pole = Eigen::VectorXd::Zero(11);
  pole(10) = -1.0;
  EXPECT_LT((map_to_ball(far) - pole).norm(), 1e-7);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(11);
  bad(10) = -0.1;
  EXPECT_THROW(map_to_ball(bad), DomainError);
}

TEST(Inversion, TransportedSourceIsBounded) {
  const CurvaturePoint cp = generate_sample(Dim(11), 3, 1.0);
  Eigen::VectorXd dir = Eigen::VectorXd::LinSpaced(11, 0.5, 1.5);
  dir /= dir.norm();
  // f_q grows like (1+|y|)⁴ before transport; the weighted source tends to a constant
  double worst = 0.0, prev = 0.0, last = 0.0;
  for (double s = 0.01; s < 1e4; s *= 2) {
    const double f = eval_fq(cp, map_to_ball(s * dir));
    ASSERT_TRUE(std::isfinite(f));
    prev = last;
    last = std::abs(f) / std::pow(1.0 + s, 4);
    worst = std::max(worst, last);
  }
  EXPECT_LT(worst, 1e6);
  EXPECT_GT(last, 0.0);
  EXPECT_NEAR(last / prev, 1.0, 1e-2);
  // f_q(F(y)) = RHS(y) U(y)^{-(n+2)/(n-2)}
  const Eigen::VectorXd y = 0.7 * dir;
  const bubble::HalfSpacePoint p(y(10), y.head(10));
  EXPECT_NEAR(eval_fq(cp, map_to_ball(y)),
              reduce_rhs(cp).eval(p.t, p.z) * std::pow(bubble::eval_U(Dim(11), p), -13.0 / 9.0), 1e-10);
}

TEST(Export, ProfileCsvAndSidecar) {
  GridConfig g;
  g.nodes = 32;
  const CurvaturePoint cp = generate_sample(Dim(11), 2, 1.0);
  const CorrectorSolution sol = solve_vq(cp, g);
  const std::string csv = profile_csv(sol.profile);
  EXPECT_EQ(csv.rfind("t,r,psi\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 33 * 33);
  const std::string js = diagnostics_json(sol);
  for (const char* key : {"residual", "decay_exponent", "pairing", "grid"})
    EXPECT_NE(js.find(key), std::string::npos) << key;
}
