#include "blowup/errors.hpp"
#include "blowup/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace blowup;
using namespace blowup::geometry;

namespace {

Eigen::VectorXd point(int n, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = g(rng);
  y(n - 1) = std::abs(y(n - 1));
  return h * y / y.norm();
}

}  // namespace

TEST(Dim, RejectsSmallDimensions) {
  EXPECT_THROW(Dim(10), DomainError);
  EXPECT_NO_THROW(Dim(11));
  EXPECT_NO_THROW(Dim(7, true));
  EXPECT_THROW(Dim(6, true), DomainError);
  EXPECT_TRUE(Dim(9, true).exploratory());
  EXPECT_FALSE(Dim(11).exploratory());
}

TEST(Validate, ZeroCurvaturePasses) {
  for (int n = 11; n <= 15; ++n) EXPECT_TRUE(validate_curvature(CurvaturePoint::zero(Dim(n))).passed());
}

TEST(Validate, TraceViolationIsNamed) {
  CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  cp.S(0, 0) = 0.1;
  cp.Rnnnn = -2.0 * cp.S.squaredNorm();
  const ValidationReport rep = validate_curvature(cp);
  EXPECT_FALSE(rep.passed());
  EXPECT_NE(rep.failures().find("S trace"), std::string::npos);
  EXPECT_THROW(require_valid(cp), ValidationError);
}

TEST(Validate, DimensionMismatchIsStructural) {
  CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  cp.S = Eigen::MatrixXd::Zero(9, 9);
  EXPECT_THROW(validate_curvature(cp), StructuralError);
}

TEST(Validate, RnnnnIdentity) {
  CurvaturePoint cp = generate_sample(Dim(11), 3, 1.0);
  cp.Rnnnn *= 1.01;
  EXPECT_NE(validate_curvature(cp).failures().find("Rnnnn"), std::string::npos);
}

TEST(Generate, ZeroScaleIsZero) {
  const CurvaturePoint cp = generate_sample(Dim(11), 1, 0.0);
  EXPECT_EQ(cp.Rbar.max_abs(), 0.0);
  EXPECT_EQ(cp.S.norm(), 0.0);
  EXPECT_EQ(cp.Wbar2, 0.0);
}

TEST(Generate, SamplesPassValidation) {
  for (int n = 11; n <= 15; ++n)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const CurvaturePoint cp = generate_sample(Dim(n), seed, 1.0);
      const ValidationReport rep = validate_curvature(cp);
      EXPECT_TRUE(rep.passed()) << "n=" << n << " seed=" << seed << ": " << rep.failures();
    }
}

TEST(Generate, Deterministic) {
  const CurvaturePoint a = generate_sample(Dim(12), 7, 1.0), b = generate_sample(Dim(12), 7, 1.0);
  EXPECT_EQ(a.Rbar.data(), b.Rbar.data());
  EXPECT_EQ(a.S, b.S);
  EXPECT_EQ(a.D2, b.D2);
  EXPECT_EQ(a.gamma, b.gamma);
}

// Independent symmetrization: a tensor built from outer products of symmetric
// matrices (Kulkarni-Nomizu) has every curvature symmetry and must survive projection.
TEST(Project, KulkarniNomizuIsFixed) {
  const int m = 6;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd h(m, m), k(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h(i, j) = g(rng), k(i, j) = g(rng);
  h = (0.5 * (h + h.transpose())).eval();
  k = (0.5 * (k + k.transpose())).eval();
  Tensor4 t(m);
  for (int i = 0; i < m; ++i)
    for (int a = 0; a < m; ++a)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l)
          t(i, a, j, l) = h(i, j) * k(a, l) + h(a, l) * k(i, j) - h(i, l) * k(a, j) - h(a, j) * k(i, l);
  const Tensor4 p = project_curvature(t);
  for (std::size_t i = 0; i < t.data().size(); ++i) EXPECT_NEAR(p.data()[i], t.data()[i], 1e-12);
  // weyl part is trace free
  const Eigen::MatrixXd ric = ricci(weyl_part(t));
  EXPECT_LT(ric.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeylNorm, Conventions) {
  CurvaturePoint cp = CurvaturePoint::zero(Dim(11));
  EXPECT_EQ(weyl_norm_consistency(cp), 0.0);
  cp.Wbar2 = 6.0;
  EXPECT_DOUBLE_EQ(weyl_norm_consistency(cp), -1.0);
  EXPECT_DOUBLE_EQ(weyl_norm_consistency(cp, RiiConvention::PerIndex), -10.0);
  const CurvaturePoint s = generate_sample(Dim(11), 2, 1.0);
  EXPECT_EQ(weyl_norm_consistency(s), -s.Wbar2 / 6.0);
}

TEST(MetricInverse, IdentityAtOriginAndFlat) {
  const CurvaturePoint cp = generate_sample(Dim(11), 4, 1.0);
  const MetricExpansion me(cp, generate_jet(cp, 4, 1.0));
  EXPECT_TRUE(eval_metric_inverse(me, Eigen::VectorXd::Zero(11)).isIdentity(0.0));
  const MetricExpansion flat(CurvaturePoint::zero(Dim(11)));
  EXPECT_TRUE(eval_metric_inverse(flat, point(11, 0.3, 1)).isIdentity(0.0));
}

TEST(MetricInverse, SymmetricAndGauge) {
  const CurvaturePoint cp = generate_sample(Dim(13), 8, 1.0);
  const MetricExpansion me(cp, generate_jet(cp, 8, 1.0, true));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::MatrixXd g = eval_metric_inverse(me, point(13, 0.05, s));
    EXPECT_EQ((g - g.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g(12, 12), 1.0);
    EXPECT_EQ(g.row(12).head(12).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(MetricInverse, Parity) {
  const CurvaturePoint cp = generate_sample(Dim(11), 9, 1.0);
  const auto jet = generate_jet(cp, 9, 1.0);
  const MetricExpansion me(cp, jet);
  const Eigen::VectorXd y = point(11, 0.2, 3);
  const Eigen::VectorXd z = y.head(10);
  const double t = y(10);
  const MetricBlocks a = me.blocks(z, t), b = me.blocks(-z, t);
  EXPECT_LT((a.deg2 - b.deg2).cwiseAbs().maxCoeff(), 1e-15);
  // only the pure t³ term survives z -> -z in the cubic block
  EXPECT_LT((a.deg3 + b.deg3 - (2.0 * t * t * t / 3.0) * jet.S_dn).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(a.deg3.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MetricInverse, Homogeneity) {
  const CurvaturePoint cp = generate_sample(Dim(11), 10, 1.0);
  const MetricExpansion me(cp, generate_jet(cp, 10, 1.0));
  const Eigen::VectorXd y = point(11, 1.0, 4);
  const MetricBlocks a = me.blocks(y.head(10), y(10));
  const MetricBlocks b = me.blocks(0.5 * y.head(10), 0.5 * y(10));
  EXPECT_LT((b.deg2 - 0.25 * a.deg2).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((b.deg3 - 0.125 * a.deg3).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((b.deg4 - 0.0625 * a.deg4).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(MetricInverse, LossOfDefinitenessIsDomainError) {
  const CurvaturePoint cp = generate_sample(Dim(11), 11, 50.0);
  const MetricExpansion me(cp);
  // traceless S has a negative eigenvalue, so I + t²S fails on the normal axis
  Eigen::VectorXd y = Eigen::VectorXd::Zero(11);
  y(10) = 5.0;
  EXPECT_THROW(eval_metric_inverse(me, y), DomainError);
}

// Divergence blocks against central differences of the metric blocks.
TEST(MetricInverse, DivergenceMatchesFiniteDifferences) {
  const CurvaturePoint cp = generate_sample(Dim(11), 12, 1.0);
  const MetricExpansion me(cp, generate_jet(cp, 12, 1.0));
  const Eigen::VectorXd y = point(11, 0.7, 6);
  const Eigen::VectorXd z = y.head(10);
  const double t = y(10), h = 1e-5;
  const DivergenceBlocks d = me.divergence(z, t);
  Eigen::VectorXd fd = Eigen::VectorXd::Zero(10);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    const Eigen::MatrixXd diff = (me.blocks(zp, t).total() - me.blocks(zm, t).total()) / (2 * h);
    fd += diff.row(i).transpose();
  }
  const Eigen::VectorXd an = d.deg2 + d.deg3 + d.deg4;
  EXPECT_LT((fd - an).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, an.cwiseAbs().maxCoeff()));
}

// The truncated inverse metric has det 1 + O(|y|^k); with the gauge traces
// vanishing the degree-2 contribution cancels, so the slope is at least 3.
TEST(MetricInverse, DeterminantSlope) {
  const CurvaturePoint cp = generate_sample(Dim(11), 13, 1.0);
  const MetricExpansion me(cp, generate_jet(cp, 13, 1.0));
  std::vector<double> lh, ld;
  for (double h : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s)
      worst = std::max(worst, std::abs(eval_metric_inverse(me, point(11, h, s)).determinant() - 1.0));
    lh.push_back(std::log(h));
    ld.push_back(std::log(worst));
  }
  const double slope = (ld.front() - ld.back()) / (lh.front() - lh.back());
  RecordProperty("det_slope", std::to_string(slope));
  EXPECT_GE(slope, 3.0);
}

TEST(Jet, IsotropicContractions) {
  const CurvaturePoint cp = generate_sample(Dim(11), 14, 1.0);
  for (const MetricJet& jet : {isotropic_jet(cp), generate_jet(cp, 3, 1.0)}) {
    const int m = 10;
    double dc = 0.0, trace = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        dc += jet.S_d2[((i * m + j) * m + i) * m + j];
        trace += jet.S_d2[((i * m + i) * m + j) * m + j];
      }
    EXPECT_NEAR(dc, cp.D2, 1e-12 * std::max(1.0, std::abs(cp.D2)));
    EXPECT_NEAR(trace, 0.0, 1e-12);
    EXPECT_NEAR(jet.S_dnn.trace(), cp.Rnnnn, 1e-12 * std::abs(cp.Rnnnn));
  }
}
