#include "blowup/bubble.hpp"
#include "blowup/energy.hpp"
#include "blowup/errors.hpp"

#include <cmath>
#include <sstream>

namespace blowup::energy {

namespace q = quadrature;

namespace {

bool jet_is_zero(const geometry::MetricJet& j) {
  auto zero = [](const std::vector<double>& v) {
    for (double x : v)
      if (x != 0.0) return false;
    return true;
  };
  auto zm = [](const Eigen::MatrixXd& m) { return m.size() == 0 || m.isZero(0.0); };
  return zero(j.Rbar_d1) && zero(j.Rbar_d2) && zero(j.S_d1) && zero(j.S_d2) && zero(j.S_dnk) &&
         zm(j.S_dn) && zm(j.S_dnn);
}

// ‖U(0,·)‖ in L^{2(n-1)/n}(R^{n-1})
double boundary_bubble_norm(Dim n) {
  const int nn = n.value();
  const double e = 2.0 * (nn - 1) / nn;
  const q::QuadResult r = q::integrate_half_line(
      [&](double x) { return std::pow(x, nn - 2) * std::pow(1.0 + x * x, -0.5 * (nn - 2) * e); }, 1e-12);
  return std::pow(q::sphere_area(nn - 2) * r.value, 1.0 / e);
}

// Full second-order data of v = ψ(t,r) θᵀSθ at (z, t), t last.
struct VDerivs {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

VDerivs v_derivs(const corrector::Profile2D& prof, const Eigen::MatrixXd& S, double t,
                 const Eigen::VectorXd& z) {
  const int m = static_cast<int>(z.size());
  VDerivs d;
  d.grad = Eigen::VectorXd::Zero(m + 1);
  d.hess = Eigen::MatrixXd::Zero(m + 1, m + 1);
  const double r = z.norm();
  if (r == 0.0) return d;
  const corrector::Profile2D::Eval e = prof.eval(t, r);
  const double r2 = r * r, r3 = r2 * r, r4 = r2 * r2;
  const double f = e.psi / r2;
  const double fr = e.psi_r / r2 - 2.0 * e.psi / r3;
  const double frr = e.psi_rr / r2 - 4.0 * e.psi_r / r3 + 6.0 * e.psi / r4;
  const double ft = e.psi_t / r2;
  const double ftt = e.psi_tt / r2;
  const double ftr = e.psi_tr / r2 - 2.0 * e.psi_t / r3;
  const Eigen::VectorXd Sz = S * z;
  const double qv = z.dot(Sz);
  d.value = f * qv;
  d.grad.head(m) = fr * qv / r * z + 2.0 * f * Sz;
  d.grad(m) = ft * qv;
  Eigen::MatrixXd zz = z * z.transpose();
  Eigen::MatrixXd cross = z * Sz.transpose();
  d.hess.topLeftCorner(m, m) = frr * qv / r2 * zz +
                               fr * qv * (Eigen::MatrixXd::Identity(m, m) / r - zz / r3) +
                               (2.0 * fr / r) * (cross + cross.transpose()) + 2.0 * f * S;
  const Eigen::VectorXd mixed = ftr * qv / r * z + 2.0 * ft * Sz;
  d.hess.block(0, m, m, 1) = mixed;
  d.hess.block(m, 0, 1, m) = mixed.transpose();
  d.hess(m, m) = ftt * qv;
  return d;
}

}  // namespace

bool ResidualResult::passed() const {
  if (full.status == "degenerate") return true;
  const bool slope3 = full.slope >= 2.7 && full.slope <= 3.3;
  const bool slope2 = without_v.slope >= 1.7 && without_v.slope <= 2.3;
  const double alone = std::min(second_order.slope, corrector_term.slope);
  const bool cancel = cancelled.status == "degenerate" || cancelled.slope >= alone + 1.0;
  return slope3 && slope2 && cancel;
}

ResidualResult residual_slope(const CurvaturePoint& cp, const geometry::MetricJet& jet,
                              const corrector::CorrectorSolution& sol, const ResidualOptions& opt) {
  if (!(sol.profile.n() == cp.n)) throw StructuralError("residual: profile dimension mismatch");
  if (opt.delta.size() < 5) throw DomainError("residual: δ-ladder needs at least five points");
  const Dim n = cp.n;
  const int nn = n.value();
  const int m = nn - 1;
  const geometry::MetricExpansion me(cp, jet);
  const Cutoff chi{opt.cutoff_radius};
  const corrector::Profile2D& prof = sol.profile;
  const Eigen::MatrixXd S = cp.S;
  const std::vector<double> delta = opt.delta;
  const int nd = static_cast<int>(delta.size());
  const double qexp = 2.0 * nn / (nn + 2.0);
  constexpr int kOut = 5;  // full, without V, δ²G₂ term, δ²Δ(vχ), their sum

  auto integrand = [&](double t, const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> out) {
    const bubble::UDerivs u = bubble::eval_U_derivs(n, bubble::HalfSpacePoint(t, z));
    const VDerivs v = v_derivs(prof, S, t, z);
    const double r = z.norm();
    const double lap_v = -t * t * z.dot(S * z) * corrector::radial_A(n, t, r);
    const geometry::MetricBlocks mb = me.blocks(z, t);
    const geometry::DivergenceBlocks db = me.divergence(z, t);
    Eigen::VectorXd x(nn);
    x.head(m) = z;
    x(m) = t;
    const double rho = x.norm();
    for (int k = 0; k < nd; ++k) {
      const double dl = delta[k];
      const double c = chi.value(dl * rho);
      if (c == 0.0) {
        for (int o = 0; o < kOut; ++o) out(k * kOut + o) = 0.0;
        continue;
      }
      const double c1 = dl * chi.d1(dl * rho);
      const double c2 = dl * dl * chi.d2(dl * rho);
      const Eigen::VectorXd gc = c1 / rho * x;
      const double lap_c = c2 + c1 * (nn - 1) / rho;
      Eigen::MatrixXd hc = (c2 / (rho * rho) - c1 / (rho * rho * rho)) * (x * x.transpose());
      hc.diagonal().array() += c1 / rho;
      // W̃ = Uχ, Ṽ = vχ
      const Eigen::VectorXd gW = u.grad * c + u.value * gc;
      const Eigen::MatrixXd hW =
          u.hess * c + u.grad * gc.transpose() + gc * u.grad.transpose() + u.value * hc;
      const double lapW = 2.0 * u.grad.dot(gc) + u.value * lap_c;
      const Eigen::VectorXd gV = v.grad * c + v.value * gc;
      const Eigen::MatrixXd hV =
          v.hess * c + v.grad * gc.transpose() + gc * v.grad.transpose() + v.value * hc;
      const double lapV = c * lap_v + 2.0 * v.grad.dot(gc) + v.value * lap_c;

      auto metric = [&](const Eigen::MatrixXd& H, const Eigen::VectorXd& G, const Eigen::MatrixXd& blk,
                        const Eigen::VectorXd& div) {
        return (blk.array() * H.topLeftCorner(m, m).array()).sum() + div.dot(G.head(m));
      };
      const double d2 = dl * dl, d3 = d2 * dl, d4 = d2 * d2;
      const double w2 = d2 * metric(hW, gW, mb.deg2, db.deg2);
      const double w34 = d3 * metric(hW, gW, mb.deg3, db.deg3) + d4 * metric(hW, gW, mb.deg4, db.deg4);
      const double v2 = d2 * lapV;
      const double vm = d2 * (d2 * metric(hV, gV, mb.deg2, db.deg2) + d3 * metric(hV, gV, mb.deg3, db.deg3) +
                              d4 * metric(hV, gV, mb.deg4, db.deg4));
      const double noV = lapW + w2 + w34;
      const double fullB = noV + v2 + vm;
      out(k * kOut + 0) = std::pow(std::abs(fullB), qexp);
      out(k * kOut + 1) = std::pow(std::abs(noV), qexp);
      out(k * kOut + 2) = std::pow(std::abs(w2), qexp);
      out(k * kOut + 3) = std::pow(std::abs(v2), qexp);
      out(k * kOut + 4) = std::pow(std::abs(w2 + v2), qexp);
    }
  };

  const Eigen::MatrixXd samples = q::mc_halfspace_samples(n, nd * kOut, integrand, opt.samples, opt.seed, opt.proposal);
  const double N = static_cast<double>(samples.rows());

  ResidualResult res;
  SlopeExperiment* exps[kOut] = {&res.full, &res.without_v, &res.second_order, &res.corrector_term,
                                 &res.cancelled};
  const char* names[kOut] = {"residual", "residual-without-V", "second-order-metric-term",
                             "corrector-laplacian", "cancelled-sum"};
  for (int o = 0; o < kOut; ++o) {
    exps[o]->name = names[o];
    exps[o]->delta = delta;
  }
  std::ostringstream budget;
  for (int k = 0; k < nd; ++k)
    for (int o = 0; o < kOut; ++o) {
      const auto col = samples.col(k * kOut + o);
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / std::max(1.0, N - 1.0);
      const double se = std::sqrt(var / N);
      const double norm = mean > 0.0 ? std::pow(mean, 1.0 / qexp) : 0.0;
      // delta method for I^{1/q}
      const double nse = mean > 0.0 ? norm / (qexp * mean) * se : 0.0;
      exps[o]->value.push_back(norm);
      exps[o]->error.push_back(nse);
      if (o < 2 && mean > 0.0 && nse > opt.max_rel_error * norm)
        budget << " " << names[o] << "@δ=" << delta[k] << ": rel.err " << nse / norm;
    }

  const bool degenerate = S.isZero(0.0) && cp.Rbar.max_abs() == 0.0 && jet_is_zero(jet);
  if (!degenerate && !budget.str().empty())
    throw BudgetError("residual_slope: Monte Carlo variance above budget;" + budget.str(),
                      res.full.value.front(), res.full.error.front());

  const double ub = boundary_bubble_norm(n);
  res.combined.name = "residual-plus-perturbation";
  res.combined.delta = delta;
  for (int k = 0; k < nd; ++k) {
    const double eps = std::pow(delta[k] / opt.epsilon_scale, 3);
    res.combined.value.push_back(res.full.value[k] + eps * std::abs(cp.gamma) * delta[k] * ub);
    res.combined.error.push_back(res.full.error[k]);
  }

  for (int o = 0; o < kOut; ++o) fit_slope(*exps[o]);
  fit_slope(res.combined);
  if (degenerate)
    for (SlopeExperiment* e : {&res.full, &res.without_v, &res.second_order, &res.corrector_term,
                               &res.cancelled, &res.combined})
      e->status = "degenerate";
  return res;
}

}  // namespace blowup::energy
