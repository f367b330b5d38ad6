#include "blowup/reduction.hpp"

#include "blowup/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace blowup::reduction {

void ReducedFunctional::validate() const {
  if (!(B > 0.0)) throw ValidationError("reduced functional: B must be positive");
  if (points.empty()) throw ValidationError("reduced functional: empty point table");
  std::set<std::string> seen;
  for (const QPoint& p : points) {
    if (!seen.insert(p.label).second) throw ValidationError("reduced functional: duplicate label '" + p.label + "'");
    if (!std::isfinite(p.gamma) || !std::isfinite(p.phi))
      throw ValidationError("reduced functional: non-finite data at '" + p.label + "'");
    if (p.phi > 0.0) throw ValidationError("reduced functional: phi > 0 at '" + p.label + "'");
  }
}

const QPoint& ReducedFunctional::at(const std::string& label) const {
  for (const QPoint& p : points)
    if (p.label == label) return p;
  throw DomainError("unknown point label '" + label + "'");
}

double eval_G(const ReducedFunctional& rf, double lambda, const std::string& label) {
  if (!(lambda > 0.0)) throw DomainError("eval_G: lambda must be positive");
  const QPoint& p = rf.at(label);
  const double l2 = lambda * lambda;
  return lambda * p.gamma * rf.B + l2 * l2 * p.phi;
}

double eval_dG(const ReducedFunctional& rf, double lambda, const std::string& label) {
  const QPoint& p = rf.at(label);
  return rf.B * p.gamma + 4.0 * lambda * lambda * lambda * p.phi;
}

bool admissible(const QPoint& p) { return p.gamma > 0.0 && p.phi < 0.0; }

double critical_lambda(double B, double gamma, double phi) {
  if (!(gamma > 0.0)) throw ValidationError("no critical point: gamma <= 0");
  if (!(phi < 0.0)) throw ValidationError("no critical point: phi >= 0");
  return std::cbrt(-B * gamma / (4.0 * phi));
}

double critical_lambda(const ReducedFunctional& rf, const std::string& label) {
  const QPoint& p = rf.at(label);
  return critical_lambda(rf.B, p.gamma, p.phi);
}

BlowUpFamily find_blowup_point(const ReducedFunctional& rf) {
  BlowUpFamily fam;
  fam.n = rf.n;
  fam.B = rf.B;
  std::vector<const QPoint*> pts;
  for (const QPoint& p : rf.points) pts.push_back(&p);
  std::sort(pts.begin(), pts.end(), [](const QPoint* a, const QPoint* b) { return a->label < b->label; });
  double lmin = 0.0, lmax = 0.0;
  bool found = false;
  for (const QPoint* p : pts) {
    if (!admissible(*p)) {
      fam.excluded_labels.push_back(p->label);
      continue;
    }
    fam.admissible_labels.push_back(p->label);
    const double lam = critical_lambda(rf.B, p->gamma, p->phi);
    const double G = 0.75 * rf.B * p->gamma * lam;
    if (!found) {
      lmin = lmax = lam;
    } else {
      lmin = std::min(lmin, lam);
      lmax = std::max(lmax, lam);
    }
    if (!found || G > fam.G0) {
      fam.G0 = G;
      fam.lambda0 = lam;
      fam.q0 = p->label;
      fam.gamma0 = p->gamma;
      fam.phi0 = p->phi;
    }
    found = true;
  }
  if (!found) throw ValidationError("construction impossible: no point with gamma > 0 and phi < 0");
  fam.bracket = {0.5 * lmin, 2.0 * lmax};
  return fam;
}

std::vector<FamilyRow> family_table(const BlowUpFamily& fam, const std::vector<double>& eps,
                                    double bound_constant) {
  std::vector<FamilyRow> rows;
  for (double e : eps) {
    if (!(e > 0.0 && e < 1.0)) throw DomainError("family_table: epsilon must lie in (0,1)");
    FamilyRow r;
    r.epsilon = e;
    r.delta = fam.lambda0 * std::cbrt(e);
    r.peak = std::pow(r.delta, -0.5 * (fam.n - 2));
    r.phi_bound = bound_constant * e;
    rows.push_back(r);
  }
  return rows;
}

HessianReport hessian_check(double B, const PointData& data, const Eigen::VectorXd& q0, double h,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                            double h_lambda) {
  const int k = static_cast<int>(q0.size());
  HessianReport rep;
  const auto [g0, p0] = data(q0);
  rep.lambda0 = critical_lambda(B, g0, p0);
  for (int i = 0; i < k; ++i)
    if (q0(i) - h < lower(i) || q0(i) + h > upper(i)) {
      rep.classification = "inconclusive";
      return rep;
    }
  auto G = [&](double lam, const Eigen::VectorXd& q) {
    const auto [g, p] = data(q);
    const double l2 = lam * lam;
    return lam * g * B + l2 * l2 * p;
  };
  const double l0 = rep.lambda0;
  const double hl = h_lambda * l0;
  rep.hessian = Eigen::MatrixXd::Zero(k + 1, k + 1);
  const double c = G(l0, q0);
  rep.hessian(0, 0) = (G(l0 + hl, q0) - 2.0 * c + G(l0 - hl, q0)) / (hl * hl);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(k);
    ei(i) = h;
    rep.hessian(0, i + 1) = rep.hessian(i + 1, 0) =
        (G(l0 + hl, q0 + ei) - G(l0 + hl, q0 - ei) - G(l0 - hl, q0 + ei) + G(l0 - hl, q0 - ei)) /
        (4.0 * hl * h);
    rep.hessian(i + 1, i + 1) = (G(l0, q0 + ei) - 2.0 * c + G(l0, q0 - ei)) / (h * h);
    for (int j = i + 1; j < k; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Zero(k);
      ej(j) = h;
      rep.hessian(i + 1, j + 1) = rep.hessian(j + 1, i + 1) =
          (G(l0, q0 + ei + ej) - G(l0, q0 + ei - ej) - G(l0, q0 - ei + ej) + G(l0, q0 - ei - ej)) /
          (4.0 * h * h);
    }
  }
  rep.lambda_lambda = rep.hessian(0, 0);
  rep.lambda_lambda_closed = 12.0 * l0 * l0 * p0;
  rep.lambda_lambda_rel_error =
      std::abs(rep.lambda_lambda - rep.lambda_lambda_closed) / std::abs(rep.lambda_lambda_closed);
  rep.mixed = rep.hessian.block(1, 0, k, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.hessian);
  rep.eigenvalues = es.eigenvalues();
  if (k > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qs(rep.hessian.bottomRightCorner(k, k));
    rep.q_block_negative_definite = qs.eigenvalues().maxCoeff() < 0.0;
  }
  const double scale = rep.eigenvalues.cwiseAbs().maxCoeff();
  const double zero = 1e-10 * scale;
  const bool any_pos = (rep.eigenvalues.array() > zero).any();
  const bool any_neg = (rep.eigenvalues.array() < -zero).any();
  const bool all_neg = (rep.eigenvalues.array() < -zero).all();
  rep.classification = all_neg ? "negative-definite" : (any_pos && any_neg ? "indefinite" : "semidefinite");
  return rep;
}

PointData grid_lookup(std::vector<GridSample> samples, double h) {
  if (samples.empty()) throw DomainError("grid_lookup: no samples");
  return [samples = std::move(samples), h](const Eigen::VectorXd& q) -> std::pair<double, double> {
    for (const GridSample& s : samples)
      if (s.q.size() == q.size() && (s.q - q).cwiseAbs().maxCoeff() <= 1e-9 * h) return {s.gamma, s.phi};
    std::ostringstream os;
    os << "grid_lookup: no sample at q = " << q.transpose();
    throw DomainError(os.str());
  };
}

std::string report_json(const BlowUpFamily& fam, const std::vector<FamilyRow>& rows,
                        const HessianReport* hessian) {
  nlohmann::ordered_json j;
  j["lambda0"] = fam.lambda0;
  j["q0"] = fam.q0;
  j["G0"] = fam.G0;
  j["bracket"] = {fam.bracket.first, fam.bracket.second};
  j["stability"] = fam.stability;
  j["admissible"] = fam.admissible_labels;
  j["excluded"] = fam.excluded_labels;
  nlohmann::ordered_json fr = nlohmann::ordered_json::array();
  for (const FamilyRow& r : rows)
    fr.push_back({{"epsilon", r.epsilon}, {"delta", r.delta}, {"peak", r.peak}, {"phi_bound", r.phi_bound}});
  j["family"] = fr;
  nlohmann::ordered_json hj;
  hj["lambda_lambda_closed"] = 12.0 * fam.lambda0 * fam.lambda0 * fam.phi0;
  if (hessian) {
    hj["classification"] = hessian->classification;
    if (hessian->hessian.size()) {
      hj["lambda_lambda"] = hessian->lambda_lambda;
      hj["lambda_lambda_rel_error"] = hessian->lambda_lambda_rel_error;
      hj["mixed"] = std::vector<double>(hessian->mixed.data(), hessian->mixed.data() + hessian->mixed.size());
      hj["eigenvalues"] =
          std::vector<double>(hessian->eigenvalues.data(), hessian->eigenvalues.data() + hessian->eigenvalues.size());
      hj["q_block_negative_definite"] = hessian->q_block_negative_definite;
    }
  } else {
    hj["classification"] = "max-in-lambda";
  }
  j["hessian"] = hj;
  // alternative readings of the stationarity and λλ-entry formulas
  j["notes"] = {{"lambda_cubed_minus_gamma_over_phi", std::cbrt(-fam.gamma0 / fam.phi0)},
                {"lambda_lambda_entry_2phi", 2.0 * fam.phi0},
                {"argmax_ties", "smallest label"}};
  return j.dump(2) + "\n";
}

std::string family_csv(const std::vector<FamilyRow>& rows) {
  std::ostringstream os;
  os << "epsilon,delta,peak,phi_bound\n" << std::setprecision(17);
  for (const FamilyRow& r : rows) os << r.epsilon << ',' << r.delta << ',' << r.peak << ',' << r.phi_bound << '\n';
  return os.str();
}

std::string g_curves_csv(const ReducedFunctional& rf, int samples) {
  std::vector<const QPoint*> pts;
  for (const QPoint& p : rf.points) pts.push_back(&p);
  std::sort(pts.begin(), pts.end(), [](const QPoint* a, const QPoint* b) { return a->label < b->label; });
  std::ostringstream os;
  os << "label,lambda,G\n" << std::setprecision(17);
  for (const QPoint* p : pts) {
    if (!admissible(*p)) continue;
    const double lam = critical_lambda(rf.B, p->gamma, p->phi);
    for (int i = 0; i < samples; ++i) {
      const double l = lam * std::pow(4.0, 2.0 * i / (samples - 1) - 1.0);
      os << p->label << ',' << l << ',' << eval_G(rf, l, p->label) << '\n';
    }
  }
  return os.str();
}

}  // namespace blowup::reduction
