#include "blowup/energy.hpp"

#include "blowup/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace blowup::energy {

namespace q = quadrature;

namespace {
// Gauss-Kronrod refinement below ~1e-14 only accumulates roundoff.
double line_tol(double tol) { return std::max(0.01 * tol, 1e-14); }
}  // namespace

ATerms compute_A(Dim n, double tol) {
  const int nn = n.value();
  const double omega = q::sphere_area(nn - 2);
  ATerms a;
  // |∇U|² = (n-2)² D^{-(n-1)}
  const q::QuadResult grad = q::moment(n, {double(nn - 1), 0, 0}, tol);
  a.gradient_integral = (nn - 2.0) * (nn - 2.0) * omega * grad.value;
  const double p = 2.0 * (nn - 1) / (nn - 2);
  const q::QuadResult bnd = q::integrate_half_line(
      [&](double r) { return std::pow(r, nn - 2) * std::pow(1.0 + r * r, -0.5 * (nn - 2) * p); },
      line_tol(tol));
  a.boundary_integral = omega * bnd.value;
  const double c = (nn - 2.0) * (nn - 2.0) / (2.0 * (nn - 1));
  a.A = 0.5 * a.gradient_integral - c * a.boundary_integral;
  a.error = 0.5 * (nn - 2.0) * (nn - 2.0) * omega * grad.error + c * omega * bnd.error;
  if (a.error > tol * std::abs(a.A) * 10.0)
    throw BudgetError("compute_A: quadrature error above tolerance", a.A, a.error);
  return a;
}

double compute_B(Dim n, double tol) {
  const int nn = n.value();
  if (nn < 5) throw DomainError("compute_B: needs n >= 5");
  const q::QuadResult r = q::integrate_half_line(
      [&](double x) { return std::pow(x, nn - 2) * std::pow(1.0 + x * x, -(nn - 2.0)); }, line_tol(tol));
  const double B = 0.5 * q::sphere_area(nn - 2) * r.value;
  if (r.error > tol * std::abs(r.value))
    throw BudgetError("compute_B: quadrature error above tolerance", B, r.error);
  return B;
}

GTerms compute_G_terms(const CurvaturePoint& cp, double I2) {
  const double n = cp.n.value();
  GTerms g;
  g.G2 = (n - 2) * (n - 2) / (n * n - 1) * I2 * cp.D2;
  g.G3 = 6.0 * (n - 2) / (n * n - 1) * I2 * cp.S.squaredNorm();
  return g;
}

ReducedCoefficients compute_phi(const CurvaturePoint& cp, const corrector::CorrectorSolution& sol,
                                q::MomentTable& moments, const PhiOptions& opt) {
  if (!(sol.profile.n() == cp.n) || !(moments.n() == cp.n))
    throw StructuralError("compute_phi: dimension mismatch between inputs");
  const double n = cp.n.value();
  ReducedCoefficients rc;
  rc.label = cp.label;
  rc.n = cp.n.value();
  rc.A = compute_A(cp.n).A;
  rc.B = compute_B(cp.n);
  rc.I2 = moments.I2();
  rc.I4 = moments.I4();
  const GTerms g = compute_G_terms(cp, rc.I2);
  rc.G2 = g.G2;
  rc.G3 = g.G3;
  rc.pairing = sol.diagnostics.dirichlet_pairing;
  const double wden = opt.weyl_denominator == WeylDenominator::Proof ? 96.0 * (n - 1) * (n - 1)
                                                                     : 96.0 * (n - 1);
  rc.phi_pairing = 0.5 * rc.pairing;
  rc.phi_normal = (n - 2) * (n - 8) / (4.0 * (n * n - 1)) * cp.Rnnnn * rc.I2;
  rc.phi_weyl = -(n - 2) / wden * cp.Wbar2 * rc.I4;
  rc.phi = rc.phi_pairing + rc.phi_normal + rc.phi_weyl;
  const double scale = std::abs(rc.phi_pairing) + std::abs(rc.phi_normal) + std::abs(rc.phi_weyl);
  if (rc.phi > opt.sign_tol * scale) {
    std::ostringstream os;
    os << "phi = " << rc.phi << " > 0 at point '" << cp.label << "'";
    throw ValidationError(os.str());
  }
  return rc;
}

namespace {

// e^{-1/x} and its first two derivatives
struct Bump {
  double h, h1, h2;
};
Bump bump(double x) {
  if (x <= 0.0) return {0.0, 0.0, 0.0};
  const double h = std::exp(-1.0 / x);
  const double x2 = x * x;
  return {h, h / x2, h * (1.0 - 2.0 * x) / (x2 * x2)};
}

// χ(u) = a/(a+b), a = h(1-u), b = h(u) on u ∈ (0,1), derivatives in u.
std::array<double, 3> step(double u) {
  if (u <= 0.0) return {1.0, 0.0, 0.0};
  if (u >= 1.0) return {0.0, 0.0, 0.0};
  const Bump A = bump(1.0 - u), B = bump(u);
  const double a = A.h, a1 = -A.h1, a2 = A.h2;
  const double b = B.h, b1 = B.h1, b2 = B.h2;
  const double s = a + b, s1 = a1 + b1;
  const double N = a1 * b - a * b1;
  const double N1 = a2 * b - a * b2;
  const double D = s * s, D1 = 2.0 * s * s1;
  return {a / s, N / D, (N1 * D - N * D1) / (D * D)};
}

}  // namespace

double Cutoff::value(double s) const { return step((s - 0.5 * radius) / (0.5 * radius))[0]; }
double Cutoff::d1(double s) const {
  return step((s - 0.5 * radius) / (0.5 * radius))[1] / (0.5 * radius);
}
double Cutoff::d2(double s) const {
  const double h = 0.5 * radius;
  return step((s - h) / h)[2] / (h * h);
}

std::vector<double> default_delta_ladder() {
  std::vector<double> d;
  for (int k = 0; k <= 5; ++k) d.push_back(0.01 * std::pow(32.0, k / 5.0));
  return d;
}

std::vector<double> residual_delta_ladder() {
  std::vector<double> d;
  for (int k = 0; k <= 5; ++k) d.push_back(0.001 * std::pow(32.0, k / 5.0));
  return d;
}

void fit_slope(SlopeExperiment& e) {
  const std::size_t k = e.delta.size();
  if (k < 3 || e.value.size() != k) throw StructuralError("fit_slope: need at least three points");
  std::vector<double> x(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(std::abs(e.value[i]) > 0.0) || !std::isfinite(e.value[i])) {
      e.status = "degenerate";
      e.slope = std::numeric_limits<double>::quiet_NaN();
      e.slope_stderr = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    x[i] = std::log(e.delta[i]);
    y[i] = std::log(std::abs(e.value[i]));
  }
  const double xm = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  e.slope = sxy / sxx;
  double ssr = 0, mc = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double res = y[i] - ym - e.slope * (x[i] - xm);
    ssr += res * res;
    if (i < e.error.size()) {
      const double rel = e.error[i] / std::abs(e.value[i]);
      const double w = (x[i] - xm) / sxx;
      mc += w * w * rel * rel;
    }
  }
  const double ols = k > 2 ? ssr / double(k - 2) / sxx : 0.0;
  e.slope_stderr = std::sqrt(ols + mc);
  e.status = "ok";
}

namespace {

// ∫_{S^{m-1}} T_{a1..a2k} θ_{a1}..θ_{a2k} by summing T over perfect matchings of its slots.
double sphere_contract(const std::function<double(const int*)>& T, int order, int m) {
  std::vector<std::vector<std::pair<int, int>>> matchings;
  std::vector<std::pair<int, int>> cur;
  std::vector<bool> used(order, false);
  std::function<void()> rec = [&]() {
    int first = -1;
    for (int i = 0; i < order; ++i)
      if (!used[i]) {
        first = i;
        break;
      }
    if (first < 0) {
      matchings.push_back(cur);
      return;
    }
    used[first] = true;
    for (int j = first + 1; j < order; ++j) {
      if (used[j]) continue;
      used[j] = true;
      cur.emplace_back(first, j);
      rec();
      cur.pop_back();
      used[j] = false;
    }
    used[first] = false;
  };
  rec();
  const int half = order / 2;
  std::vector<int> idx(order), label(half, 0);
  double total = 0.0;
  for (const auto& mt : matchings) {
    std::fill(label.begin(), label.end(), 0);
    while (true) {
      for (int p = 0; p < half; ++p) idx[mt[p].first] = idx[mt[p].second] = label[p];
      total += T(idx.data());
      int p = 0;
      while (p < half && ++label[p] == m) label[p++] = 0;
      if (p == half) break;
    }
  }
  double denom = 1.0;
  for (int j = 0; j < half; ++j) denom *= m + 2.0 * j;
  return q::sphere_area(m - 1) * total / denom;
}

double binom(double p, int k) {
  double c = 1.0;
  for (int j = 0; j < k; ++j) c *= (p - j) / (j + 1);
  return c;
}

// 4-point Gauss-Legendre on [0,1]
constexpr std::array<double, 4> kGx = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281,
                                       0.9305681557970263};
constexpr std::array<double, 4> kGw = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731,
                                       0.1739274225687269};

struct Node {
  double x, w;
};

std::vector<Node> mapped_nodes(const corrector::Profile2D& prof) {
  const int N = prof.grid().nodes;
  const double c = prof.grid().map_scale;
  const double h = prof.xi_max() / N;
  std::vector<Node> out;
  out.reserve(static_cast<std::size_t>(N) * kGx.size());
  for (int k = 0; k < N; ++k)
    for (std::size_t g = 0; g < kGx.size(); ++g) {
      const double xi = (k + kGx[g]) * h;
      const double om = 1.0 - xi;
      out.push_back({c * xi / om, kGw[g] * h * c / (om * om)});
    }
  return out;
}

// Angular constants of the identity experiment for Y = θᵀSθ.
struct Angular {
  double S2 = 0, Q2 = 0, Y3 = 0, K = 0, QSS2 = 0, T3 = 0;
  double kappa_dn = 0, kappa_nn = 0;  // tr(S M)/|S|² for S_dn and S_dnn + 8S²
  double L4 = 0, L6 = 0;               // S_d2 contractions
};

Angular angular_constants(const CurvaturePoint& cp, const geometry::MetricJet& jet) {
  const int m = cp.n.boundary();
  const Eigen::MatrixXd& S = cp.S;
  Angular a;
  a.S2 = S.squaredNorm();
  if (a.S2 == 0.0) return a;
  const double omega = q::sphere_area(m - 1);
  a.Q2 = q::sphere_qq(S, S);
  a.Y3 = q::sphere_qqq(S, S, S);
  a.QSS2 = q::sphere_qq(S, S * S);
  a.T3 = omega * (S * S * S).trace() / m;
  if (jet.S_dn.size()) a.kappa_dn = (S * jet.S_dn).trace() / a.S2;
  Eigen::MatrixXd Mnn = 8.0 * S * S;
  if (jet.S_dnn.size()) Mnn += jet.S_dnn;
  a.kappa_nn = (S * Mnn).trace() / a.S2;
  // K = ∫ (Sθ)_i R̄_iksl θ_k θ_l (Sθ)_s
  const std::size_t m2 = std::size_t(m) * m;
  std::vector<double> Nt(m2 * m2, 0.0);  // (a,k,l,b)
  for (int a_ = 0; a_ < m; ++a_)
    for (int k = 0; k < m; ++k)
      for (int l = 0; l < m; ++l)
        for (int b = 0; b < m; ++b) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) {
            if (S(i, a_) == 0.0) continue;
            for (int s = 0; s < m; ++s) acc += S(i, a_) * cp.Rbar(i, k, s, l) * S(s, b);
          }
          Nt[((a_ * m + k) * m + l) * m + b] = acc;
        }
  a.K = sphere_contract([&](const int* ix) { return Nt[((ix[0] * m + ix[1]) * m + ix[2]) * m + ix[3]]; },
                        4, m);
  if (!jet.S_d2.empty()) {
    const auto& D = jet.S_d2;
    auto d2 = [&](int i, int j, int k, int l) { return D[((std::size_t(i) * m + j) * m + k) * m + l]; };
    std::vector<double> M4(m2 * m2, 0.0);  // (i,a,k,l) = Σ_j S_d2[ijkl] S_ja
    for (int i = 0; i < m; ++i)
      for (int a_ = 0; a_ < m; ++a_)
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += d2(i, j, k, l) * S(j, a_);
            M4[((i * m + a_) * m + k) * m + l] = acc;
          }
    a.L4 = sphere_contract(
        [&](const int* ix) { return M4[((ix[0] * m + ix[1]) * m + ix[2]) * m + ix[3]]; }, 4, m);
    a.L6 = sphere_contract([&](const int* ix) { return S(ix[0], ix[1]) * d2(ix[2], ix[3], ix[4], ix[5]); },
                           6, m);
  }
  return a;
}

}  // namespace

bool IdentityResult::passed() const {
  if (remainder.status == "degenerate") return true;
  return remainder.slope >= 4.5 && remainder.band_low() >= 4.2 && relative_gap <= 0.02;
}

IdentityResult verify_A4_L2_L3_identity(const CurvaturePoint& cp, const geometry::MetricJet& jet,
                                        const corrector::CorrectorSolution& sol,
                                        const IdentityOptions& opt) {
  if (!(sol.profile.n() == cp.n)) throw StructuralError("identity: profile dimension mismatch");
  if (opt.delta.size() < 5) throw DomainError("identity: δ-ladder needs at least five points");
  const int nn = cp.n.value();
  const int m = nn - 1;
  const corrector::Profile2D& prof = sol.profile;
  const Angular ang = angular_constants(cp, jet);
  const Cutoff chi{opt.cutoff_radius};
  const std::size_t nd = opt.delta.size();

  IdentityResult res;
  res.half_pairing = 0.5 * sol.diagnostics.dirichlet_pairing;
  res.remainder.name = "A4+L2+L3-identity";
  res.remainder.delta = opt.delta;
  std::vector<double> rem(nd, 0.0);

  const std::vector<Node> nodes = mapped_nodes(prof);
  const double p = 2.0 * (nn - 1) / (nn - 2);
  const double cbd = (nn - 2.0) * (nn - 2.0) / (2.0 * (nn - 1));

  // boundary term A4 along t = 0
  double a4 = 0.0;
  for (const Node& nr : nodes) {
    const double r = nr.x;
    const double psi = prof.eval(0.0, r).psi;
    const double U = std::pow(1.0 + r * r, -0.5 * (nn - 2));
    const double w = nr.w * std::pow(r, nn - 2);
    const double i4 = -cbd * binom(p, 2) * ang.Q2 * std::pow(U, p - 2) * psi * psi;
    const double i6 = -cbd * binom(p, 3) * ang.Y3 * std::pow(U, p - 3) * psi * psi * psi;
    a4 += w * i4;
    for (std::size_t d = 0; d < nd; ++d) {
      const double dl = opt.delta[d];
      const double cp_ = std::pow(chi.value(dl * r), p);
      rem[d] += w * (std::pow(dl, 4) * (cp_ - 1.0) * i4 + std::pow(dl, 6) * cp_ * i6);
    }
  }
  res.c4_A4 = a4;

  double l2 = 0.0, l3 = 0.0;
  for (const Node& nt : nodes) {
    const double t = nt.x;
    for (const Node& nr : nodes) {
      const double r = nr.x;
      const corrector::Profile2D::Eval e = prof.eval(t, r);
      const double w = nt.w * nr.w * std::pow(r, nn - 2);
      const double D = (1.0 + t) * (1.0 + t) + r * r;
      const double U = std::pow(D, -0.5 * (nn - 2));
      const double Ur = -(nn - 2) * r * std::pow(D, -0.5 * nn);
      const double rho = std::hypot(t, r);
      auto terms = [&](double c, double c1, double out[3]) {
        // c, c1: cutoff value and radial derivative in y-units at this node
        const double ps = e.psi * c;
        const double pr = e.psi_r * c + e.psi * c1 * r / rho;
        const double pt = e.psi_t * c + e.psi * c1 * t / rho;
        const double ur = Ur * c + U * c1 * r / rho;
        const double E = r * pr + m * ps;
        const double g = r * pr - 2.0 * ps;
        out[0] = t * t * (ur / r) * ang.Q2 * E + 0.5 * ang.Q2 * (pt * pt + pr * pr + 2.0 * m * ps * ps / (r * r));
        out[1] = (t * t * t / 3.0) * (ur / r) * ang.kappa_dn * ang.Q2 * E;
        const double l2_6 = (t * t / 6.0) * (ur / r) * 2.0 * ps * r * r * ang.K +
                            0.5 * t * t * (ur / r) * (g * r * r * ang.L6 + 2.0 * ps * r * r * ang.L4) +
                            (t * t * t * t / 12.0) * (ur / r) * ang.kappa_nn * ang.Q2 * E;
        const double l3_6 = 0.5 * ((4.0 / 3.0) * ps * ps * ang.K +
                                   t * t * (g * g / (r * r) * ang.Y3 + 4.0 * ps * g / (r * r) * ang.QSS2 +
                                            4.0 * ps * ps / (r * r) * ang.T3));
        out[2] = l2_6 + l3_6;
      };
      double base[3];
      terms(1.0, 0.0, base);
      l2 += w * t * t * (Ur / r) * ang.Q2 * (r * e.psi_r + m * e.psi);
      l3 += w * 0.5 * ang.Q2 * (e.psi_t * e.psi_t + e.psi_r * e.psi_r + 2.0 * m * e.psi * e.psi / (r * r));
      for (std::size_t d = 0; d < nd; ++d) {
        const double dl = opt.delta[d];
        const double c = chi.value(dl * rho);
        double cur[3];
        if (c == 1.0) {
          std::copy(base, base + 3, cur);
        } else {
          terms(c, dl * chi.d1(dl * rho), cur);
        }
        const double d4 = dl * dl * dl * dl;
        rem[d] += w * (d4 * (cur[0] - base[0]) + d4 * dl * cur[1] + d4 * dl * dl * cur[2]);
      }
    }
  }
  res.c4_L2 = l2;
  res.c4_L3 = l3;
  res.c4 = a4 + l2 + l3;
  res.relative_gap = res.half_pairing != 0.0 ? std::abs(res.c4 - res.half_pairing) / std::abs(res.half_pairing)
                                             : std::abs(res.c4);
  res.remainder.value = rem;
  res.remainder.error.assign(nd, 0.0);
  fit_slope(res.remainder);
  res.remainder.extra = {{"c4", res.c4},
                         {"half_pairing", res.half_pairing},
                         {"relative_gap", res.relative_gap}};
  return res;
}

std::string results_csv(const std::vector<ReducedCoefficients>& rows) {
  std::ostringstream os;
  os << "label,n,A,B,I2,I4,pairing,G2,G3,phi,slope_residual,slope_identity\n";
  os << std::setprecision(17);
  auto num = [&](double v) -> std::ostream& {
    if (std::isnan(v)) return os << "nan";
    return os << v;
  };
  for (const auto& r : rows) {
    os << r.label << ',' << r.n << ',';
    num(r.A) << ',';
    num(r.B) << ',';
    num(r.I2) << ',';
    num(r.I4) << ',';
    num(r.pairing) << ',';
    num(r.G2) << ',';
    num(r.G3) << ',';
    num(r.phi) << ',';
    num(r.slope_residual) << ',';
    num(r.slope_identity) << '\n';
  }
  return os.str();
}

}  // namespace blowup::energy
