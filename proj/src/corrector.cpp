#include "blowup/corrector.hpp"

#include "blowup/bubble.hpp"
#include "blowup/errors.hpp"
#include "blowup/quadrature.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace blowup::corrector {

namespace q = blowup::quadrature;

HarmonicPattern HarmonicPattern::from(const CurvaturePoint& cp) {
  HarmonicPattern p;
  p.S = cp.S;
  p.degree = 2;
  p.mu = 2.0 * (cp.n.value() - 1);
  return p;
}

double HarmonicPattern::y2_integral() const {
  return q::sphere_qq(S, S);
}

double HarmonicPattern::mean_integral() const {
  const int d = static_cast<int>(S.rows());
  return q::sphere_area(d - 1) * S.trace() / d;
}

double radial_A(Dim n, double t, double r) {
  const int nn = n.value();
  const double s = 1.0 + t;
  return nn * (nn - 2) * std::pow(s * s + r * r, -0.5 * (nn + 2));
}

double radial_B(Dim n, double t, double r) {
  const int nn = n.value();
  const double s = 1.0 + t;
  return -(nn - 2) * std::pow(s * s + r * r, -0.5 * nn);
}

double reduced_source(Dim n, double t, double r) { return t * t * r * r * radial_A(n, t, r); }

double ReducedRhs::eval(double t, const Eigen::VectorXd& z) const {
  return z.dot(pattern.S * z) * t * t * radial_A(n, t, z.norm());
}

ReducedRhs reduce_rhs(const CurvaturePoint& cp) {
  // R̄_ikjl z_k z_l z_i z_j = 0 (antisymmetry in (i,k)) and its δ_ij trace is a
  // Ricci contraction, so only the S t² channel survives.
  return ReducedRhs{HarmonicPattern::from(cp), cp.n};
}

double rhs_direct(const CurvaturePoint& cp, double t, const Eigen::VectorXd& z) {
  const int m = cp.n.boundary();
  const bubble::UDerivs d = bubble::eval_U_derivs(cp.n, bubble::HalfSpacePoint(t, z));
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double coef = cp.S(i, j) * t * t;
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) coef += cp.Rbar(i, k, j, l) * z(k) * z(l) / 3.0;
      acc += coef * d.hess(i, j);
    }
  return acc;
}

std::vector<double> check_solvability(const CurvaturePoint& cp, double tol) {
  const int nn = cp.n.value();
  const HarmonicPattern pat = HarmonicPattern::from(cp);
  std::vector<double> out(nn, 0.0);
  // b < n: the integrand Y(θ) r² t² A · j_b is odd in z_b, the angular factor
  // Y θ_b has odd total degree and integrates to zero.
  for (int b = 0; b < nn - 1; ++b) {
    std::vector<int> pattern(nn - 1, 0);
    pattern[b] = 1;
    double ang = 0.0;
    for (int i = 0; i < nn - 1; ++i)
      for (int j = 0; j < nn - 1; ++j) {
        if (pat.S(i, j) == 0.0) continue;
        std::vector<int> e = pattern;
        ++e[i];
        ++e[j];
        ang += pat.S(i, j) * q::sphere_monomial(nn - 1, e);
      }
    out[b] = ang;  // times a finite radial integral; the factor is exactly 0
  }
  // b = n: radial integral times the zero angular mean of Y
  const double mean = pat.mean_integral();
  if (mean != 0.0) {
    const bubble::HalfSpacePoint origin(0.0, Eigen::VectorXd::Zero(nn - 1));
    auto f = [&](double t, double r) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(nn - 1);
      z(0) = r;
      const double jn = bubble::eval_kernel(cp.n, nn, bubble::HalfSpacePoint(t, z));
      return reduced_source(cp.n, t, r) * jn * std::pow(r, nn - 2);
    };
    const q::QuadResult radial = q::integrate_quarter_disc(f, 1e4, tol);
    out[nn - 1] = radial.value * mean;
  }
  return out;
}

void GridConfig::validate() const {
  if (nodes < 8) throw DomainError("corrector grid needs at least 8 intervals");
  if (!(extent > 0.0) || !(map_scale > 0.0))
    throw DomainError("corrector grid extent and map scale must be positive");
  if (!(residual_tol > 0.0)) throw DomainError("corrector residual tolerance must be positive");
}

Profile2D::Profile2D(Dim n, GridConfig grid, Eigen::MatrixXd values)
    : n_(n), grid_(grid), values_(std::move(values)) {
  grid_.validate();
  xi_max_ = grid_.extent / (grid_.map_scale + grid_.extent);
  h_ = xi_max_ / grid_.nodes;
  if (values_.rows() != size() || values_.cols() != size())
    throw StructuralError("profile values do not match the grid");
}

double Profile2D::coord(int k) const {
  const double xi = k * h_;
  return grid_.map_scale * xi / (1.0 - xi);
}

namespace {

// Lagrange weights (value, first, second derivative) at s for nodes 0..3.
void lagrange4(double s, double w[3][4]) {
  for (int a = 0; a < 4; ++a) {
    double den = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) den *= a - b;
    double v = 1.0, d1 = 0.0, d2 = 0.0;
    // product over the other nodes of (s - b), with derivatives
    for (int b = 0; b < 4; ++b) {
      if (b == a) continue;
      const double f = s - b;
      d2 = d2 * f + 2.0 * d1;
      d1 = d1 * f + v;
      v *= f;
    }
    w[0][a] = v / den;
    w[1][a] = d1 / den;
    w[2][a] = d2 / den;
  }
}

}  // namespace

Profile2D::Eval Profile2D::eval(double t, double r) const {
  Eval out;
  if (t < 0.0 || r < 0.0 || t > grid_.extent || r > grid_.extent) return out;
  const double c = grid_.map_scale;
  const int N = grid_.nodes;
  auto locate = [&](double x, int& k0, double w[3][4], double& dxi, double& d2xi) {
    const double xi = x / (c + x);
    dxi = c / ((c + x) * (c + x));
    d2xi = -2.0 * c / ((c + x) * (c + x) * (c + x));
    const double u = xi / h_;
    k0 = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, N - 3);
    lagrange4(u - k0, w);
    // derivatives with respect to ξ
    for (int a = 0; a < 4; ++a) {
      w[1][a] /= h_;
      w[2][a] /= h_ * h_;
    }
  };
  int it = 0, ir = 0;
  double wt[3][4], wr[3][4], dt, d2t, dr, d2r;
  locate(t, it, wt, dt, d2t);
  locate(r, ir, wr, dr, d2r);
  double g[3][3] = {};  // g[p][q]: ∂^p_ξt ∂^q_ξr, p+q <= 2
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double v = values_(it + a, ir + b);
      for (int p = 0; p < 3; ++p)
        for (int qq = 0; qq + p < 3; ++qq) g[p][qq] += wt[p][a] * wr[qq][b] * v;
    }
  out.psi = g[0][0];
  out.psi_t = g[1][0] * dt;
  out.psi_r = g[0][1] * dr;
  out.psi_tt = g[2][0] * dt * dt + g[1][0] * d2t;
  out.psi_rr = g[0][2] * dr * dr + g[0][1] * d2r;
  out.psi_tr = g[1][1] * dt * dr;
  return out;
}

double CorrectorSolution::eval(double t, const Eigen::VectorXd& z) const {
  const double r = z.norm();
  if (r == 0.0) return 0.0;
  return profile.eval(t, r).psi * z.dot(pattern.S * z) / (r * r);
}

Profile2D solve_profile(Dim n, const GridConfig& grid, CorrectorDiagnostics* diag,
                        bool check_conditioning) {
  grid.validate();
  const int nn = n.value();
  const int N = grid.nodes;
  const int M = N + 1;
  const double c = grid.map_scale;
  const double xi_max = grid.extent / (c + grid.extent);
  const double h = xi_max / N;
  std::vector<double> x(M), x1(M), x2(M);
  for (int k = 0; k < M; ++k) {
    const double xi = k * h;
    x[k] = c * xi / (1.0 - xi);
    x1[k] = c / ((1.0 - xi) * (1.0 - xi));
    x2[k] = 2.0 * c / ((1.0 - xi) * (1.0 - xi) * (1.0 - xi));
  }
  auto idx = [M](int i, int j) { return i * M + j; };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(M) * M * 6);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M * M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      const int row = idx(i, j);
      const double t = x[i], r = x[j];
      if (j == 0) {
        // axis: ψ = O(r²)
        trip.emplace_back(row, row, 1.0);
      } else if (j == N) {
        // far field in r: ψ_r = (4-n) r/ρ² ψ, backward second-order difference
        const double d = 1.0 / (2.0 * h * x1[N]);
        const double rho2 = t * t + r * r;
        trip.emplace_back(row, idx(i, N), 3.0 * d - (4.0 - nn) * r / rho2);
        trip.emplace_back(row, idx(i, N - 1), -4.0 * d);
        trip.emplace_back(row, idx(i, N - 2), d);
      } else if (i == 0) {
        // ∂_t ψ = -n U^{2/(n-2)} ψ with U(0,r)^{2/(n-2)} = 1/(1+r²)
        const double d = 1.0 / (2.0 * h * x1[0]);
        trip.emplace_back(row, idx(0, j), -3.0 * d + nn / (1.0 + r * r));
        trip.emplace_back(row, idx(1, j), 4.0 * d);
        trip.emplace_back(row, idx(2, j), -d);
      } else if (i == N) {
        const double d = 1.0 / (2.0 * h * x1[N]);
        const double rho2 = t * t + r * r;
        trip.emplace_back(row, idx(N, j), 3.0 * d - (4.0 - nn) * t / rho2);
        trip.emplace_back(row, idx(N - 1, j), -4.0 * d);
        trip.emplace_back(row, idx(N - 2, j), d);
      } else {
        // -[ψ_tt + ψ_rr + (n-2)/r ψ_r - 2(n-1)/r² ψ] = t² r² A
        // ψ_xx = ψ_ξξ/x'² - x'' ψ_ξ/x'³,  ψ_x = ψ_ξ/x'
        const double at2 = 1.0 / (h * h * x1[i] * x1[i]);
        const double at1 = -x2[i] / (x1[i] * x1[i] * x1[i]) / (2.0 * h);
        const double ar2 = 1.0 / (h * h * x1[j] * x1[j]);
        const double ar1 = (-x2[j] / (x1[j] * x1[j] * x1[j]) + (nn - 2) / (r * x1[j])) / (2.0 * h);
        trip.emplace_back(row, idx(i - 1, j), -(at2 - at1));
        trip.emplace_back(row, idx(i + 1, j), -(at2 + at1));
        trip.emplace_back(row, idx(i, j - 1), -(ar2 - ar1));
        trip.emplace_back(row, idx(i, j + 1), -(ar2 + ar1));
        trip.emplace_back(row, row, 2.0 * at2 + 2.0 * ar2 + 2.0 * (nn - 1) / (r * r));
        rhs(row) = reduced_source(n, t, r);
      }
    }
  Eigen::SparseMatrix<double> A(M * M, M * M);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();

  // Boundary rows are normalized to unit max coefficient; interior rows keep the
  // physical scale of the operator so σ_min tracks the continuous problem rather
  // than the O(h²) of an equilibrated stencil.
  auto interior = [&](Eigen::Index row) {
    const int i = static_cast<int>(row) / M, j = static_cast<int>(row) % M;
    return i > 0 && i < N && j > 0 && j < N;
  };
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(M * M);
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      if (!interior(it.row())) scale(it.row()) = std::max(scale(it.row()), std::abs(it.value()));
  for (Eigen::Index k = 0; k < scale.size(); ++k)
    if (interior(k)) scale(k) = 1.0;
  // Unknowns are weighted by the expected decay (1+ρ²)^{(4-n)/2} so far-field
  // values keep their relative accuracy through the factorization.
  Eigen::VectorXd weight(M * M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      weight(idx(i, j)) = std::pow(1.0 + x[i] * x[i] + x[j] * x[j], 0.5 * (4.0 - nn));
  Eigen::SparseMatrix<double> As = scale.cwiseInverse().asDiagonal() * A * weight.asDiagonal();
  const Eigen::VectorXd bs = rhs.cwiseQuotient(scale);

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(As);
  if (lu.info() != Eigen::Success)
    throw NumericError("corrector: sparse factorization failed (" + lu.lastErrorMessage() + ")");
  Eigen::VectorXd psi = weight.cwiseProduct(lu.solve(bs));
  if (lu.info() != Eigen::Success || !psi.allFinite())
    throw NumericError("corrector: sparse solve failed");

  const double residual = (A * psi - rhs).cwiseAbs().maxCoeff();
  if (!(residual <= grid.residual_tol)) {
    std::ostringstream os;
    os << "corrector: residual " << residual << " above " << grid.residual_tol << "; refine the grid (nodes=" << N
       << ") or reduce the extent";
    throw NumericError(os.str());
  }

  double sigma_min = 0.0;
  if (check_conditioning) {
    // the ℓ = 2 channel carries no kernel (j_b live in ℓ = 0, 1), so the reduced
    // operator must stay invertible; estimate σ_min by inverse power iteration on AᵀA
    Eigen::VectorXd v = Eigen::VectorXd::Ones(M * M).normalized();
    double lam = 0.0;
    for (int iter = 0; iter < 40; ++iter) {
      // (S A)^{-1} = W (S A W)^{-1}
      const Eigen::VectorXd w1 = lu.transpose().solve(weight.cwiseProduct(v));
      Eigen::VectorXd w = weight.cwiseProduct(lu.solve(w1));
      const double nrm = w.norm();
      const double prev = lam;
      lam = nrm;
      v = w / nrm;
      if (iter > 3 && std::abs(lam - prev) <= 1e-6 * lam) break;
    }
    sigma_min = 1.0 / std::sqrt(lam);
    if (!(sigma_min >= 1e-6)) {
      std::ostringstream os;
      os << "corrector: reduced operator nearly singular (sigma_min=" << sigma_min << ")";
      throw NumericError(os.str());
    }
  }

  Eigen::MatrixXd values(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) values(i, j) = j == 0 ? 0.0 : psi(idx(i, j));  // axis rows are ψ = 0 exactly
  Profile2D prof(n, grid, std::move(values));
  if (diag) {
    diag->residual = residual;
    diag->sigma_min = sigma_min;
    diag->radial_pairing = radial_pairing(prof);
    diag->decay_exponent = fit_decay(prof, 0.25 * grid.extent, 0.5 * grid.extent);
  }
  return prof;
}

double radial_pairing(const Profile2D& profile) {
  const int M = profile.size();
  const int nn = profile.n().value();
  const double c = profile.grid().map_scale;
  const double h = profile.xi_max() / profile.grid().nodes;
  std::vector<double> x(M), w(M);
  for (int k = 0; k < M; ++k) {
    const double xi = k * h;
    x[k] = c * xi / (1.0 - xi);
    w[k] = h * c / ((1.0 - xi) * (1.0 - xi)) * ((k == 0 || k == M - 1) ? 0.5 : 1.0);
  }
  double acc = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = 1; j < M; ++j)
      acc += w[i] * w[j] * profile.values()(i, j) * reduced_source(profile.n(), x[i], x[j]) *
             std::pow(x[j], nn - 2);
  return acc;
}

double fit_decay(const Profile2D& profile, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int j = 1; j < profile.size(); ++j) {
    const double r = profile.coord(j);
    if (r < lo || r > hi) continue;
    const double v = std::abs(profile.values()(0, j));
    if (v == 0.0) continue;
    const double lx = std::log(r), ly = std::log(v);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt < 3) throw NumericError("decay fit: fewer than three nodes in the window");
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

CorrectorSolution attach_pattern(const CurvaturePoint& cp, const Profile2D& profile,
                                 const CorrectorDiagnostics& base) {
  if (!(cp.n == profile.n())) throw StructuralError("profile dimension does not match curvature point");
  CorrectorSolution sol;
  sol.profile = profile;
  sol.pattern = HarmonicPattern::from(cp);
  auto& d = sol.diagnostics;
  d = base;
  d.orthogonality_mean = sol.pattern.mean_integral();
  // ∫_∂ U^{n/(n-2)} v_q = (∫ U(0,r)^{n/(n-2)} ψ(0,r) r^{n-2} dr) · ∫ Y
  d.orthogonality = 0.0;
  if (d.orthogonality_mean != 0.0) {
    double radial = 0.0;
    const int nn = cp.n.value();
    for (int j = 1; j + 1 < profile.size(); ++j) {
      const double r0 = profile.coord(j), r1 = profile.coord(j + 1);
      auto g = [&](int jj, double r) {
        return std::pow(1.0 + r * r, -0.5 * nn) * profile.values()(0, jj) * std::pow(r, nn - 2);
      };
      radial += 0.5 * (r1 - r0) * (g(j, r0) + g(j + 1, r1));
    }
    d.orthogonality = radial * d.orthogonality_mean;
  }
  d.kernel_pairing_max = std::abs(d.orthogonality);
  d.dirichlet_pairing = -sol.pattern.y2_integral() * d.radial_pairing;
  return sol;
}

CorrectorSolution solve_vq(const CurvaturePoint& cp, const GridConfig& grid) {
  CorrectorDiagnostics base;
  const Profile2D prof = solve_profile(cp.n, grid, &base);
  return attach_pattern(cp, prof, base);
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  os << "decay " << decay_exponent << (decay_ok ? " ok" : " FAIL") << "; orthogonality "
     << orthogonality << (orthogonality_ok ? " ok" : " FAIL") << "; pairing " << pairing
     << (sign_ok ? " ok" : " FAIL");
  return os.str();
}

VerificationReport verify_corrector(const CorrectorSolution& sol) {
  VerificationReport rep;
  const int nn = sol.profile.n().value();
  const auto& d = sol.diagnostics;
  rep.decay_exponent = d.decay_exponent;
  rep.decay_ok = std::abs(d.decay_exponent - (4.0 - nn)) <= 0.5;
  const double s_scale = sol.pattern.S.norm() * q::sphere_area(nn - 2);
  rep.orthogonality_ok = std::abs(d.orthogonality_mean) <= 1e-14 * std::max(1.0, s_scale);
  // exact in the ℓ = 2 channel once the angular mean vanishes
  rep.orthogonality = rep.orthogonality_ok ? 0.0 : d.orthogonality;
  rep.pairing = d.dirichlet_pairing;
  const double pscale = sol.pattern.y2_integral() * std::abs(d.radial_pairing);
  rep.sign_ok = rep.pairing <= 1e-8 * pscale;
  return rep;
}

ConvergenceStudy self_convergence(Dim n, const GridConfig& coarse) {
  ConvergenceStudy st;
  std::vector<Profile2D> profs;
  for (int level = 0; level < 3; ++level) {
    GridConfig g = coarse;
    g.nodes = coarse.nodes << level;
    profs.push_back(solve_profile(n, g, nullptr, false));
    st.nodes.push_back(g.nodes);
    st.pairings.push_back(radial_pairing(profs.back()));
  }
  st.order_pairing = std::log2(std::abs(st.pairings[1] - st.pairings[0]) /
                               std::abs(st.pairings[2] - st.pairings[1]));
  // node values on the coarse grid, skipping the far boundary rows
  double e01 = 0.0, e12 = 0.0;
  const int M = coarse.nodes + 1;
  for (int i = 0; i < M - 1; ++i)
    for (int j = 0; j < M - 1; ++j) {
      const double a = profs[0].values()(i, j);
      const double b = profs[1].values()(2 * i, 2 * j);
      const double c = profs[2].values()(4 * i, 4 * j);
      e01 = std::max(e01, std::abs(a - b));
      e12 = std::max(e12, std::abs(b - c));
    }
  st.order_nodal = std::log2(e01 / e12);
  return st;
}

Eigen::VectorXd map_to_ball(const Eigen::VectorXd& y) {
  const int nn = static_cast<int>(y.size());
  if (nn < 2) throw StructuralError("map_to_ball: point needs at least two coordinates");
  if (!(y(nn - 1) >= 0.0)) throw DomainError("map_to_ball: point is outside the closed half-space");
  Eigen::VectorXd w = y;
  w(nn - 1) += 1.0;
  Eigen::VectorXd xi = w / w.squaredNorm();
  xi(nn - 1) -= 1.0;
  return xi;
}

double eval_fq(const CurvaturePoint& cp, const Eigen::VectorXd& xi) {
  const int nn = cp.n.value();
  if (xi.size() != nn) throw StructuralError("eval_fq: ξ has wrong dimension");
  Eigen::VectorXd w = xi;
  w(nn - 1) += 1.0;
  const double w2 = w.squaredNorm();
  if (w2 < 1e-300) throw DomainError("eval_fq: ξ is the image of the point at infinity");
  Eigen::VectorXd y = w / w2;
  y(nn - 1) -= 1.0;
  if (y(nn - 1) < -1e-12) throw DomainError("eval_fq: ξ lies outside the image ball");
  const double t = std::max(0.0, y(nn - 1));
  const Eigen::VectorXd z = y.head(nn - 1);
  const double u = bubble::eval_U(cp.n, bubble::HalfSpacePoint(t, z));
  return rhs_direct(cp, t, z) * std::pow(u, -double(nn + 2) / (nn - 2));
}

std::string profile_csv(const Profile2D& profile) {
  std::ostringstream os;
  os << std::setprecision(17) << "t,r,psi\n";
  for (int i = 0; i < profile.size(); ++i)
    for (int j = 0; j < profile.size(); ++j)
      os << profile.coord(i) << ',' << profile.coord(j) << ',' << profile.values()(i, j) << '\n';
  return os.str();
}

std::string diagnostics_json(const CorrectorSolution& sol) {
  const auto& d = sol.diagnostics;
  const auto& g = sol.profile.grid();
  nlohmann::ordered_json j;
  j["residual"] = d.residual;
  j["decay_exponent"] = d.decay_exponent;
  j["pairing"] = d.dirichlet_pairing;
  j["radial_pairing"] = d.radial_pairing;
  j["sigma_min"] = d.sigma_min;
  j["orthogonality"] = d.orthogonality;
  j["grid"] = {{"nodes", g.nodes}, {"extent", g.extent}, {"map_scale", g.map_scale},
               {"n", sol.profile.n().value()}, {"far_exponent", sol.profile.far_exponent()}};
  return j.dump(2) + "\n";
}

}  // namespace blowup::corrector
