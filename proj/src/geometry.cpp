#include "blowup/geometry.hpp"

#include "blowup/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace blowup::geometry {

Dim::Dim(int n, bool allow_exploratory) : n_(n) {
  const int floor = allow_exploratory ? kExploratoryMinimum : kMinimum;
  if (n < floor) {
    std::ostringstream os;
    os << "dimension n=" << n << " below the supported minimum " << floor;
    throw DomainError(os.str());
  }
}

double Tensor4::norm_squared() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

double Tensor4::max_abs() const {
  double s = 0.0;
  for (double v : data_) s = std::max(s, std::abs(v));
  return s;
}

Tensor4 project_curvature(const Tensor4& t) {
  const int m = t.extent();
  Tensor4 a(m);
  // antisymmetrize both pairs, then symmetrize under pair exchange
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) {
          auto anti = [&](int p, int q, int r, int s) {
            return 0.25 * (t(p, q, r, s) - t(q, p, r, s) - t(p, q, s, r) + t(q, p, s, r));
          };
          a(i, k, j, l) = 0.5 * (anti(i, k, j, l) + anti(j, l, i, k));
        }
  // remove the totally antisymmetric part (cyclic sum over the last three slots)
  Tensor4 r(m);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) {
          const double cyc = a(i, k, j, l) + a(i, j, l, k) + a(i, l, k, j);
          r(i, k, j, l) = a(i, k, j, l) - cyc / 3.0;
        }
  return r;
}

Eigen::MatrixXd ricci(const Tensor4& t) {
  const int m = t.extent();
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) ric(i, j) += t(i, k, j, k);
  return ric;
}

Tensor4 weyl_part(const Tensor4& r) {
  const int m = r.extent();
  if (m < 3) return Tensor4(m);
  const Eigen::MatrixXd ric = ricci(r);
  const double scal = ric.trace();
  // Schouten tensor in dimension m
  const Eigen::MatrixXd p =
      (ric - scal / (2.0 * (m - 1)) * Eigen::MatrixXd::Identity(m, m)) / (m - 2);
  Tensor4 w(m);
  auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) {
          const double kn = p(i, j) * d(k, l) + p(k, l) * d(i, j) - p(i, l) * d(k, j) -
                            p(k, j) * d(i, l);
          w(i, k, j, l) = r(i, k, j, l) - kn;
        }
  return w;
}

CurvaturePoint CurvaturePoint::zero(Dim n, std::string label) {
  CurvaturePoint cp;
  cp.n = n;
  cp.Rbar = Tensor4(n.boundary());
  cp.S = Eigen::MatrixXd::Zero(n.boundary(), n.boundary());
  cp.label = std::move(label);
  return cp;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::string ValidationReport::failures() const {
  std::string out;
  for (const auto& c : checks) {
    if (c.pass) continue;
    if (!out.empty()) out += ", ";
    out += c.name;
  }
  return out;
}

ValidationReport validate_curvature(const CurvaturePoint& cp, double tol_sym) {
  const int m = cp.n.boundary();
  if (cp.Rbar.extent() != m || cp.S.rows() != m || cp.S.cols() != m) {
    std::ostringstream os;
    os << "curvature arrays do not match n=" << cp.n.value() << " (Rbar extent "
       << cp.Rbar.extent() << ", S " << cp.S.rows() << "x" << cp.S.cols() << ")";
    throw StructuralError(os.str());
  }
  const Tensor4& R = cp.Rbar;
  const double rscale = std::sqrt(R.norm_squared());
  const double sscale = cp.S.norm();

  double anti_ik = 0, anti_jl = 0, pair = 0, bianchi = 0, trace = 0;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) {
          const double v = R(i, k, j, l);
          anti_ik = std::max(anti_ik, std::abs(v + R(k, i, j, l)));
          anti_jl = std::max(anti_jl, std::abs(v + R(i, k, l, j)));
          pair = std::max(pair, std::abs(v - R(j, l, i, k)));
          bianchi = std::max(bianchi, std::abs(v + R(i, j, l, k) + R(i, l, k, j)));
        }
  trace = ricci(R).cwiseAbs().maxCoeff();

  ValidationReport rep;
  auto add = [&](std::string name, double violation, double scale) {
    const double thr = tol_sym * scale;
    rep.checks.push_back({std::move(name), violation, thr, violation <= thr});
  };
  add("Rbar antisymmetry (i,k)", anti_ik, rscale);
  add("Rbar antisymmetry (j,l)", anti_jl, rscale);
  add("Rbar pair symmetry", pair, rscale);
  add("Rbar first Bianchi", bianchi, rscale);
  add("Rbar Ricci trace", trace, rscale);
  add("S symmetric", (cp.S - cp.S.transpose()).cwiseAbs().maxCoeff(), sscale);
  add("S trace", std::abs(cp.S.trace()), sscale);
  const double s2 = cp.S.squaredNorm();
  add("Rnnnn = -2|S|^2", std::abs(cp.Rnnnn + 2.0 * s2), std::max(std::abs(cp.Rnnnn), 2.0 * s2));
  // only enforced when the full tensor is supplied; a zero Rbar leaves Wbar2 free
  if (rscale > 0.0)
    add("Wbar2 = |Rbar|^2", std::abs(cp.Wbar2 - R.norm_squared()),
        std::max(std::abs(cp.Wbar2), R.norm_squared()));
  rep.checks.push_back({"Wbar2 >= 0", std::max(0.0, -cp.Wbar2), 0.0, cp.Wbar2 >= 0.0});
  const bool finite = std::isfinite(cp.D2) && std::isfinite(cp.gamma) && std::isfinite(cp.Rnnnn);
  rep.checks.push_back({"finite scalars", finite ? 0.0 : 1.0, 0.0, finite});
  return rep;
}

void require_valid(const CurvaturePoint& cp, double tol_sym) {
  const auto rep = validate_curvature(cp, tol_sym);
  if (!rep.passed())
    throw ValidationError("curvature point '" + cp.label + "' violates: " + rep.failures());
}

namespace {

Eigen::MatrixXd random_traceless_symmetric(int m, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = normal(rng);
  Eigen::MatrixXd s = 0.5 * scale * (a + a.transpose());
  s -= (s.trace() / m) * Eigen::MatrixXd::Identity(m, m);
  return s;
}

std::vector<double> random_vector(std::size_t size, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(size);
  for (auto& x : v) x = scale * normal(rng);
  return v;
}

// Isotropic R_ninj,kl with zero ij-trace and double contraction d2.
std::vector<double> isotropic_s_d2(int m, double d2) {
  std::vector<double> e(static_cast<std::size_t>(m) * m * m * m, 0.0);
  auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  const double contraction = 0.5 * m * (m + 1) - 1.0;
  const double c = d2 / contraction;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l)
          e[((static_cast<std::size_t>(i) * m + j) * m + k) * m + l] =
              c * (0.5 * (d(i, k) * d(j, l) + d(i, l) * d(j, k)) - d(i, j) * d(k, l) / m);
  return e;
}

}  // namespace

CurvaturePoint generate_sample(Dim n, std::uint64_t seed, double scale) {
  if (!(scale >= 0.0)) throw DomainError("generate_sample: scale must be non-negative");
  const int m = n.boundary();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.5, 1.5);

  CurvaturePoint cp = CurvaturePoint::zero(n, "q" + std::to_string(seed));
  Tensor4 raw(m);
  for (auto& v : raw.data()) v = scale * normal(rng);
  cp.Rbar = weyl_part(project_curvature(raw));
  cp.S = random_traceless_symmetric(m, rng, scale);
  cp.Rnnnn = -2.0 * cp.S.squaredNorm();
  cp.Wbar2 = cp.Rbar.norm_squared();
  cp.D2 = scale * normal(rng);
  cp.gamma = uni(rng);
  return cp;
}

double weyl_norm_consistency(const CurvaturePoint& cp, RiiConvention convention) {
  const double per_index = -cp.Wbar2 / 6.0;
  return convention == RiiConvention::Summed ? per_index : per_index * cp.n.boundary();
}

MetricJet isotropic_jet(const CurvaturePoint& cp) {
  const int m = cp.n.boundary();
  MetricJet jet;
  jet.S_dn = Eigen::MatrixXd::Zero(m, m);
  jet.S_d2 = isotropic_s_d2(m, cp.D2);
  jet.S_dnn = (cp.Rnnnn / m) * Eigen::MatrixXd::Identity(m, m);
  return jet;
}

MetricJet generate_jet(const CurvaturePoint& cp, std::uint64_t seed, double scale,
                       bool include_second_boundary_derivatives) {
  const int m = cp.n.boundary();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  MetricJet jet = isotropic_jet(cp);

  // R̄_ikjl,m: each slice in m carries curvature symmetries
  jet.Rbar_d1.assign(static_cast<std::size_t>(m) * m * m * m * m, 0.0);
  for (int s = 0; s < m; ++s) {
    Tensor4 raw(m);
    for (auto& v : raw.data()) v = scale * std::normal_distribution<double>(0.0, 1.0)(rng);
    const Tensor4 slice = project_curvature(raw);
    for (std::size_t idx = 0; idx < slice.data().size(); ++idx)
      jet.Rbar_d1[idx * m + s] = slice.data()[idx];
  }
  if (include_second_boundary_derivatives) {
    jet.Rbar_d2.assign(static_cast<std::size_t>(m) * m * m * m * m * m, 0.0);
    for (int s = 0; s < m; ++s)
      for (int u = s; u < m; ++u) {
        Tensor4 raw(m);
        for (auto& v : raw.data()) v = scale * std::normal_distribution<double>(0.0, 1.0)(rng);
        const Tensor4 slice = project_curvature(raw);
        for (std::size_t idx = 0; idx < slice.data().size(); ++idx) {
          jet.Rbar_d2[(idx * m + s) * m + u] = slice.data()[idx];
          jet.Rbar_d2[(idx * m + u) * m + s] = slice.data()[idx];
        }
      }
  }

  auto sym_in_ij = [m](std::vector<double>& v, int tail) {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        for (int r = 0; r < tail; ++r) {
          auto& a = v[(static_cast<std::size_t>(i) * m + j) * tail + r];
          auto& b = v[(static_cast<std::size_t>(j) * m + i) * tail + r];
          a = b = 0.5 * (a + b);
        }
  };
  jet.S_d1 = random_vector(static_cast<std::size_t>(m) * m * m, rng, scale);
  sym_in_ij(jet.S_d1, m);
  jet.S_dnk = random_vector(static_cast<std::size_t>(m) * m * m, rng, scale);
  sym_in_ij(jet.S_dnk, m);
  jet.S_dn = random_traceless_symmetric(m, rng, scale);

  // R_ninj,nn: random symmetric part with the trace fixed to R_nn,nn
  jet.S_dnn += random_traceless_symmetric(m, rng, scale);

  // R_ninj,kl: isotropic part plus random trace-free perturbation with zero double contraction
  std::vector<double> pert = random_vector(static_cast<std::size_t>(m) * m * m * m, rng, scale);
  sym_in_ij(pert, m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = k + 1; l < m; ++l) {
          auto& a = pert[((static_cast<std::size_t>(i) * m + j) * m + k) * m + l];
          auto& b = pert[((static_cast<std::size_t>(i) * m + j) * m + l) * m + k];
          a = b = 0.5 * (a + b);
        }
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) {
      double tr = 0.0;
      for (int i = 0; i < m; ++i) tr += pert[((static_cast<std::size_t>(i) * m + i) * m + k) * m + l];
      for (int i = 0; i < m; ++i) pert[((static_cast<std::size_t>(i) * m + i) * m + k) * m + l] -= tr / m;
    }
  double dc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) dc += pert[((static_cast<std::size_t>(i) * m + j) * m + i) * m + j];
  const std::vector<double> unit = isotropic_s_d2(m, 1.0);
  for (std::size_t idx = 0; idx < pert.size(); ++idx) jet.S_d2[idx] += pert[idx] - dc * unit[idx];
  return jet;
}

MetricExpansion::MetricExpansion(const CurvaturePoint& cp)
    : MetricExpansion(cp, isotropic_jet(cp)) {}

MetricExpansion::MetricExpansion(const CurvaturePoint& cp, MetricJet jet)
    : n_(cp.n.value()), m_(cp.n.boundary()), Rbar_(cp.Rbar), S_(cp.S), jet_(std::move(jet)) {
  const int m = m_;
  const auto m2 = static_cast<std::size_t>(m) * m;
  if (jet_.S_dn.size() == 0) jet_.S_dn = Eigen::MatrixXd::Zero(m, m);
  if (jet_.S_dnn.size() == 0) jet_.S_dnn = Eigen::MatrixXd::Zero(m, m);

  // sum_i (R̄_iijk + R̄_ikji)
  rbar_trace_ = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < m; ++i) rbar_trace_(j, k) += Rbar_(i, i, j, k) + Rbar_(i, k, j, i);

  if (!jet_.Rbar_d1.empty()) {
    auto d1 = [&](int i, int k, int j, int l, int s) {
      return jet_.Rbar_d1[(((static_cast<std::size_t>(i) * m + k) * m + j) * m + l) * m + s];
    };
    d1_trace_.assign(m2 * m, 0.0);
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += d1(i, i, j, a, b) + d1(i, a, j, i, b) + d1(i, a, j, b, i);
          d1_trace_[(static_cast<std::size_t>(j) * m + a) * m + b] = acc;
        }
  }
  if (!jet_.Rbar_d2.empty()) {
    auto d2 = [&](int i, int k, int j, int l, int s, int u) {
      return jet_.Rbar_d2[((((static_cast<std::size_t>(i) * m + k) * m + j) * m + l) * m + s) * m + u];
    };
    d2_trace_.assign(m2 * m2, 0.0);
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int c = 0; c < m; ++c) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
              acc += d2(i, i, j, a, b, c) + d2(i, a, j, i, b, c) + d2(i, a, j, b, i, c) +
                     d2(i, a, j, b, c, i);
            d2_trace_[((static_cast<std::size_t>(j) * m + a) * m + b) * m + c] = acc;
          }
  }
  s_d1_trace_ = Eigen::MatrixXd::Zero(m, 1);
  if (!jet_.S_d1.empty())
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) s_d1_trace_(j, 0) += jet_.S_d1[(static_cast<std::size_t>(i) * m + j) * m + i];
  s_d2_trace_ = Eigen::MatrixXd::Zero(m, m);
  if (!jet_.S_d2.empty())
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l)
        for (int i = 0; i < m; ++i)
          s_d2_trace_(j, l) += jet_.S_d2[((static_cast<std::size_t>(i) * m + j) * m + i) * m + l] +
                               jet_.S_d2[((static_cast<std::size_t>(i) * m + j) * m + l) * m + i];
  s_dnk_trace_ = Eigen::VectorXd::Zero(m);
  if (!jet_.S_dnk.empty())
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) s_dnk_trace_(j) += jet_.S_dnk[(static_cast<std::size_t>(i) * m + j) * m + i];
}

MetricBlocks MetricExpansion::blocks(const Eigen::Ref<const Eigen::VectorXd>& z, double t) const {
  const int m = m_;
  if (z.size() != m) throw StructuralError("metric expansion: z has wrong length");
  MetricBlocks b{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m),
                 Eigen::MatrixXd::Zero(m, m)};
  const double t2 = t * t, t3 = t2 * t, t4 = t2 * t2;

  // A_is = R̄_iksl z_k z_l (symmetric)
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int s = 0; s < m; ++s) {
      double acc = 0.0;
      for (int k = 0; k < m; ++k) {
        if (z(k) == 0.0) continue;
        double inner = 0.0;
        for (int l = 0; l < m; ++l) inner += Rbar_(i, k, s, l) * z(l);
        acc += inner * z(k);
      }
      A(i, s) = acc;
    }
  b.deg2 = A / 3.0 + t2 * S_;

  if (!jet_.Rbar_d1.empty()) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) {
            const std::size_t base = (((static_cast<std::size_t>(i) * m + k) * m + j) * m + l) * m;
            double inner = 0.0;
            for (int s = 0; s < m; ++s) inner += jet_.Rbar_d1[base + s] * z(s);
            acc += inner * z(k) * z(l);
          }
        b.deg3(i, j) = acc / 6.0;
      }
  }
  if (!jet_.S_d1.empty())
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k) acc += jet_.S_d1[(static_cast<std::size_t>(i) * m + j) * m + k] * z(k);
        b.deg3(i, j) += t2 * acc;
      }
  b.deg3 += (t3 / 3.0) * jet_.S_dn;

  b.deg4 = (A * A) / 15.0;
  if (!jet_.Rbar_d2.empty()) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l)
            for (int s = 0; s < m; ++s) {
              const std::size_t base =
                  ((((static_cast<std::size_t>(i) * m + k) * m + j) * m + l) * m + s) * m;
              double inner = 0.0;
              for (int u = 0; u < m; ++u) inner += jet_.Rbar_d2[base + u] * z(u);
              acc += inner * z(k) * z(l) * z(s);
            }
        b.deg4(i, j) += acc / 20.0;
      }
  }
  if (t != 0.0) {
    Eigen::MatrixXd mixed = (A * S_ + S_ * A) / 6.0;  // (1/3) Sym_ij(R̄_iksl S_sj) z_k z_l
    if (!jet_.S_d2.empty())
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          double acc = 0.0;
          for (int k = 0; k < m; ++k) {
            const std::size_t base = ((static_cast<std::size_t>(i) * m + j) * m + k) * m;
            double inner = 0.0;
            for (int l = 0; l < m; ++l) inner += jet_.S_d2[base + l] * z(l);
            acc += inner * z(k);
          }
          mixed(i, j) += 0.5 * acc;
        }
    b.deg4 += t2 * mixed;
    if (!jet_.S_dnk.empty())
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          double acc = 0.0;
          for (int k = 0; k < m; ++k) acc += jet_.S_dnk[(static_cast<std::size_t>(i) * m + j) * m + k] * z(k);
          b.deg4(i, j) += t3 * acc / 3.0;
        }
    b.deg4 += (t4 / 12.0) * (jet_.S_dnn + 8.0 * S_ * S_);
  }
  return b;
}

DivergenceBlocks MetricExpansion::divergence(const Eigen::Ref<const Eigen::VectorXd>& z,
                                             double t) const {
  const int m = m_;
  if (z.size() != m) throw StructuralError("metric expansion: z has wrong length");
  DivergenceBlocks d{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  const double t2 = t * t, t3 = t2 * t;

  d.deg2 = rbar_trace_ * z / 3.0;

  if (!d1_trace_.empty())
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) acc += d1_trace_[(static_cast<std::size_t>(j) * m + a) * m + b] * z(a) * z(b);
      d.deg3(j) = acc / 6.0;
    }
  d.deg3 += t2 * s_d1_trace_.col(0);

  // (1/15) R̄R̄ block: g = A A with A_is = R̄_iksl z_k z_l
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);  // sum_i ∂_i A_is
  std::vector<double> dA(static_cast<std::size_t>(m) * m * m, 0.0);  // (j,i,s): ∂_i A_js
  for (int i = 0; i < m; ++i)
    for (int s = 0; s < m; ++s)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) A(i, s) += Rbar_(i, k, s, l) * z(k) * z(l);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      for (int s = 0; s < m; ++s) {
        double acc = 0.0;
        for (int l = 0; l < m; ++l) acc += Rbar_(j, i, s, l) * z(l) + Rbar_(j, l, s, i) * z(l);
        dA[(static_cast<std::size_t>(j) * m + i) * m + s] = acc;
      }
  for (int s = 0; s < m; ++s)
    for (int i = 0; i < m; ++i) w(s) += dA[(static_cast<std::size_t>(i) * m + i) * m + s];
  for (int j = 0; j < m; ++j) {
    double acc = w.dot(A.row(j).transpose());
    // sum_{i,s} A_is ∂_i A_js ; ∂_i A_js = dA(j,i,s)
    for (int i = 0; i < m; ++i)
      for (int s = 0; s < m; ++s) acc += A(i, s) * dA[(static_cast<std::size_t>(j) * m + i) * m + s];
    d.deg4(j) = acc / 15.0;
  }
  if (!d2_trace_.empty())
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int c = 0; c < m; ++c)
            acc += d2_trace_[((static_cast<std::size_t>(j) * m + a) * m + b) * m + c] * z(a) * z(b) * z(c);
      d.deg4(j) += acc / 20.0;
    }
  if (t != 0.0) {
    // (1/6) t^2 (A S + S A): sum_i ∂_i (AS)_ij = (w^T S)_j ; sum_i ∂_i (SA)_ij = sum_{i,s} S_is ∂_i A_sj
    Eigen::VectorXd mixed = S_.transpose() * w;
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int i = 0; i < m; ++i)
        for (int s = 0; s < m; ++s) acc += S_(i, s) * dA[(static_cast<std::size_t>(s) * m + i) * m + j];
      mixed(j) += acc;
    }
    d.deg4 += t2 * (mixed / 6.0 + 0.5 * s_d2_trace_ * z);
    d.deg4 += (t3 / 3.0) * s_dnk_trace_;
  }
  return d;
}

Eigen::MatrixXd eval_metric_inverse(const MetricExpansion& me,
                                    const Eigen::Ref<const Eigen::VectorXd>& y) {
  const int n = me.n();
  if (y.size() != n) throw StructuralError("eval_metric_inverse: y must have n entries");
  const auto blocks = me.blocks(y.head(n - 1), y(n - 1));
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  g.topLeftCorner(n - 1, n - 1) += blocks.total();
  g = (0.5 * (g + g.transpose())).eval();
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
  if (lmin < 1e-8) {
    std::ostringstream os;
    os << "truncated inverse metric is not positive definite at |y|=" << y.norm()
       << " (min eigenvalue " << lmin << ")";
    throw DomainError(os.str());
  }
  return g;
}

}  // namespace blowup::geometry
