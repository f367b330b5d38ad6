#include "blowup/quadrature.hpp"

#include "blowup/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

namespace blowup::quadrature {

namespace gk = boost::math::quadrature;

double sphere_area(int m) {
  if (m < 0) throw DomainError("sphere_area: m must be >= 0");
  const double h = 0.5 * (m + 1);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double sphere_monomial(int dim, const std::vector<int>& exponents) {
  if (static_cast<int>(exponents.size()) > dim)
    throw StructuralError("sphere monomial: more exponents than coordinates");
  int degree = 0;
  double lg = 0.0;
  for (int a : exponents) {
    if (a < 0) throw DomainError("sphere monomial: negative exponent");
    if (a % 2 != 0) return 0.0;
    degree += a;
    lg += std::lgamma(0.5 * (a + 1));
  }
  // coordinates with exponent 0 contribute Γ(1/2) each
  lg += (dim - static_cast<int>(exponents.size())) * std::lgamma(0.5);
  lg -= std::lgamma(0.5 * (degree + dim));
  return 2.0 * std::exp(lg);
}

double angular_moment(Dim n, const std::vector<int>& pattern) {
  int degree = 0;
  for (int a : pattern) degree += a;
  if (degree > 4) throw DomainError("angular_moment: unsupported pattern of degree > 4");
  return sphere_monomial(n.boundary(), pattern);
}

// Sphere averages follow from Gaussian moments: E[x^α] for x ~ N(0,I) equals
// E[θ^α] · 2^{k} Γ(dim/2 + k)/Γ(dim/2) with |α| = 2k.
double sphere_qq(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int d = static_cast<int>(A.rows());
  const double gauss = A.trace() * B.trace() + 2.0 * (A * B).trace();
  return sphere_area(d - 1) * gauss / (d * (d + 2.0));
}

double sphere_qqq(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) {
  const int d = static_cast<int>(A.rows());
  const double gauss = A.trace() * B.trace() * C.trace() +
                       2.0 * (A.trace() * (B * C).trace() + B.trace() * (A * C).trace() +
                              C.trace() * (A * B).trace()) +
                       4.0 * ((A * B * C).trace() + (A * C * B).trace());
  return sphere_area(d - 1) * gauss / (d * (d + 2.0) * (d + 4.0));
}

Eigen::VectorXd sample_sphere(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  double nrm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    nrm = v.norm();
  } while (nrm == 0.0);
  return v / nrm;
}

QuadResult integrate_half_line(const std::function<double(double)>& f, double tol,
                               int max_depth) {
  auto g = [&](double u) {
    const double w = 1.0 - u;
    return f(u / w) / (w * w);
  };
  QuadResult res;
  double l1 = 0.0;
  res.value = gk::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, max_depth, tol, &res.error, &l1);
  return res;
}

QuadResult integrate_quarter_disc(const std::function<double(double, double)>& f, double P,
                                  double tol, int max_depth) {
  if (!(P > 1.0)) throw DomainError("integrate_quarter_disc: radius must exceed 1");
  const double inner_tol = 0.1 * tol;
  double worst_inner = 0.0;
  auto outer = [&](double tau) {
    const double w = 1.0 - tau;
    const double t = tau / w;
    const double s = 1.0 + t;
    const double rmax = std::sqrt(std::max(0.0, P * P - s * s));
    if (rmax == 0.0) return 0.0;
    const double umax = rmax / (1.0 + rmax);
    auto inner = [&](double u) {
      const double v = 1.0 - u;
      return f(t, u / v) / (v * v);
    };
    double err = 0.0, l1 = 0.0;
    const double val =
        gk::gauss_kronrod<double, 31>::integrate(inner, 0.0, umax, max_depth, inner_tol, &err, &l1);
    if (l1 > 0.0) worst_inner = std::max(worst_inner, err / l1);
    return val / (w * w);
  };
  const double tmax = P - 1.0;
  QuadResult res;
  double l1 = 0.0;
  res.value = gk::gauss_kronrod<double, 31>::integrate(outer, 0.0, tmax / (1.0 + tmax), max_depth,
                                                       tol, &res.error, &l1);
  res.error += worst_inner * l1;
  return res;
}

QuadResult moment(Dim n, const MomentKey& key, double tol) {
  const int nn = n.value();
  if (key.a < 0 || key.a % 2 != 0) throw DomainError("moment: a must be a non-negative even integer");
  if (key.b < 0) throw DomainError("moment: b must be non-negative");
  const double excess = 2.0 * key.p - key.a - key.b - nn;
  if (!(excess > 0.0)) {
    std::ostringstream os;
    os << "moment M(" << key.p << "," << key.a << "," << key.b << ") is not integrable for n=" << nn;
    throw DomainError(os.str());
  }
  if (!(tol > 0.0)) throw DomainError("moment: tolerance must be positive");

  const double rexp = key.b + nn - 2;
  auto f = [&](double t, double r) {
    const double s = 1.0 + t;
    const double D = s * s + r * r;
    return std::pow(t, key.a) * std::pow(r, rexp) * std::pow(D, -key.p);
  };
  // Outside the quarter disc of radius P in (1+t, r): t, r <= ρ, so the tail is
  // at most (π/2) ∫_P^∞ ρ^{a+b+n-2-2p} ρ dρ.
  auto tail = [&](double P) {
    return 0.5 * std::numbers::pi * std::pow(P, -excess) / excess;
  };
  // rough magnitude from a small disc, then choose P so the tail is <= tol/10 of it
  // below ~1e-14 the rule cannot resolve anything further; spend that effort and
  // let the budget check report the shortfall
  const double work_tol = std::max(tol, 1e-14);
  const QuadResult rough = integrate_quarter_disc(f, 8.0, 1e-6);
  const double target = 0.1 * work_tol * std::abs(rough.value);
  const double P =
      std::max(8.0, std::pow(0.5 * std::numbers::pi / (excess * target), 1.0 / excess));
  const double tail_bound = tail(P);

  QuadResult res = integrate_quarter_disc(f, P, 0.5 * work_tol);
  res.error += tail_bound;
  if (!(res.error <= tol * std::abs(res.value))) {
    std::ostringstream os;
    os << "moment M(" << key.p << "," << key.a << "," << key.b << "): relative error "
       << res.error / std::abs(res.value) << " exceeds tolerance " << tol;
    throw BudgetError(os.str(), res.value, res.error);
  }
  return res;
}

MomentTable::MomentTable(Dim n, double tol)
    : n_(n), tol_(tol), omega_(sphere_area(n.value() - 2)) {
  if (!(tol > 0.0)) throw DomainError("MomentTable: tolerance must be positive");
}

const QuadResult& MomentTable::get(const MomentKey& key) {
  auto it = table_.find(key);
  if (it != table_.end()) return it->second;
  return table_.emplace(key, moment(n_, key, tol_)).first->second;
}

double MomentTable::I1() { return omega_ * get({double(n_.value() - 2), 2, 0}).value; }
double MomentTable::I2() { return omega_ * get({double(n_.value()), 2, 4}).value; }
double MomentTable::I3() { return omega_ * get({double(n_.value()), 4, 2}).value; }
double MomentTable::I4() { return omega_ * get({double(n_.value() - 2), 0, 2}).value; }

std::string MomentTable::to_csv() const {
  std::ostringstream os;
  os << "n,p,a,b,value,error\n" << std::setprecision(17);
  for (const auto& [k, v] : table_)
    os << n_.value() << ',' << k.p << ',' << k.a << ',' << k.b << ',' << v.value << ',' << v.error
       << '\n';
  return os.str();
}

int thread_count() {
  if (const char* env = std::getenv("BLOWUP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

namespace {

constexpr std::int64_t kBatch = 1 << 15;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Sampler {
 public:
  Sampler(int m, const MCProposal& p) : m_(m), p_(p) {
    if (!(p.t_scale > 0.0 && p.z_scale > 0.0 && p.nu > 0.0))
      throw DomainError("MC proposal parameters must be positive");
    log_norm_z_ = std::lgamma(0.5 * (p.nu + m)) - std::lgamma(0.5 * p.nu) -
                  0.5 * m * std::log(p.nu * std::numbers::pi) - m * std::log(p.z_scale);
  }

  // Draws (t, z) and returns 1/density.
  double draw(std::mt19937_64& rng, double& t, Eigen::VectorXd& z) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::gamma_distribution<double> chi2(0.5 * p_.nu, 2.0);
    t = p_.t_scale * std::tan(0.5 * std::numbers::pi * uni(rng));
    const double w = std::sqrt(chi2(rng) / p_.nu);
    for (int i = 0; i < m_; ++i) z(i) = p_.z_scale * normal(rng) / w;
    const double ut = t / p_.t_scale;
    const double log_pt = std::log(2.0 / (std::numbers::pi * p_.t_scale)) - std::log1p(ut * ut);
    const double q = z.squaredNorm() / (p_.nu * p_.z_scale * p_.z_scale);
    const double log_pz = log_norm_z_ - 0.5 * (p_.nu + m_) * std::log1p(q);
    return std::exp(-(log_pt + log_pz));
  }

 private:
  int m_;
  MCProposal p_;
  double log_norm_z_;
};

[[noreturn]] void poisoned(double t, const Eigen::VectorXd& z, int output) {
  std::ostringstream os;
  os << std::setprecision(17) << "MC integrand is not finite (output " << output << ") at t=" << t
     << ", z=[";
  for (int i = 0; i < z.size(); ++i) os << (i ? "," : "") << z(i);
  os << "]";
  throw NumericError(os.str());
}

// Runs `body(batch_index, rng, count)` over all batches on the worker pool.
template <class Body>
void run_batches(std::int64_t n_samples, std::uint64_t seed, Body&& body) {
  const std::int64_t n_batches = (n_samples + kBatch - 1) / kBatch;
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    try {
      for (std::int64_t b = next++; b < n_batches && !failed; b = next++) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(b))));
        const std::int64_t count = std::min(kBatch, n_samples - b * kBatch);
        body(b, rng, count);
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };
  const int nt = static_cast<int>(std::min<std::int64_t>(thread_count(), n_batches));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<MCEstimate> mc_halfspace_multi(Dim n, int n_outputs, const HalfSpaceIntegrandVec& f,
                                           std::int64_t n_samples, std::uint64_t seed,
                                           const MCProposal& proposal) {
  if (n_samples < 2) throw DomainError("mc_halfspace: need at least two samples");
  const int m = n.boundary();
  const Sampler sampler(m, proposal);
  const std::int64_t n_batches = (n_samples + kBatch - 1) / kBatch;
  // per-batch sums, merged in batch order for determinism
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_outputs, n_batches);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n_outputs, n_batches);
  run_batches(n_samples, seed, [&](std::int64_t b, std::mt19937_64& rng, std::int64_t count) {
    Eigen::VectorXd z(m), out(n_outputs);
    for (std::int64_t s = 0; s < count; ++s) {
      double t = 0.0;
      const double inv_p = sampler.draw(rng, t, z);
      out.setZero();
      f(t, z, out);
      for (int k = 0; k < n_outputs; ++k) {
        const double v = out(k) * inv_p;
        if (!std::isfinite(v)) poisoned(t, z, k);
        sums(k, b) += v;
        sq(k, b) += v * v;
      }
    }
  });
  std::vector<MCEstimate> est(n_outputs);
  const double N = static_cast<double>(n_samples);
  for (int k = 0; k < n_outputs; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::int64_t b = 0; b < n_batches; ++b) {
      s += sums(k, b);
      s2 += sq(k, b);
    }
    const double mean = s / N;
    const double var = std::max(0.0, (s2 / N - mean * mean) * N / (N - 1.0));
    est[k] = {mean, std::sqrt(var / N), n_samples, seed};
  }
  return est;
}

MCEstimate mc_halfspace(Dim n, const HalfSpaceIntegrand& f, std::int64_t n_samples,
                        std::uint64_t seed, const MCProposal& proposal) {
  auto vf = [&](double t, const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> out) {
    out(0) = f(t, z);
  };
  return mc_halfspace_multi(n, 1, vf, n_samples, seed, proposal).front();
}

Eigen::MatrixXd mc_halfspace_samples(Dim n, int n_outputs, const HalfSpaceIntegrandVec& f,
                                     std::int64_t n_samples, std::uint64_t seed,
                                     const MCProposal& proposal) {
  if (n_samples < 1) throw DomainError("mc_halfspace_samples: need samples");
  const int m = n.boundary();
  const Sampler sampler(m, proposal);
  Eigen::MatrixXd rows(n_samples, n_outputs);
  run_batches(n_samples, seed, [&](std::int64_t b, std::mt19937_64& rng, std::int64_t count) {
    Eigen::VectorXd z(m), out(n_outputs);
    for (std::int64_t s = 0; s < count; ++s) {
      double t = 0.0;
      const double inv_p = sampler.draw(rng, t, z);
      out.setZero();
      f(t, z, out);
      for (int k = 0; k < n_outputs; ++k) {
        const double v = out(k) * inv_p;
        if (!std::isfinite(v)) poisoned(t, z, k);
        rows(b * kBatch + s, k) = v;
      }
    }
  });
  return rows;
}

}  // namespace blowup::quadrature
