#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace blowup::geometry {

/// Manifold dimension. The construction needs n >= 11; exploration runs may
/// relax this to n >= 7 and are then flagged as exploratory.
class Dim {
 public:
  static constexpr int kMinimum = 11;
  static constexpr int kExploratoryMinimum = 7;

  explicit Dim(int n, bool allow_exploratory = false);

  int value() const noexcept { return n_; }
  /// Dimension of the boundary, n - 1.
  int boundary() const noexcept { return n_ - 1; }
  bool exploratory() const noexcept { return n_ < kMinimum; }

  friend bool operator==(Dim a, Dim b) noexcept { return a.n_ == b.n_; }

 private:
  int n_;
};

/// Dense rank-4 array over boundary indices, addressed as (i, k, j, l).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int m) : m_(m), data_(static_cast<std::size_t>(m) * m * m * m, 0.0) {}

  int extent() const noexcept { return m_; }
  double& operator()(int i, int k, int j, int l) { return data_[index(i, k, j, l)]; }
  double operator()(int i, int k, int j, int l) const { return data_[index(i, k, j, l)]; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  double norm_squared() const;
  double max_abs() const;

 private:
  std::size_t index(int i, int k, int j, int l) const {
    return ((static_cast<std::size_t>(i) * m_ + k) * m_ + j) * m_ + l;
  }
  int m_ = 0;
  std::vector<double> data_;
};

/// Projects an arbitrary rank-4 array onto tensors with the algebraic
/// symmetries of a curvature tensor (pair antisymmetry, pair exchange, first
/// Bianchi identity).
Tensor4 project_curvature(const Tensor4& t);

/// Ricci contraction Ric_ij = sum_k T_ikjk.
Eigen::MatrixXd ricci(const Tensor4& t);

/// Weyl (totally trace-free) part of an algebraic curvature tensor.
Tensor4 weyl_part(const Tensor4& r);

/// Curvature data at a boundary point q in the conformal Fermi gauge.
struct CurvaturePoint {
  Dim n{Dim::kMinimum};
  Tensor4 Rbar;          // boundary curvature R̄_ikjl
  Eigen::MatrixXd S;     // S_ij = R_ninj
  double D2 = 0.0;       // R_ninj,ij
  double Rnnnn = 0.0;    // R_nn,nn
  double Wbar2 = 0.0;    // |W̄(q)|^2
  double gamma = 0.0;    // perturbation weight γ(q)
  std::string label;

  /// Zero curvature at dimension n.
  static CurvaturePoint zero(Dim n, std::string label = "q0");
};

struct IdentityCheck {
  std::string name;
  double violation = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct ValidationReport {
  std::vector<IdentityCheck> checks;
  bool passed() const;
  /// Comma separated names of the failing identities.
  std::string failures() const;
};

/// Checks every algebraic identity the gauge imposes on `cp`. Throws
/// StructuralError when array extents disagree with n.
ValidationReport validate_curvature(const CurvaturePoint& cp, double tol_sym = 1e-12);

/// Throws ValidationError naming the offending identities.
void require_valid(const CurvaturePoint& cp, double tol_sym = 1e-12);

/// Synthetic boundary point satisfying every gauge identity; deterministic in seed.
CurvaturePoint generate_sample(Dim n, std::uint64_t seed, double scale);

enum class RiiConvention { Summed, PerIndex };

/// Second derivative of the boundary scalar curvature implied by |W̄|^2:
/// summed over i (default) gives -|W̄|^2/6; per-index sums (n-1) equal copies.
double weyl_norm_consistency(const CurvaturePoint& cp,
                             RiiConvention convention = RiiConvention::Summed);

/// Derivative tensors entering the degree-3 and degree-4 blocks of the
/// inverse metric. Empty arrays are read as zero.
struct MetricJet {
  std::vector<double> Rbar_d1;  // R̄_ikjl,m      extent m^5
  std::vector<double> Rbar_d2;  // R̄_ikjl,mp     extent m^6
  std::vector<double> S_d1;     // R_ninj,k       extent m^3
  Eigen::MatrixXd S_dn;         // R_ninj,n
  std::vector<double> S_d2;     // R_ninj,kl      extent m^4
  std::vector<double> S_dnk;    // R_ninj,nk      extent m^3
  Eigen::MatrixXd S_dnn;        // R_ninj,nn
};

/// Jet determined by the scalar data of `cp` alone: R_ninj,kl is the
/// isotropic tensor with vanishing ij-trace and double contraction D2,
/// R_ninj,nn = (R_nn,nn/(n-1)) δ_ij, and all other derivatives vanish.
MetricJet isotropic_jet(const CurvaturePoint& cp);

/// Random jet with the symmetries used by the expansion (first-derivative
/// tensors included); R_ninj,kl keeps the isotropic double contraction D2.
MetricJet generate_jet(const CurvaturePoint& cp, std::uint64_t seed, double scale,
                       bool include_second_boundary_derivatives = false);

/// Inverse metric components g̃^{ij}(y) - δ_ij over boundary indices, split by
/// homogeneous degree in y so callers can rescale y -> δ y cheaply.
struct MetricBlocks {
  Eigen::MatrixXd deg2, deg3, deg4;
  Eigen::MatrixXd total() const { return deg2 + deg3 + deg4; }
};

/// Divergence sum_i ∂_{y_i} g̃^{ij}(y) over boundary indices, by the degree
/// of the differentiated block (so the entries are homogeneous of degree d-1).
struct DivergenceBlocks {
  Eigen::VectorXd deg2, deg3, deg4;
};

/// Truncated (through order 4) expansion of the inverse metric in Fermi
/// coordinates y = (z, t), with g̃^{nn} = 1 and g̃^{in} = 0.
class MetricExpansion {
 public:
  MetricExpansion(const CurvaturePoint& cp, MetricJet jet);
  explicit MetricExpansion(const CurvaturePoint& cp);

  int n() const noexcept { return n_; }

  /// `z` has n-1 entries, `t` is the normal coordinate y_n.
  MetricBlocks blocks(const Eigen::Ref<const Eigen::VectorXd>& z, double t) const;
  DivergenceBlocks divergence(const Eigen::Ref<const Eigen::VectorXd>& z, double t) const;

 private:
  int n_;
  int m_;
  Tensor4 Rbar_;
  Eigen::MatrixXd S_;
  MetricJet jet_;
  // Traces of the derivative tensors used by the divergence.
  Eigen::MatrixXd rbar_trace_;             // sum_i R̄_ikji
  std::vector<double> d1_trace_;           // (jkl) traces of R̄_ikjl,m terms
  std::vector<double> d2_trace_;           // (jklm) traces of R̄_ikjl,mp terms
  Eigen::MatrixXd s_d1_trace_;             // sum_i R_ninj,i  (column vector in j)
  Eigen::MatrixXd s_d2_trace_;             // sum_i (R_ninj,il + R_ninj,li)/2 -> (j,l)
  Eigen::VectorXd s_dnk_trace_;            // sum_i R_ninj,ni
};

/// Full n×n inverse metric at y (boundary block plus identity in the normal
/// row/column). Throws DomainError when the truncation is not positive
/// definite (minimum eigenvalue below 1e-8).
Eigen::MatrixXd eval_metric_inverse(const MetricExpansion& me,
                                    const Eigen::Ref<const Eigen::VectorXd>& y);

}  // namespace blowup::geometry
