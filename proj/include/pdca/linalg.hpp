#pragma once

// Dense symmetric matrices, spectral decomposition, and the three
// projections (PSD cone, nonnegative orthant, affine subspace) used by
// every solver iteration.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdca/errors.hpp"

namespace pdca {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense symmetric q x q matrix. Construction symmetrizes inputs whose
/// asymmetry is within 1e-12 (relative) and rejects anything worse.
/// A default-constructed SymMatrix is empty (dim 0) and only useful as a
/// placeholder.
class SymMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-12;

  struct Trusted {};

  SymMatrix() = default;

  explicit SymMatrix(MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
      throw ModelError("SymMatrix: matrix is " + std::to_string(m_.rows()) + "x" +
                       std::to_string(m_.cols()) + ", expected square");
    }
    if (m_.rows() < 1) throw ModelError("SymMatrix: dimension must be >= 1");
    if (!m_.allFinite()) throw ModelError("SymMatrix: non-finite entry");
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale) {
      Eigen::Index r = 0, c = 0;
      (m_ - m_.transpose()).cwiseAbs().maxCoeff(&r, &c);
      std::ostringstream os;
      os << "SymMatrix: asymmetric input, |A(" << r << "," << c << ") - A(" << c << "," << r
         << ")| = " << asym;
      throw ModelError(os.str());
    }
    symmetrize();
  }

  // Skips the asymmetry check; the input is averaged with its transpose.
  SymMatrix(MatrixXd m, Trusted) : m_(std::move(m)) { symmetrize(); }

  static SymMatrix zero(int q) { return SymMatrix(MatrixXd::Zero(q, q)); }
  static SymMatrix identity(int q) { return SymMatrix(MatrixXd::Identity(q, q)); }
  static SymMatrix ones(int q) { return SymMatrix(MatrixXd::Ones(q, q)); }
  static SymMatrix diagonal(const VectorXd& d) { return SymMatrix(MatrixXd(d.asDiagonal())); }
  static SymMatrix outer(const VectorXd& x) { return SymMatrix(x * x.transpose(), Trusted{}); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double dot(const SymMatrix& o) const { return m_.cwiseProduct(o.m_).sum(); }
  double norm() const { return m_.norm(); }
  double trace() const { return m_.trace(); }

  SymMatrix operator+(const SymMatrix& o) const { return SymMatrix(m_ + o.m_, Trusted{}); }
  SymMatrix operator-(const SymMatrix& o) const { return SymMatrix(m_ - o.m_, Trusted{}); }
  SymMatrix operator-() const { return SymMatrix(-m_, Trusted{}); }
  SymMatrix operator*(double s) const { return SymMatrix(m_ * s, Trusted{}); }
  friend SymMatrix operator*(double s, const SymMatrix& a) { return a * s; }

 private:
  void symmetrize() { m_ = 0.5 * (m_ + m_.transpose()).eval(); }

  MatrixXd m_;
};

/// Eigenpairs with eigenvalues sorted non-increasing. Column i of
/// `vectors` pairs with values(i); the first entry of each column whose
/// magnitude exceeds 1e-12 is positive.
struct SpectralDecomposition {
  VectorXd values;
  MatrixXd vectors;
};

namespace detail {

inline void fix_signs(MatrixXd& u) {
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      if (std::abs(u(r, c)) > 1e-12) {
        if (u(r, c) < 0) u.col(c) = -u.col(c);
        break;
      }
    }
  }
}

inline SpectralDecomposition eig_raw(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eig: decomposition failed to converge (dim " << a.rows() << ", |A|_F = " << a.norm()
       << ", finite = " << (a.allFinite() ? "yes" : "no") << ")";
    throw SolverError(os.str());
  }
  SpectralDecomposition out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  fix_signs(out.vectors);
  return out;
}

// Sum over positive eigenvalues of lambda_i u_i u_i^T.
inline MatrixXd psd_part(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) {
    throw SolverError("project_psd: decomposition failed (|A|_F = " + std::to_string(a.norm()) +
                      ")");
  }
  const VectorXd& w = es.eigenvalues();
  const MatrixXd& u = es.eigenvectors();
  Eigen::Index first = 0;
  while (first < w.size() && w(first) <= 0.0) ++first;
  const Eigen::Index k = w.size() - first;
  if (k == 0) return MatrixXd::Zero(a.rows(), a.cols());
  MatrixXd v = u.rightCols(k) * w.tail(k).cwiseSqrt().asDiagonal();
  MatrixXd p = v * v.transpose();
  return 0.5 * (p + p.transpose());
}

}  // namespace detail

inline SpectralDecomposition eig(const SymMatrix& a) { return detail::eig_raw(a.mat()); }

inline SymMatrix project_psd(const SymMatrix& a) {
  return SymMatrix(detail::psd_part(a.mat()), SymMatrix::Trusted{});
}

inline SymMatrix project_nonneg(const SymMatrix& a) {
  return SymMatrix(a.mat().cwiseMax(0.0), SymMatrix::Trusted{});
}

/// One sparse symmetric constraint matrix. add(i, j, v) places v at both
/// (i, j) and (j, i); for i == j it places v once on the diagonal.
class ConstraintMatrix {
 public:
  void add(int i, int j, double v) {
    entries_.emplace_back(i, j, v);
    if (i != j) entries_.emplace_back(j, i, v);
  }
  const std::vector<Eigen::Triplet<double>>& entries() const { return entries_; }

 private:
  std::vector<Eigen::Triplet<double>> entries_;
};

/// The linear map Y -> (<A_1, Y>, ..., <A_m, Y>) with right-hand side b and
/// a cached pseudo-inverse of the Gram matrix G_ij = <A_i, A_j>.
class AffineMap {
 public:
  AffineMap() = default;

  AffineMap(int dim, const std::vector<ConstraintMatrix>& rows, VectorXd rhs)
      : dim_(dim), rhs_(std::move(rhs)) {
    if (dim < 1) throw ModelError("AffineMap: dimension must be >= 1");
    if (rows.empty()) throw ModelError("AffineMap: at least one constraint is required");
    if (static_cast<Eigen::Index>(rows.size()) != rhs_.size()) {
      throw ModelError("AffineMap: " + std::to_string(rows.size()) + " constraints but rhs has " +
                       std::to_string(rhs_.size()) + " entries");
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (const auto& t : rows[r].entries()) {
        if (t.row() < 0 || t.row() >= dim || t.col() < 0 || t.col() >= dim) {
          throw ModelError("AffineMap: constraint " + std::to_string(r) + " index out of range");
        }
        trip.emplace_back(static_cast<int>(r), t.row() + t.col() * dim, t.value());
      }
    }
    ops_.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim) * dim);
    ops_.setFromTriplets(trip.begin(), trip.end());
    ops_.makeCompressed();
    ops_t_ = ops_.transpose();
    if (static_cast<double>(ops_.nonZeros()) > 0.25 * static_cast<double>(ops_.rows()) * ops_.cols()) {
      dense_ops_ = MatrixXd(ops_);
      dense_ = true;
    }

    gram_ = MatrixXd(ops_ * ops_t_);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram_);
    if (es.info() != Eigen::Success) throw SolverError("AffineMap: Gram decomposition failed");
    gram_vectors_ = es.eigenvectors();
    gram_values_ = es.eigenvalues();
    const double cutoff =
        1e-12 * std::max(1.0, gram_values_.cwiseAbs().maxCoeff()) * static_cast<double>(rows.size());
    VectorXd inv = VectorXd::Zero(gram_values_.size());
    rank_ = 0;
    for (Eigen::Index i = 0; i < gram_values_.size(); ++i) {
      if (gram_values_(i) > cutoff) {
        inv(i) = 1.0 / gram_values_(i);
        ++rank_;
      }
    }
    gram_pinv_ = gram_vectors_ * inv.asDiagonal() * gram_vectors_.transpose();

    // b must lie in range(A), else no Y satisfies A(Y) = b.
    const VectorXd back = gram_ * (gram_pinv_ * rhs_);
    if ((back - rhs_).norm() > 1e-9 * std::max(1.0, rhs_.norm())) {
      throw ModelError("AffineMap: constraint system is inconsistent (rhs outside range)");
    }
  }

  int dim() const { return dim_; }
  int rows() const { return static_cast<int>(rhs_.size()); }
  int gram_rank() const { return rank_; }
  const VectorXd& rhs() const { return rhs_; }
  const MatrixXd& gram() const { return gram_; }

  /// U diag(lambda) U^T from the cached factorization.
  MatrixXd gram_reconstructed() const {
    return gram_vectors_ * gram_values_.asDiagonal() * gram_vectors_.transpose();
  }

  VectorXd apply(const MatrixXd& y) const {
    const Eigen::Map<const VectorXd> v(y.data(), y.size());
    if (dense_) return dense_ops_ * v;
    return ops_ * v;
  }
  VectorXd apply(const SymMatrix& y) const { return apply(y.mat()); }

  MatrixXd adjoint_raw(const VectorXd& y) const {
    VectorXd v = dense_ ? VectorXd(dense_ops_.transpose() * y) : VectorXd(ops_t_ * y);
    return Eigen::Map<MatrixXd>(v.data(), dim_, dim_);
  }
  SymMatrix adjoint(const VectorXd& y) const { return SymMatrix(adjoint_raw(y), SymMatrix::Trusted{}); }

  VectorXd gram_solve(const VectorXd& r) const { return gram_pinv_ * r; }

  VectorXd residual(const MatrixXd& y) const { return apply(y) - rhs_; }
  VectorXd residual(const SymMatrix& y) const { return residual(y.mat()); }

  /// Unchecked affine projection; also returns the multiplier
  /// lambda = G^+ (A(y) - b) so that result = y - A^*(lambda).
  MatrixXd project_raw(const MatrixXd& y, VectorXd* lambda = nullptr) const {
    VectorXd l = gram_solve(residual(y));
    MatrixXd out = y - adjoint_raw(l);
    if (lambda) *lambda = std::move(l);
    return out;
  }

 private:
  int dim_ = 0;
  VectorXd rhs_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> ops_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> ops_t_;
  MatrixXd dense_ops_;  // used instead of ops_ when rows are mostly nonzero
  bool dense_ = false;
  MatrixXd gram_;
  MatrixXd gram_vectors_;
  VectorXd gram_values_;
  MatrixXd gram_pinv_;
  int rank_ = 0;
};

/// Frobenius-nearest point of {Y : A(Y) = b}.
inline SymMatrix project_affine(const SymMatrix& a, const AffineMap& map) {
  if (a.dim() != map.dim()) {
    throw ModelError("project_affine: matrix dim " + std::to_string(a.dim()) + " vs map dim " +
                     std::to_string(map.dim()));
  }
  SymMatrix out(map.project_raw(a.mat()), SymMatrix::Trusted{});
  const double res = map.residual(out).norm();
  const double tol = 1e-10 * std::max({1.0, map.rhs().norm(), a.norm()});
  if (res > tol) {
    throw ModelError("project_affine: residual " + std::to_string(res) +
                     " after projection; constraint system inconsistent");
  }
  return out;
}

}  // namespace pdca
