#pragma once

// Problem builders: each application is cast as
//   min <C, Y>  s.t.  A(Y) = b,  Y PSD,  Y >= 0,  rank(Y) <= 1
// plus the lift of a combinatorial solution and the rank-one factorization
// of a doubly nonnegative matrix.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "pdca/errors.hpp"
#include "pdca/linalg.hpp"

namespace pdca {

enum class ProblemKind { Qap, Stqp, TriPartition };

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Qap: return "qap";
    case ProblemKind::Stqp: return "stqp";
    case ProblemKind::TriPartition: return "tripartition";
  }
  return "unknown";
}

/// perm[i] is the location assigned to facility i (0-based).
using Permutation = std::vector<int>;

/// Koopmans-Beckmann data: minimize sum A_ij B_{p(i)p(j)} + sum C_{i p(i)}.
/// `offset` is the constant a caller added to every objective value by
/// shifting data (see shift_nonnegative); reported objectives subtract it.
struct QapInstance {
  int n = 0;
  MatrixXd flow;      // A
  MatrixXd distance;  // B
  MatrixXd linear;    // C
  double offset = 0.0;
  std::string name;
};

struct StqpInstance {
  int n = 0;
  MatrixXd q_matrix;
};

struct TriPartInstance {
  int n = 0;
  MatrixXd adjacency;
  std::array<int, 3> sizes{};
};

using ProblemSource = std::variant<QapInstance, StqpInstance, TriPartInstance>;

/// Every feasible Y satisfies <exposing, Y> = 0 with `exposing` PSD, so
/// range(Y) lies in the span of `basis`. `reduced` is the constraint map
/// pulled back to R -> A(V R V^T). For problems with a strictly feasible
/// point the basis is the identity and `exposing` is zero.
struct FaceReduction {
  MatrixXd basis;
  MatrixXd exposing;
  AffineMap reduced;

  int rank() const { return static_cast<int>(basis.cols()); }
  bool trivial() const { return basis.cols() == basis.rows(); }
};

/// Rank-constrained DNN instance over S^q.
struct ConicProblem {
  ProblemKind kind = ProblemKind::Qap;
  SymMatrix cost;
  AffineMap constraints;
  ProblemSource source;
  std::shared_ptr<const FaceReduction> face;

  int dim() const { return cost.dim(); }
  const VectorXd& rhs() const { return constraints.rhs(); }
};

inline constexpr double kRankTol = 1e-6;

namespace detail {

inline void check_square(const MatrixXd& m, int n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream os;
    os << what << " is " << m.rows() << "x" << m.cols() << ", expected " << n << "x" << n;
    throw ModelError(os.str());
  }
  if (!m.allFinite()) throw ModelError(std::string(what) + " has non-finite entries");
}

inline void check_symmetric(const MatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) {
        std::ostringstream os;
        os << what << " is not symmetric: entry (" << i << "," << j << ") = " << m(i, j)
           << " but (" << j << "," << i << ") = " << m(j, i);
        throw ModelError(os.str());
      }
    }
  }
}

inline void check_nonnegative(const MatrixXd& m, const char* what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, j) < 0) {
        std::ostringstream os;
        os << what << " has negative entry (" << i << "," << j << ") = " << m(i, j)
           << "; add a constant shift first (shift_nonnegative)";
        throw ModelError(os.str());
      }
    }
  }
}

// (P kron Q)(k*nq + v, l*nq + w) = P(k,l) * Q(v,w)
inline MatrixXd kron(const MatrixXd& p, const MatrixXd& q) {
  MatrixXd out(p.rows() * q.rows(), p.cols() * q.cols());
  for (Eigen::Index k = 0; k < p.rows(); ++k) {
    for (Eigen::Index l = 0; l < p.cols(); ++l) {
      out.block(k * q.rows(), l * q.cols(), q.rows(), q.cols()) = p(k, l) * q;
    }
  }
  return out;
}

inline void check_reference_point(const AffineMap& map, const MatrixXd& y, const char* what) {
  const double res = map.residual(y).norm();
  if (res > 1e-10 * std::max(1.0, map.rhs().norm())) {
    throw ModelError(std::string(what) + ": reference lift violates constraints (residual " +
                     std::to_string(res) + ")");
  }
}

// `forms` holds linear forms that vanish on every lifted solution vector.
// Their Gram matrix K^T K exposes the face; its null space is the basis.
inline std::shared_ptr<const FaceReduction> make_face(int q,
                                                      const std::vector<ConstraintMatrix>& rows,
                                                      const AffineMap& full, const MatrixXd& forms) {
  auto face = std::make_shared<FaceReduction>();
  if (forms.rows() == 0) {
    face->basis = MatrixXd::Identity(q, q);
    face->exposing = MatrixXd::Zero(q, q);
    face->reduced = full;
    return face;
  }
  face->exposing = forms.transpose() * forms;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(face->exposing);
  if (es.info() != Eigen::Success) throw SolverError("make_face: decomposition failed");
  const double cut = 1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::Index r = 0;
  while (r < es.eigenvalues().size() && es.eigenvalues()(r) <= cut) ++r;
  if (r == 0) throw ModelError("make_face: feasible set collapses to {0}");
  face->basis = es.eigenvectors().leftCols(r);
  detail::fix_signs(face->basis);
  if (r == q) {
    face->basis = MatrixXd::Identity(q, q);
    face->reduced = full;
    return face;
  }

  const MatrixXd& v = face->basis;
  std::vector<ConstraintMatrix> reduced_rows;
  reduced_rows.reserve(rows.size());
  for (const auto& row : rows) {
    Eigen::SparseMatrix<double> a(q, q);
    a.setFromTriplets(row.entries().begin(), row.entries().end());
    const MatrixXd av = a * v;
    const MatrixXd red = v.transpose() * av;
    ConstraintMatrix cm;
    for (Eigen::Index j = 0; j < r; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double val = i == j ? red(i, i) : 0.5 * (red(i, j) + red(j, i));
        if (val != 0.0) cm.add(static_cast<int>(i), static_cast<int>(j), val);
      }
    }
    reduced_rows.push_back(std::move(cm));
  }
  face->reduced = AffineMap(static_cast<int>(r), reduced_rows, full.rhs());
  return face;
}

}  // namespace detail

inline void validate(const QapInstance& inst) {
  if (inst.n < 1) throw ModelError("QapInstance: n must be >= 1");
  detail::check_square(inst.flow, inst.n, "flow matrix A");
  detail::check_square(inst.distance, inst.n, "distance matrix B");
  detail::check_square(inst.linear, inst.n, "linear matrix C");
  detail::check_symmetric(inst.flow, "flow matrix A");
  detail::check_symmetric(inst.distance, "distance matrix B");
  detail::check_nonnegative(inst.flow, "flow matrix A");
  detail::check_nonnegative(inst.distance, "distance matrix B");
  detail::check_nonnegative(inst.linear, "linear matrix C");
}

inline void validate(const StqpInstance& inst) {
  if (inst.n < 1) throw ModelError("StqpInstance: n must be >= 1");
  detail::check_square(inst.q_matrix, inst.n, "Q");
  detail::check_symmetric(inst.q_matrix, "Q");
}

inline void validate(const TriPartInstance& inst) {
  if (inst.n < 1) throw ModelError("TriPartInstance: n must be >= 1");
  detail::check_square(inst.adjacency, inst.n, "adjacency");
  detail::check_symmetric(inst.adjacency, "adjacency");
  detail::check_nonnegative(inst.adjacency, "adjacency");
  for (int v = 0; v < inst.n; ++v) {
    if (inst.adjacency(v, v) != 0.0) {
      throw ModelError("adjacency has nonzero diagonal at vertex " + std::to_string(v));
    }
  }
  int total = 0;
  for (int s : inst.sizes) {
    if (s < 1) throw ModelError("TriPartInstance: group sizes must be positive");
    total += s;
  }
  if (total != inst.n) {
    throw ModelError("TriPartInstance: sizes sum to " + std::to_string(total) + ", expected n = " +
                     std::to_string(inst.n));
  }
}

/// Shifts A, B and C by constants so all entries are nonnegative. Every
/// permutation's objective grows by the same amount, recorded in `offset`.
inline QapInstance shift_nonnegative(QapInstance inst) {
  const int n = inst.n;
  const double alpha = std::max(0.0, -inst.flow.minCoeff());
  inst.flow.array() += alpha;
  inst.offset += alpha * inst.distance.sum();
  const double beta = std::max(0.0, -inst.distance.minCoeff());
  inst.distance.array() += beta;
  inst.offset += beta * inst.flow.sum();
  const double gamma = std::max(0.0, -inst.linear.minCoeff());
  inst.linear.array() += gamma;
  inst.offset += gamma * n;
  return inst;
}

// ---------------------------------------------------------------------------
// Lifts

inline void check_permutation(const Permutation& perm, int n) {
  if (static_cast<int>(perm.size()) != n) {
    throw ModelError("permutation has length " + std::to_string(perm.size()) + ", expected " +
                     std::to_string(n));
  }
  std::vector<char> seen(n, 0);
  for (int v : perm) {
    if (v < 0 || v >= n || seen[v]) throw ModelError("not a permutation of 0..n-1");
    seen[v] = 1;
  }
}

/// vec(X) in column-major order, X(i, perm[i]) = 1.
inline VectorXd permutation_vector(const Permutation& perm) {
  const int n = static_cast<int>(perm.size());
  check_permutation(perm, n);
  VectorXd x = VectorXd::Zero(static_cast<Eigen::Index>(n) * n);
  for (int i = 0; i < n; ++i) x(perm[i] * n + i) = 1.0;
  return x;
}

inline SymMatrix lift_permutation(const Permutation& perm) {
  return SymMatrix::outer(permutation_vector(perm));
}

inline SymMatrix lift_simplex(const VectorXd& x) {
  if (x.size() < 1) throw ModelError("simplex point is empty");
  if (x.minCoeff() < 0.0) throw ModelError("simplex point has a negative entry");
  if (std::abs(x.sum() - 1.0) > 1e-9) throw ModelError("simplex point does not sum to 1");
  return SymMatrix::outer(x);
}

/// labels[v] in {0,1,2}; vec(X) has index k*n + v for group k, vertex v.
inline VectorXd partition_vector(const std::vector<int>& labels, const std::array<int, 3>& sizes) {
  const int n = static_cast<int>(labels.size());
  std::array<int, 3> count{};
  VectorXd x = VectorXd::Zero(3 * n);
  for (int v = 0; v < n; ++v) {
    if (labels[v] < 0 || labels[v] > 2) throw ModelError("partition label out of range");
    ++count[labels[v]];
    x(labels[v] * n + v) = 1.0;
  }
  if (count != sizes) throw ModelError("partition does not respect the group sizes");
  return x;
}

inline SymMatrix lift_partition(const std::vector<int>& labels, const std::array<int, 3>& sizes) {
  return SymMatrix::outer(partition_vector(labels, sizes));
}

// ---------------------------------------------------------------------------
// Builders

/// Cost B kron A + Diag(vec C). Rows, in order:
///   sum_k Y^{kk} = I          (r <= s, lexicographic)     n(n+1)/2
///   <I, Y^{ij}> = delta_ij    (i <= j, lexicographic)     n(n+1)/2
///   <E, Y> = n^2                                          1
inline ConicProblem build_qap(const QapInstance& inst) {
  validate(inst);
  const int n = inst.n;
  const int q = n * n;

  MatrixXd cost = detail::kron(inst.distance, inst.flow);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) cost(j * n + i, j * n + i) += inst.linear(i, j);
  }

  std::vector<ConstraintMatrix> rows;
  std::vector<double> rhs;
  for (int r = 0; r < n; ++r) {
    for (int s = r; s < n; ++s) {
      ConstraintMatrix a;
      for (int k = 0; k < n; ++k) a.add(k * n + r, k * n + s, r == s ? 1.0 : 0.5);
      rows.push_back(std::move(a));
      rhs.push_back(r == s ? 1.0 : 0.0);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      ConstraintMatrix a;
      for (int r = 0; r < n; ++r) a.add(i * n + r, j * n + r, i == j ? 1.0 : 0.5);
      rows.push_back(std::move(a));
      rhs.push_back(i == j ? 1.0 : 0.0);
    }
  }
  {
    ConstraintMatrix a;
    for (int u = 0; u < q; ++u) {
      for (int v = u; v < q; ++v) a.add(u, v, 1.0);
    }
    rows.push_back(std::move(a));
    rhs.push_back(static_cast<double>(n) * n);
  }

  // Row and column sums of X equal (sum of all entries) / n on every lift.
  MatrixXd forms = MatrixXd::Zero(2 * n, q);
  if (n > 1) {
    forms.array() -= 1.0 / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        forms(i, j * n + i) += 1.0;
        forms(n + j, j * n + i) += 1.0;
      }
    }
  }

  AffineMap map(q, rows, Eigen::Map<VectorXd>(rhs.data(), rhs.size()));
  auto face = detail::make_face(q, rows, map, n > 1 ? forms : MatrixXd(0, q));
  ConicProblem prob{ProblemKind::Qap, SymMatrix(cost), std::move(map), inst, std::move(face)};
  Permutation id(n);
  for (int i = 0; i < n; ++i) id[i] = i;
  detail::check_reference_point(prob.constraints, lift_permutation(id).mat(), "build_qap");
  return prob;
}

/// Cost Q, single row <E, Y> = 1.
inline ConicProblem build_stqp(const StqpInstance& inst) {
  validate(inst);
  const int n = inst.n;
  ConstraintMatrix e;
  for (int u = 0; u < n; ++u) {
    for (int v = u; v < n; ++v) e.add(u, v, 1.0);
  }
  AffineMap map(n, {e}, VectorXd::Ones(1));
  auto face = detail::make_face(n, {e}, map, MatrixXd(0, n));
  ConicProblem prob{ProblemKind::Stqp, SymMatrix(inst.q_matrix), std::move(map), inst,
                    std::move(face)};
  VectorXd e1 = VectorXd::Zero(n);
  e1(0) = 1.0;
  detail::check_reference_point(prob.constraints, lift_simplex(e1).mat(), "build_stqp");
  return prob;
}

/// The fixed 3x3 group-interaction matrix: only groups 1 and 2 are coupled.
inline MatrixXd tripartition_coupling() {
  MatrixXd b = MatrixXd::Zero(3, 3);
  b(0, 1) = b(1, 0) = 1.0;
  return b;
}

/// Cost (1/2) B kron A. Rows, in order:
///   <L^{ij} kron I, Y>   = m_i delta_ij   (i <= j)               6
///   <E_3 kron J^{vv}, Y> = 1              (v = 0..n-1)           n
///   <V_i kron W_v^T, Y>  = m_i            (i = 0..2, v = 0..n-1) 3n
///   <L^{ij} kron E_n, Y> = m_i m_j        (i <= j)               6
/// The non-symmetric V_i kron W_v^T is replaced by its symmetric part.
inline ConicProblem build_tripartition(const TriPartInstance& inst) {
  validate(inst);
  const int n = inst.n;
  const int q = 3 * n;
  const auto& m = inst.sizes;

  std::vector<ConstraintMatrix> rows;
  std::vector<double> rhs;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      ConstraintMatrix a;
      for (int v = 0; v < n; ++v) a.add(i * n + v, j * n + v, i == j ? 1.0 : 0.5);
      rows.push_back(std::move(a));
      rhs.push_back(i == j ? m[i] : 0.0);
    }
  }
  for (int v = 0; v < n; ++v) {
    ConstraintMatrix a;
    for (int k = 0; k < 3; ++k) {
      for (int l = k; l < 3; ++l) a.add(k * n + v, l * n + v, 1.0);
    }
    rows.push_back(std::move(a));
    rhs.push_back(1.0);
  }
  for (int i = 0; i < 3; ++i) {
    for (int v = 0; v < n; ++v) {
      ConstraintMatrix a;
      for (int l = 0; l < 3; ++l) {
        for (int w = 0; w < n; ++w) {
          const int r = i * n + w;
          const int c = l * n + v;
          if (r == c) {
            a.add(r, r, 1.0);
          } else {
            a.add(r, c, 0.5);
          }
        }
      }
      rows.push_back(std::move(a));
      rhs.push_back(m[i]);
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      ConstraintMatrix a;
      for (int v = 0; v < n; ++v) {
        for (int w = 0; w < n; ++w) {
          if (i == j) {
            if (v <= w) a.add(i * n + v, i * n + w, 1.0);
          } else {
            a.add(i * n + v, j * n + w, 0.5);
          }
        }
      }
      rows.push_back(std::move(a));
      rhs.push_back(static_cast<double>(m[i]) * m[j]);
    }
  }

  // Each vertex lies in one group and group k holds m_k vertices; both
  // hold on every lift relative to the total (sum of all entries) / n.
  MatrixXd forms = MatrixXd::Zero(n + 3, q);
  for (int v = 0; v < n; ++v) {
    forms.row(v).array() -= 1.0 / n;
    for (int k = 0; k < 3; ++k) forms(v, k * n + v) += 1.0;
  }
  for (int k = 0; k < 3; ++k) {
    forms.row(n + k).array() -= static_cast<double>(m[k]) / n;
    for (int v = 0; v < n; ++v) forms(n + k, k * n + v) += 1.0;
  }

  MatrixXd cost = 0.5 * detail::kron(tripartition_coupling(), inst.adjacency);
  AffineMap map(q, rows, Eigen::Map<VectorXd>(rhs.data(), rhs.size()));
  auto face = detail::make_face(q, rows, map, forms);
  ConicProblem prob{ProblemKind::TriPartition, SymMatrix(cost), std::move(map), inst,
                    std::move(face)};
  std::vector<int> labels;
  for (int k = 0; k < 3; ++k) labels.insert(labels.end(), m[k], k);
  detail::check_reference_point(prob.constraints, lift_partition(labels, m).mat(),
                                "build_tripartition");
  return prob;
}

/// Average of the lifts of every feasible combinatorial solution. It lies
/// in the feasible set by convexity and has a closed form for each kind.
inline SymMatrix barycenter(const ConicProblem& prob) {
  const int q = prob.dim();
  MatrixXd y = MatrixXd::Zero(q, q);
  switch (prob.kind) {
    case ProblemKind::Qap: {
      const int n = std::get<QapInstance>(prob.source).n;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              double v = 0.0;
              if (i == j && k == l) {
                v = 1.0 / n;
              } else if (i != j && k != l) {
                v = 1.0 / (static_cast<double>(n) * (n - 1));
              }
              y(k * n + i, l * n + j) = v;
            }
          }
        }
      }
      break;
    }
    case ProblemKind::Stqp:
      y.setConstant(1.0 / (static_cast<double>(q) * q));
      break;
    case ProblemKind::TriPartition: {
      const auto& inst = std::get<TriPartInstance>(prob.source);
      const int n = inst.n;
      const double nn = static_cast<double>(n);
      for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
          const double mk = inst.sizes[k], ml = inst.sizes[l];
          for (int v = 0; v < n; ++v) {
            for (int w = 0; w < n; ++w) {
              double val = 0.0;
              if (v == w) {
                val = (k == l) ? mk / nn : 0.0;
              } else {
                val = (k == l) ? mk * (mk - 1) / (nn * (nn - 1)) : mk * ml / (nn * (nn - 1));
              }
              y(k * n + v, l * n + w) = val;
            }
          }
        }
      }
      break;
    }
  }
  return SymMatrix(y, SymMatrix::Trusted{});
}

/// Nonnegative x with Y = x x^T when Y is PSD, entrywise nonnegative and
/// numerically rank one (lambda_2 <= tol_rank * max(lambda_1, 1)).
inline std::optional<VectorXd> rank_one_factor(const SymMatrix& y, double tol_rank = kRankTol) {
  const double scale = std::max(1.0, y.mat().cwiseAbs().maxCoeff());
  if (y.mat().minCoeff() < -1e-8 * scale) return std::nullopt;
  const SpectralDecomposition sd = eig(y);
  const double l1 = sd.values(0);
  if (l1 <= 0.0) return std::nullopt;
  const double cut = tol_rank * std::max(l1, 1.0);
  if (sd.values(sd.values.size() - 1) < -cut) return std::nullopt;
  if (sd.values.size() > 1 && sd.values(1) > cut) return std::nullopt;
  VectorXd x = std::sqrt(l1) * sd.vectors.col(0);
  if (x.sum() < 0) x = -x;
  if (x.minCoeff() < -1e-8 * std::max(1.0, x.cwiseAbs().maxCoeff())) return std::nullopt;
  return VectorXd(x.cwiseMax(0.0));
}

/// lambda_2 / lambda_1, or 0 for q == 1; +inf when lambda_1 <= 0.
inline double rank_ratio(const SpectralDecomposition& sd) {
  if (sd.values.size() < 2) return 0.0;
  if (sd.values(0) <= 0.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, sd.values(1)) / sd.values(0);
}

inline double rank_ratio(const SymMatrix& y) { return rank_ratio(eig(y)); }

/// Number of eigenvalues above tol_rank * lambda_1.
inline int numerical_rank(const SpectralDecomposition& sd, double tol_rank = kRankTol) {
  if (sd.values.size() == 0 || sd.values(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sd.values.size(); ++i) {
    if (sd.values(i) > tol_rank * sd.values(0)) ++r;
  }
  return r;
}

}  // namespace pdca
