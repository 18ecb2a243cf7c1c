#pragma once

// Feasible combinatorial solutions from (near) rank-one iterates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pdca/errors.hpp"
#include "pdca/linalg.hpp"
#include "pdca/model.hpp"
#include "pdca/penalty.hpp"

namespace pdca {

namespace detail {

// Minimum-cost assignment on a rows x cols matrix (rows <= cols), shortest
// augmenting paths with potentials. Returns the column of each row.
inline std::vector<int> hungarian_min(const MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0), minv(cols + 1);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  std::vector<char> used(cols + 1);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (p[j] != 0) assign[p[j] - 1] = j - 1;
  }
  return assign;
}

inline double assignment_value(const MatrixXd& w, const std::vector<int>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w(static_cast<Eigen::Index>(i), a[i]);
  return s;
}

// Maximum of sum_i w(i, a(i)) over injective a: rows -> cols. Among optimal
// assignments picks the lexicographically smallest, fixing rows in order.
inline std::vector<int> max_assignment_lex(const MatrixXd& w) {
  const int rows = static_cast<int>(w.rows());
  const int cols = static_cast<int>(w.cols());
  if (rows > cols) throw std::invalid_argument("max_assignment_lex: more rows than columns");
  if (!w.allFinite()) throw std::invalid_argument("max_assignment_lex: non-finite weight");
  std::vector<int> best = hungarian_min(-w);
  const double target = assignment_value(w, best);
  const double tol = 1e-10 * std::max(1.0, w.cwiseAbs().maxCoeff()) * std::max(1, rows);

  std::vector<int> out(rows, -1);
  std::vector<char> taken(cols, 0);
  double fixed = 0.0;
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) {
      if (taken[c]) continue;
      // Optimal completion of rows i+1.. over the remaining columns.
      std::vector<int> free_cols;
      for (int j = 0; j < cols; ++j) {
        if (!taken[j] && j != c) free_cols.push_back(j);
      }
      const int rest = rows - i - 1;
      double sub = 0.0;
      if (rest > 0) {
        MatrixXd sw(rest, static_cast<Eigen::Index>(free_cols.size()));
        for (int r = 0; r < rest; ++r) {
          for (std::size_t j = 0; j < free_cols.size(); ++j) {
            sw(r, static_cast<Eigen::Index>(j)) = w(i + 1 + r, free_cols[j]);
          }
        }
        sub = assignment_value(sw, hungarian_min(-sw));
      }
      if (fixed + w(i, c) + sub >= target - tol) {
        out[i] = c;
        taken[c] = 1;
        fixed += w(i, c);
        break;
      }
    }
    if (out[i] < 0) return best;  // only reachable through rounding noise
  }
  return out;
}

inline SpectralDecomposition checked_top(const SymMatrix& y, const char* what) {
  SpectralDecomposition sd = eig(y);
  if (!(sd.values(0) > 0.0)) {
    throw ExtractionError(std::string(what) + ": largest eigenvalue is not positive (" +
                          std::to_string(sd.values(0)) + ")");
  }
  return sd;
}

// sqrt(lambda_1) u_1 with the sign that makes the entry sum nonnegative.
inline VectorXd top_factor(const SpectralDecomposition& sd) {
  VectorXd x = std::sqrt(sd.values(0)) * sd.vectors.col(0);
  if (x.sum() < 0.0) x = -x;
  return x;
}

}  // namespace detail

/// Feasible solution of one of the three problem kinds. `objective` is
/// recomputed from the instance data; `relaxation` is <C, Y> of the source
/// iterate (minus the QAP offset), a lower bound when Y solves the convex
/// relaxation.
struct RoundedSolution {
  ProblemKind kind = ProblemKind::Qap;
  Permutation permutation;  // QAP: location of each facility
  VectorXd simplex;         // StQP
  std::vector<int> labels;  // tri-partition: group of each vertex
  double objective = 0.0;
  double relaxation = 0.0;
  std::optional<double> gap_percent;
  double rank_ratio = 0.0;
};

/// mat(sqrt(lambda_1) u_1), n x n, column-major reshape of the leading factor.
inline MatrixXd extract_permutation(const SymMatrix& y, int n) {
  if (n < 1 || y.dim() != n * n) {
    throw ExtractionError("extract_permutation: matrix dim " + std::to_string(y.dim()) +
                          " is not n^2 for n = " + std::to_string(n));
  }
  const VectorXd x = detail::top_factor(detail::checked_top(y, "extract_permutation"));
  return Eigen::Map<const MatrixXd>(x.data(), n, n);
}

/// Maximizes sum_i X(i, p(i)); ties go to the lexicographically smallest p.
inline Permutation round_to_permutation(const MatrixXd& xfrac) {
  if (xfrac.rows() != xfrac.cols() || xfrac.rows() < 1) {
    throw std::invalid_argument("round_to_permutation: matrix must be square and non-empty");
  }
  return detail::max_assignment_lex(xfrac);
}

/// sum_ij A_ij B_{p(i)p(j)} + sum_i C_{i p(i)} - offset.
inline double qap_objective(const QapInstance& inst, const Permutation& perm) {
  check_permutation(perm, inst.n);
  double s = 0.0;
  for (int i = 0; i < inst.n; ++i) {
    for (int j = 0; j < inst.n; ++j) s += inst.flow(i, j) * inst.distance(perm[i], perm[j]);
  }
  if (inst.linear.size() > 0) {
    for (int i = 0; i < inst.n; ++i) s += inst.linear(i, perm[i]);
  }
  return s - inst.offset;
}

inline double stqp_objective(const StqpInstance& inst, const VectorXd& x) {
  if (x.size() != inst.n) throw std::invalid_argument("stqp_objective: length mismatch");
  return x.dot(inst.q_matrix * x);
}

/// Total weight of edges between group 0 and group 1.
inline double tripartition_objective(const TriPartInstance& inst, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != inst.n) {
    throw std::invalid_argument("tripartition_objective: length mismatch");
  }
  double s = 0.0;
  for (int v = 0; v < inst.n; ++v) {
    for (int w = 0; w < inst.n; ++w) {
      if (labels[v] == 0 && labels[w] == 1) s += inst.adjacency(v, w);
    }
  }
  return s;
}

/// Leading factor clipped at zero and rescaled onto the simplex.
inline VectorXd round_stqp(const SymMatrix& y) {
  VectorXd x = detail::top_factor(detail::checked_top(y, "round_stqp")).cwiseMax(0.0);
  const double s = x.sum();
  if (!(s > 0.0)) throw ExtractionError("round_stqp: leading factor has no positive entry");
  return x / s;
}

/// Reshapes the leading factor to n x 3 and assigns vertices to groups
/// with the sizes fixed, maximizing the total weight.
inline std::vector<int> round_tripartition(const SymMatrix& y, const std::array<int, 3>& sizes) {
  const int n = sizes[0] + sizes[1] + sizes[2];
  if (y.dim() != 3 * n) {
    throw ExtractionError("round_tripartition: matrix dim " + std::to_string(y.dim()) +
                          " is not 3n for n = " + std::to_string(n));
  }
  const VectorXd x = detail::top_factor(detail::checked_top(y, "round_tripartition"));
  // One column per group slot; slots of group k are consecutive.
  MatrixXd w(n, n);
  int slot = 0;
  std::vector<int> slot_group(n);
  for (int k = 0; k < 3; ++k) {
    for (int s = 0; s < sizes[k]; ++s, ++slot) {
      slot_group[slot] = k;
      for (int v = 0; v < n; ++v) w(v, slot) = x(k * n + v);
    }
  }
  const std::vector<int> a = detail::max_assignment_lex(w);
  std::vector<int> labels(n);
  for (int v = 0; v < n; ++v) labels[v] = slot_group[a[v]];
  return labels;
}

/// (value - opt) / opt * 100.
inline double compute_gap(double value, double opt) {
  if (opt == 0.0) throw UndefinedGapError("compute_gap: reference optimum is zero");
  return (value - opt) / opt * 100.0;
}

/// Rounds Y according to the problem kind and evaluates the result.
inline RoundedSolution round_solution(const ConicProblem& prob, const SymMatrix& y,
                                      std::optional<double> reference_opt = std::nullopt) {
  check_same_dim(y, prob.cost, "round_solution");
  RoundedSolution out;
  out.kind = prob.kind;
  out.rank_ratio = rank_ratio(y);
  out.relaxation = prob.cost.dot(y);
  switch (prob.kind) {
    case ProblemKind::Qap: {
      const auto& inst = std::get<QapInstance>(prob.source);
      out.permutation = round_to_permutation(extract_permutation(y, inst.n));
      out.objective = qap_objective(inst, out.permutation);
      out.relaxation -= inst.offset;
      break;
    }
    case ProblemKind::Stqp: {
      const auto& inst = std::get<StqpInstance>(prob.source);
      out.simplex = round_stqp(y);
      out.objective = stqp_objective(inst, out.simplex);
      break;
    }
    case ProblemKind::TriPartition: {
      const auto& inst = std::get<TriPartInstance>(prob.source);
      out.labels = round_tripartition(y, inst.sizes);
      out.objective = tripartition_objective(inst, out.labels);
      break;
    }
  }
  if (reference_opt && *reference_opt != 0.0) {
    out.gap_percent = compute_gap(out.objective, *reference_opt);
  }
  return out;
}

}  // namespace pdca
