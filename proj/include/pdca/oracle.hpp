#pragma once

// Exhaustive ground truth for tiny instances.

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pdca/extract.hpp"
#include "pdca/model.hpp"

namespace pdca {

struct QapOracle {
  double opt = 0.0;
  std::vector<Permutation> minimizers;  // lexicographic order
};

/// Enumerates all n! permutations (n <= 10).
inline QapOracle qap_brute_force(const QapInstance& inst) {
  validate(inst);
  if (inst.n > 10) throw std::invalid_argument("qap_brute_force: n must be <= 10");
  Permutation p(inst.n);
  std::iota(p.begin(), p.end(), 0);
  QapOracle out;
  out.opt = std::numeric_limits<double>::infinity();
  do {
    const double v = qap_objective(inst, p);
    if (v < out.opt) {
      out.opt = v;
      out.minimizers.assign(1, p);
    } else if (v == out.opt) {
      out.minimizers.push_back(p);
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

struct StqpOracle {
  double opt = 0.0;
  VectorXd minimizer;
};

/// Minimum of x^T Q x over the simplex (n <= 15). For every support the
/// stationary point of the quadratic on its affine hull solves
///   [2 Q_SS  1; 1^T  0] [x; mu] = [0; 1];
/// nonnegative solutions are candidates, and so is every vertex.
inline StqpOracle stqp_brute_force(const StqpInstance& inst) {
  validate(inst);
  const int n = inst.n;
  if (n > 15) throw std::invalid_argument("stqp_brute_force: n must be <= 15");
  StqpOracle out;
  out.opt = std::numeric_limits<double>::infinity();
  auto consider = [&](const VectorXd& x) {
    const double v = x.dot(inst.q_matrix * x);
    if (v < out.opt) {
      out.opt = v;
      out.minimizer = x;
    }
  };
  for (int i = 0; i < n; ++i) consider(VectorXd::Unit(n, i));
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    const int k = static_cast<int>(s.size());
    if (k < 2) continue;
    MatrixXd kkt = MatrixXd::Zero(k + 1, k + 1);
    for (int a = 0; a < k; ++a) {
      for (int c = 0; c < k; ++c) kkt(a, c) = 2.0 * inst.q_matrix(s[a], s[c]);
      kkt(a, k) = 1.0;
      kkt(k, a) = 1.0;
    }
    VectorXd rhs = VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const VectorXd sol = lu.solve(rhs);
    if (sol.head(k).minCoeff() < -1e-12) continue;
    VectorXd x = VectorXd::Zero(n);
    for (int a = 0; a < k; ++a) x(s[a]) = std::max(0.0, sol(a));
    x /= x.sum();
    consider(x);
  }
  return out;
}

struct TriPartOracle {
  double opt = 0.0;
  std::vector<std::vector<int>> minimizers;  // lexicographic order of labels
};

/// Enumerates all n! / (m1! m2! m3!) labelings with the given sizes (n <= 12).
inline TriPartOracle tripartition_brute_force(const TriPartInstance& inst) {
  validate(inst);
  if (inst.n > 12) throw std::invalid_argument("tripartition_brute_force: n must be <= 12");
  std::vector<int> labels;
  for (int k = 0; k < 3; ++k) labels.insert(labels.end(), inst.sizes[k], k);
  TriPartOracle out;
  out.opt = std::numeric_limits<double>::infinity();
  do {
    const double v = tripartition_objective(inst, labels);
    if (v < out.opt) {
      out.opt = v;
      out.minimizers.assign(1, labels);
    } else if (v == out.opt) {
      out.minimizers.push_back(labels);
    }
  } while (std::next_permutation(labels.begin(), labels.end()));
  return out;
}

}  // namespace pdca
