#pragma once

// DC penalty f_rho(Y) = <C, Y> + rho (||Y||_* - ||Y||_2) and the spectral
// subgradient of the concave part.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pdca/linalg.hpp"

namespace pdca {

struct PenaltyParams {
  double rho = 1.0;
  double sigma = 1.0;  // proximal weight
};

inline void check_same_dim(const SymMatrix& a, const SymMatrix& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw ModelError(std::string(what) + ": dimension mismatch (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  }
}

/// ||Y||_* - ||Y||_2 from an eigendecomposition. Valid for indefinite Y.
inline double rank_penalty(const SpectralDecomposition& sd) {
  const VectorXd& w = sd.values;
  const double nuclear = w.cwiseAbs().sum();
  const double spectral = std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
  return nuclear - spectral;
}

/// `sd` must be the decomposition of `y`.
inline double penalty_objective(const SymMatrix& y, const SpectralDecomposition& sd,
                                const SymMatrix& cost, double rho) {
  check_same_dim(y, cost, "penalty_objective");
  return cost.dot(y) + rho * rank_penalty(sd);
}

inline double penalty_objective(const SymMatrix& y, const SymMatrix& cost, double rho) {
  return penalty_objective(y, eig(y), cost, rho);
}

/// u_1 u_1^T for the sign-fixed top eigenvector. Y = 0 maps to e_1 e_1^T.
inline SymMatrix spectral_subgradient(const SymMatrix& y, const SpectralDecomposition& sd) {
  if (y.mat().isZero(0.0)) {
    VectorXd e1 = VectorXd::Zero(y.dim());
    e1(0) = 1.0;
    return SymMatrix::outer(e1);
  }
  return SymMatrix::outer(sd.vectors.col(0));
}

inline SymMatrix spectral_subgradient(const SymMatrix& y) { return spectral_subgradient(y, eig(y)); }

/// 1 / ||C + rho I||_2.
inline double default_sigma(const SymMatrix& cost, double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("default_sigma: rho must be nonnegative");
  const SpectralDecomposition sd = eig(cost + SymMatrix::identity(cost.dim()) * rho);
  const double norm = std::max(std::abs(sd.values(0)), std::abs(sd.values(sd.values.size() - 1)));
  return norm > 0.0 ? 1.0 / norm : 1.0;
}

}  // namespace pdca
