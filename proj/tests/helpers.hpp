#pragma once

#include <Eigen/Dense>

#include <random>

#include "pdca/linalg.hpp"

namespace testing_util {

inline Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int q, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::MatrixXd m(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i; j < q; ++j) m(i, j) = m(j, i) = d(rng);
  }
  return m;
}

inline pdca::SymMatrix random_sym(std::mt19937_64& rng, int q, double scale = 1.0) {
  return pdca::SymMatrix(random_symmetric(rng, q, scale));
}

// G G^T with G of shape q x r.
inline pdca::SymMatrix random_psd(std::mt19937_64& rng, int q, int r) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd g(q, r);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < r; ++j) g(i, j) = d(rng);
  }
  return pdca::SymMatrix(g * g.transpose(), pdca::SymMatrix::Trusted{});
}

inline Eigen::VectorXd random_nonneg(std::mt19937_64& rng, int q) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(q);
  for (int i = 0; i < q; ++i) v(i) = d(rng);
  return v;
}

}  // namespace testing_util
