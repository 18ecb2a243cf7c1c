#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "pdca/extract.hpp"
#include "pdca/io.hpp"
#include "pdca/penalty.hpp"

using pdca::MatrixXd;
using pdca::SymMatrix;
using pdca::VectorXd;

TEST(PenaltyObjective, RankOneHasNoPenalty) {
  std::mt19937_64 rng(1);
  const SymMatrix y = SymMatrix::outer(testing_util::random_nonneg(rng, 6));
  const SymMatrix c = testing_util::random_sym(rng, 6);
  EXPECT_NEAR(pdca::penalty_objective(y, c, 10.0), c.dot(y), 1e-12 * std::max(1.0, y.norm()) * 10);
}

TEST(PenaltyObjective, IdentityExample) {
  EXPECT_DOUBLE_EQ(pdca::penalty_objective(SymMatrix::identity(2), SymMatrix::zero(2), 3.0), 3.0);
}

TEST(PenaltyObjective, SpectralIdentityOnPsd) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const SymMatrix y = testing_util::random_psd(rng, 8, 1 + t % 8);
    const SymMatrix c = testing_util::random_sym(rng, 8);
    const VectorXd w = pdca::eig(y).values;
    EXPECT_NEAR(pdca::penalty_objective(y, c, 1.5), c.dot(y) + 1.5 * (w.sum() - w(0)), 1e-10 * (1 + y.norm()));
    EXPECT_NEAR(pdca::penalty_objective(y, c, 1.5), c.dot(y) + 1.5 * (y.trace() - w(0)), 1e-10 * (1 + y.norm()));
  }
}

TEST(PenaltyObjective, IndefiniteUsesSpectralNorm) {
  const SymMatrix y = SymMatrix::diagonal(VectorXd{{1.0, -4.0}});
  EXPECT_DOUBLE_EQ(pdca::penalty_objective(y, SymMatrix::zero(2), 1.0), 1.0);
  EXPECT_THROW(pdca::penalty_objective(y, SymMatrix::zero(3), 1.0), pdca::ModelError);
}

TEST(PenaltyObjective, ZeroIffRankAtMostOneAndMonotoneInRho) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const SymMatrix r1 = SymMatrix::outer(testing_util::random_nonneg(rng, 5));
    EXPECT_NEAR(pdca::rank_penalty(pdca::eig(r1)), 0.0, 1e-12 * r1.norm());
    const SymMatrix r2 = testing_util::random_psd(rng, 5, 2);
    const double p = pdca::rank_penalty(pdca::eig(r2));
    EXPECT_GT(p, 1e-8);
    const SymMatrix c = testing_util::random_sym(rng, 5);
    EXPECT_LT(pdca::penalty_objective(r2, c, 1.0), pdca::penalty_objective(r2, c, 2.0));
  }
}

TEST(SpectralSubgradient, Examples) {
  const SymMatrix w = pdca::spectral_subgradient(SymMatrix::diagonal(VectorXd{{5.0, 1.0}}));
  EXPECT_TRUE(w.mat().isApprox(MatrixXd{{1, 0}, {0, 0}}));
  const VectorXd v{{1.0, 2.0, 2.0}};
  EXPECT_LE((pdca::spectral_subgradient(SymMatrix::outer(v)).mat() - v * v.transpose() / 9.0).norm(), 1e-14);
  const SymMatrix w0 = pdca::spectral_subgradient(SymMatrix::zero(3));
  EXPECT_EQ(w0(0, 0), 1.0);
  EXPECT_EQ(w0.trace(), 1.0);
}

TEST(SpectralSubgradient, SubgradientInequality) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix y = testing_util::random_psd(rng, 6, 1 + t % 6);
    const SymMatrix z = testing_util::random_psd(rng, 6, 1 + (t / 6) % 6);
    const SymMatrix w = pdca::spectral_subgradient(y);
    const double ly = pdca::eig(y).values(0), lz = pdca::eig(z).values(0);
    EXPECT_NEAR(w.trace(), 1.0, 1e-12);
    EXPECT_GE(pdca::eig(w).values(5), -1e-12);
    EXPECT_NEAR(w.dot(y), ly, 1e-10 * ly);
    EXPECT_GE(lz, ly + w.dot(z - y) - 1e-10 * (1 + lz));
  }
}

TEST(DefaultSigma, Examples) {
  EXPECT_DOUBLE_EQ(pdca::default_sigma(SymMatrix::zero(4), 2.0), 0.5);
  EXPECT_DOUBLE_EQ(pdca::default_sigma(SymMatrix::diagonal(VectorXd{{3.0, -1.0}}), 1.0), 0.25);
  std::mt19937_64 rng(5);
  const SymMatrix c = testing_util::random_sym(rng, 7);
  const MatrixXd shifted = c.mat() + 0.7 * MatrixXd::Identity(7, 7);
  const double norm = Eigen::JacobiSVD<MatrixXd>(shifted).singularValues()(0);
  EXPECT_NEAR(pdca::default_sigma(c, 0.7), 1.0 / norm, 1e-10);
}

// On n = 3 the minimizer of f_rho over the lifted permutations together with
// a grid of rank-two feasible points (mixtures of two lifts) is a lifted
// optimum once rho is large enough.
TEST(ExactPenalty, EnumeratedSetN3) {
  const pdca::QapInstance inst = pdca::generate_random(3, 21);
  const pdca::ConicProblem p = pdca::build_qap(inst);
  std::vector<pdca::Permutation> perms;
  pdca::Permutation perm{0, 1, 2};
  do perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  double opt = 1e300;
  for (const auto& q : perms) opt = std::min(opt, pdca::qap_objective(inst, q));

  std::vector<SymMatrix> pts;
  for (const auto& q : perms) pts.push_back(pdca::lift_permutation(q));
  for (std::size_t a = 0; a < perms.size(); ++a) {
    for (std::size_t b = a + 1; b < perms.size(); ++b) {
      for (int s = 1; s < 10; ++s) {
        const double t = s / 10.0;
        pts.push_back(pdca::lift_permutation(perms[a]) * t + pdca::lift_permutation(perms[b]) * (1 - t));
      }
    }
  }
  for (double rho : {100.0, 1000.0}) {
    std::size_t arg = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double f = pdca::penalty_objective(pts[i], p.cost, rho);
      if (f < best) {
        best = f;
        arg = i;
      }
    }
    ASSERT_LT(arg, perms.size()) << "rho=" << rho;
    EXPECT_EQ(pdca::qap_objective(inst, perms[arg]), opt);
  }
}
