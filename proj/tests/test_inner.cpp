#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "pdca/dca.hpp"
#include "pdca/inner.hpp"
#include "pdca/io.hpp"

using pdca::MatrixXd;
using pdca::SymMatrix;
using pdca::VectorXd;

namespace {

// Random convex combination of a few random lifts; lies in Omega.
SymMatrix random_feasible(const pdca::ConicProblem& p, std::mt19937_64& rng, int parts = 3) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  SymMatrix y = SymMatrix::zero(p.dim());
  double total = 0.0;
  for (int k = 0; k < parts; ++k) {
    const double w = u(rng);
    y = y + pdca::random_lift(p, rng()) * w;
    total += w;
  }
  return y * (1.0 / total);
}

void expect_certificate(const pdca::ConicProblem& p, const SymMatrix& yk, const SymMatrix& wk,
                        const pdca::PenaltyParams& par, const pdca::InnerResult& r, double tol) {
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.cert.residuals.max(), tol);
  EXPECT_LE(r.recovery_residual, tol);
  EXPECT_LE(p.constraints.residual(r.Y_next).norm(), 10 * tol * (1 + p.rhs().norm()));
  const double ynorm = r.Y_next.norm();
  EXPECT_GE(pdca::eig(r.Y_next).values.minCoeff(), -10 * tol * (1 + ynorm));
  EXPECT_GE(r.Y_next.mat().minCoeff(), -10 * tol * (1 + ynorm));
  const double snorm = r.cert.S.norm();
  EXPECT_LE(pdca::eig(r.cert.S).values(0), 1e-8 * (1 + snorm));
  EXPECT_LE(r.cert.Z.mat().maxCoeff(), 0.0);
  // Stationarity written out with the returned multipliers.
  const MatrixXd g = p.cost.mat() + par.rho * (MatrixXd::Identity(p.dim(), p.dim()) - wk.mat());
  const MatrixXd stat = g + p.constraints.adjoint_raw(r.cert.y) + r.cert.S.mat() + r.cert.Z.mat() +
                        r.cert.F.mat() + (r.Y_next.mat() - yk.mat()) / par.sigma;
  EXPECT_LE(stat.norm() * par.sigma / (1 + ynorm), 2 * tol);
}

}  // namespace

TEST(Inner, SingletonFeasibleSet) {
  const pdca::ConicProblem p = pdca::build_stqp({1, MatrixXd::Constant(1, 1, 5.0)});
  const SymMatrix one = SymMatrix::identity(1);
  for (double sigma : {0.01, 1.0, 100.0}) {
    const pdca::InnerResult r = pdca::solve_subproblem(p, one, one, {1.0, sigma});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.Y_next(0, 0), 1.0, 1e-8);
  }
}

TEST(Inner, FixedPointWithoutObjective) {
  pdca::QapInstance inst = pdca::generate_random(4, 3);
  inst.flow.setZero();
  const pdca::ConicProblem p = pdca::build_qap(inst);
  std::mt19937_64 rng(1);
  const SymMatrix yk = random_feasible(p, rng);
  const pdca::InnerResult r = pdca::solve_subproblem(p, yk, pdca::spectral_subgradient(yk), {0.0, 1.0});
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.Y_next - yk).norm(), 1e-5 * (1 + yk.norm()));
}

// Minimizer of a + 2b + (1/2)||Y - E/4||^2 over {[[a,c],[c,b]] : a+b+2c = 1, PSD, >= 0},
// by a grid over (a, c) refined around the best cell.
TEST(Inner, StqpQ2MatchesGridOracle) {
  const pdca::ConicProblem p = pdca::build_stqp({2, MatrixXd{{1, 0}, {0, 2}}});
  const SymMatrix yk = SymMatrix::ones(2) * 0.25;
  pdca::InnerConfig cfg;
  cfg.tol_kkt = 1e-9;
  cfg.max_iters = 200000;
  const pdca::InnerResult r = pdca::solve_subproblem(p, yk, pdca::spectral_subgradient(yk), {0.0, 1.0}, cfg);
  ASSERT_TRUE(r.converged);

  auto obj = [](double a, double c) {
    const double b = 1 - a - 2 * c;
    if (b < 0 || c < 0 || a < 0 || a * b < c * c) return 1e300;
    return a + 2 * b + 0.5 * ((a - .25) * (a - .25) + (b - .25) * (b - .25) + 2 * (c - .25) * (c - .25));
  };
  double ba = 0.5, bc = 0.25, lo_a = 0, hi_a = 1, lo_c = 0, hi_c = 0.5;
  for (int level = 0; level < 6; ++level) {
    double best = 1e300;
    const int steps = 400;
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= steps; ++j) {
        const double a = lo_a + (hi_a - lo_a) * i / steps;
        const double c = lo_c + (hi_c - lo_c) * j / steps;
        const double v = obj(a, c);
        if (v < best) {
          best = v;
          ba = a;
          bc = c;
        }
      }
    }
    const double wa = (hi_a - lo_a) / 20, wc = (hi_c - lo_c) / 20;
    lo_a = std::max(0.0, ba - wa), hi_a = std::min(1.0, ba + wa);
    lo_c = std::max(0.0, bc - wc), hi_c = std::min(0.5, bc + wc);
  }
  EXPECT_NEAR(r.Y_next(0, 0), ba, 1e-4);
  EXPECT_NEAR(r.Y_next(0, 1), bc, 1e-4);
  EXPECT_NEAR(r.Y_next(1, 1), 1 - ba - 2 * bc, 1e-4);
}

TEST(Inner, KktCertificateOnRandomSubproblems) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 18; ++t) {
    pdca::ConicProblem p;
    switch (t % 3) {
      case 0: p = pdca::build_qap(pdca::generate_random(2 + t % 4, rng())); break;
      case 1: p = pdca::build_stqp(pdca::generate_random_stqp(2 + t % 7, rng())); break;
      default: p = pdca::build_tripartition(pdca::generate_random_tripartition(3 + t % 5, rng())); break;
    }
    const SymMatrix yk = random_feasible(p, rng);
    const SymMatrix wk = pdca::spectral_subgradient(yk);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    const double rho = u(rng);
    const pdca::PenaltyParams par{rho, pdca::default_sigma(p.cost, std::max(rho, 0.1))};
    const pdca::InnerResult r = pdca::solve_subproblem(p, yk, wk, par);
    SCOPED_TRACE(std::string(pdca::to_string(p.kind)) + " q=" + std::to_string(p.dim()));
    expect_certificate(p, yk, wk, par, r, 1e-6);
  }
}

TEST(Inner, OptimalityAndStrongConvexityGap) {
  std::mt19937_64 rng(77);
  const pdca::ConicProblem p = pdca::build_qap(pdca::generate_random(4, 8));
  const SymMatrix yk = random_feasible(p, rng);
  const SymMatrix wk = pdca::spectral_subgradient(yk);
  const pdca::PenaltyParams par{2.0, pdca::default_sigma(p.cost, 2.0)};
  pdca::InnerConfig cfg;
  cfg.tol_kkt = 1e-8;
  cfg.max_iters = 100000;
  const pdca::InnerResult r = pdca::solve_subproblem(p, yk, wk, par, cfg);
  ASSERT_TRUE(r.converged);
  const double fy = pdca::subproblem_objective(p, r.Y_next, yk, wk, par);
  const double scale = 1e-6 * (1 + std::abs(fy));
  for (int t = 0; t < 100; ++t) {
    const SymMatrix yt = random_feasible(p, rng, 1 + t % 4);
    const double ft = pdca::subproblem_objective(p, yt, yk, wk, par);
    EXPECT_LE(fy, ft + scale);
    EXPECT_GE(ft - fy, (yt - r.Y_next).dot(yt - r.Y_next) / (2 * par.sigma) - scale);
  }
}

TEST(Inner, Deterministic) {
  std::mt19937_64 rng(5);
  const pdca::ConicProblem p = pdca::build_tripartition(pdca::generate_random_tripartition(5, 5));
  const SymMatrix yk = random_feasible(p, rng);
  const SymMatrix wk = pdca::spectral_subgradient(yk);
  const pdca::InnerResult a = pdca::solve_subproblem(p, yk, wk, {1.0, 0.05});
  const pdca::InnerResult b = pdca::solve_subproblem(p, yk, wk, {1.0, 0.05});
  EXPECT_EQ(a.iters, b.iters);
  EXPECT_TRUE((a.Y_next.mat().array() == b.Y_next.mat().array()).all());
}

TEST(Inner, RejectsInfeasibleStartAndBadParams) {
  const pdca::ConicProblem p = pdca::build_stqp(pdca::generate_random_stqp(3, 1));
  const SymMatrix bad = SymMatrix::identity(3);
  EXPECT_THROW(pdca::solve_subproblem(p, bad, bad, {1.0, 1.0}), pdca::ModelError);
  const SymMatrix ok = pdca::barycenter(p);
  EXPECT_THROW(pdca::solve_subproblem(p, ok, ok, {1.0, 0.0}), std::invalid_argument);
  pdca::InnerConfig cfg;
  cfg.over_relax = 2.5;
  EXPECT_THROW(pdca::solve_subproblem(p, ok, ok, {1.0, 1.0}, cfg), std::invalid_argument);
}

TEST(Inner, IterationCapReportsNotConverged) {
  const pdca::ConicProblem p = pdca::build_qap(pdca::generate_random(4, 2));
  const SymMatrix yk = pdca::barycenter(p);
  pdca::InnerConfig cfg;
  cfg.max_iters = 3;
  const pdca::InnerResult r = pdca::solve_subproblem(p, yk, pdca::spectral_subgradient(yk), {1.0, 0.01}, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iters, 3);
}
