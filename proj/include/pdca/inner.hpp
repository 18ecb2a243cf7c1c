#pragma once

// Strongly convex DCA subproblem
//
//   min  <C + rho (I - W), Y> + 1/(2 sigma) ||Y - Y_k||^2   s.t.  Y in Omega
//
// which is the Frobenius projection of V = Y_k - sigma (C + rho (I - W))
// onto Omega = {A(Y) = b} n PSD n N. Omega sits inside the face
// {V_f R V_f^T : R PSD} of the problem's FaceReduction, so the PSD copy lives
// in face coordinates and the nonnegative copy in the full space.
// Two-block ADMM: the affine block carries the quadratic term (scale then
// project), the second block is the pair of cone projections.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pdca/errors.hpp"
#include "pdca/linalg.hpp"
#include "pdca/model.hpp"
#include "pdca/penalty.hpp"

namespace pdca {

struct InnerConfig {
  double tol_kkt = 1e-6;
  int max_iters = 20000;
  double step = 1.0;        // ADMM penalty, in projection units
  double over_relax = 1.6;  // in [1, 1.9]
  bool adapt_step = true;   // residual balancing every `adapt_every` iterations
  int adapt_every = 20;
};

inline void validate(const InnerConfig& cfg) {
  if (!(cfg.tol_kkt > 0)) throw std::invalid_argument("InnerConfig: tol_kkt must be positive");
  if (!(cfg.step > 0)) throw std::invalid_argument("InnerConfig: step must be positive");
  if (cfg.max_iters < 1) throw std::invalid_argument("InnerConfig: max_iters must be >= 1");
  if (cfg.over_relax < 1.0 || cfg.over_relax > 1.9) {
    throw std::invalid_argument("InnerConfig: over_relax must lie in [1, 1.9]");
  }
}

/// Relative KKT residuals.
///   primal: ||A(Y) - b|| / (1 + ||b||)
///   cone:   max(||Y - P||, ||Y - N||) / (1 + ||Y||), P and N the cone copies
///   dual:   ||C + rho(I - W) + A^*y + S + Z + F + (Y - Y_k)/sigma|| / (1 + ||C||)
///   comp:   (|<Y,S>| + |<Y,Z>|) / ((1 + ||Y||)(1 + ||C||))
struct KktResiduals {
  double primal = std::numeric_limits<double>::infinity();
  double cone = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  double complementarity = std::numeric_limits<double>::infinity();

  double max() const { return std::max({primal, cone, dual, complementarity}); }
};

/// F is the multiplier of the implied constraint "range(Y) within the face":
/// V_f^T F V_f = 0. It is zero when the face is the whole space.
struct DualCertificate {
  VectorXd y;
  SymMatrix S;  // negative semidefinite
  SymMatrix Z;  // entrywise nonpositive
  SymMatrix F;
  KktResiduals residuals;
};

struct InnerResult {
  SymMatrix Y_next;
  DualCertificate cert;
  int iters = 0;
  bool converged = false;
  // ||Y - (Y_k - sigma (A^*y + S + Z + F + C + rho (I - W)))|| / (1 + ||Y||)
  double recovery_residual = std::numeric_limits<double>::infinity();
};

/// Holds ADMM state across calls so consecutive outer iterations warm start.
/// Not shareable while a solve is running; separate instances are independent.
class InnerSolver {
 public:
  explicit InnerSolver(const ConicProblem& prob, InnerConfig cfg = {}) : prob_(&prob), cfg_(cfg) {
    validate(cfg_);
  }

  const InnerConfig& config() const { return cfg_; }
  void set_config(const InnerConfig& cfg) {
    validate(cfg);
    cfg_ = cfg;
  }
  void reset() { warm_ = false; }

  InnerResult solve(const SymMatrix& yk, const SymMatrix& wk, const PenaltyParams& params) {
    const ConicProblem& prob = *prob_;
    const AffineMap& map = prob.constraints;
    const int q = prob.dim();
    check_same_dim(yk, prob.cost, "solve_subproblem");
    check_same_dim(wk, prob.cost, "solve_subproblem");
    if (!(params.sigma > 0)) throw std::invalid_argument("solve_subproblem: sigma must be positive");
    if (!(params.rho >= 0)) throw std::invalid_argument("solve_subproblem: rho must be >= 0");
    const double bnorm = map.rhs().norm();
    if (map.residual(yk).norm() > 1e-4 * std::max(1.0, bnorm)) {
      throw ModelError("solve_subproblem: Y_k is not feasible for A(Y) = b");
    }

    const bool full = !prob.face || prob.face->trivial();
    const AffineMap& rmap = full ? map : prob.face->reduced;
    const MatrixXd* basis = full ? nullptr : &prob.face->basis;
    auto down = [&](const MatrixXd& m) -> MatrixXd {
      if (full) return m;
      return basis->transpose() * m * *basis;
    };
    auto up_ = [&](const MatrixXd& r) -> MatrixXd {
      if (full) return r;
      return *basis * r * basis->transpose();
    };

    const double sigma = params.sigma;
    const MatrixXd g =
        prob.cost.mat() + params.rho * (MatrixXd::Identity(q, q) - wk.mat());
    const MatrixXd vr = down(yk.mat() - sigma * g);
    const double cnorm = prob.cost.norm();
    const double alpha = cfg_.over_relax;

    if (!warm_) {
      beta_ = cfg_.step;
      p_ = down(yk.mat());
      n_ = yk.mat();
      s_ = MatrixXd::Zero(p_.rows(), p_.cols());
      z_ = MatrixXd::Zero(q, q);
      warm_ = true;
    }
    // Scaled duals in projection units: U = sigma * (S or Z) / beta.
    MatrixXd up = (sigma / beta_) * s_;
    MatrixXd un = (sigma / beta_) * z_;

    InnerResult res;
    MatrixXd r, y;
    VectorXd mu;
    KktResiduals kkt;
    int it = 0;
    for (it = 1; it <= cfg_.max_iters; ++it) {
      const MatrixXd w = (vr + beta_ * (p_ - up) + beta_ * down(n_ - un)) / (1.0 + 2.0 * beta_);
      VectorXd lam;
      r = rmap.project_raw(w, &lam);
      r = 0.5 * (r + r.transpose()).eval();
      mu = (1.0 + 2.0 * beta_) * lam;
      y = up_(r);

      const MatrixXd rp = alpha * r + (1.0 - alpha) * p_;
      const MatrixXd yn = alpha * y + (1.0 - alpha) * n_;
      MatrixXd tp = rp + up;
      p_ = detail::psd_part(tp);
      up = tp - p_;
      up = 0.5 * (up + up.transpose()).eval();
      MatrixXd tn = yn + un;
      n_ = tn.cwiseMax(0.0);
      un = tn - n_;

      // Stationarity in face coordinates, projection units.
      // A^*(lam) = w - r by construction of the projection.
      const MatrixXd stat = (r - vr) + (1.0 + 2.0 * beta_) * (w - r) + beta_ * (up + down(un));
      const double dual_proj = stat.norm();
      const double ynorm = y.norm();
      kkt.primal = map.residual(y).norm() / (1.0 + bnorm);
      const double cone_abs = std::max((r - p_).norm(), (y - n_).norm());
      kkt.cone = cone_abs / (1.0 + ynorm);
      kkt.dual = dual_proj / sigma / (1.0 + cnorm);
      const double comp =
          (std::abs(r.cwiseProduct(up).sum()) + std::abs(y.cwiseProduct(un).sum())) * beta_ / sigma;
      kkt.complementarity = comp / ((1.0 + ynorm) * (1.0 + cnorm));

      if (kkt.max() <= cfg_.tol_kkt) {
        res.converged = true;
        break;
      }

      if (cfg_.adapt_step && it % cfg_.adapt_every == 0) {
        if (cone_abs > 10.0 * dual_proj && beta_ < 1e6) {
          beta_ *= 2.0;
          up *= 0.5;
          un *= 0.5;
        } else if (dual_proj > 10.0 * cone_abs && beta_ > 1e-6) {
          beta_ *= 0.5;
          up *= 2.0;
          un *= 2.0;
        }
      }
    }
    res.iters = std::min(it, cfg_.max_iters);

    s_ = (beta_ / sigma) * up;
    z_ = (beta_ / sigma) * un;

    // A persistent cone gap after many iterations means the sets do not meet.
    if (!res.converged && res.iters >= 1000 && kkt.cone > 1e-2) {
      throw ModelError("solve_subproblem: feasible set appears empty (cone residual " +
                       std::to_string(kkt.cone) + " after " + std::to_string(res.iters) +
                       " iterations)");
    }

    res.Y_next = SymMatrix(y, SymMatrix::Trusted{});
    res.cert.y = mu / sigma;
    const MatrixXd s_full = up_(s_);
    res.cert.S = SymMatrix(s_full, SymMatrix::Trusted{});
    res.cert.Z = SymMatrix(z_, SymMatrix::Trusted{});
    const MatrixXd rest = -(g + map.adjoint_raw(res.cert.y) + s_full + z_ + (y - yk.mat()) / sigma);
    MatrixXd f = full ? MatrixXd::Zero(q, q) : MatrixXd(rest - up_(down(rest)));
    f = 0.5 * (f + f.transpose()).eval();
    res.cert.F = SymMatrix(f, SymMatrix::Trusted{});
    res.cert.residuals = kkt;
    const MatrixXd recovered = yk.mat() - sigma * (map.adjoint_raw(res.cert.y) + s_full + z_ + f + g);
    res.recovery_residual = (y - recovered).norm() / (1.0 + y.norm());
    return res;
  }

 private:
  const ConicProblem* prob_;
  InnerConfig cfg_;
  bool warm_ = false;
  double beta_ = 1.0;
  MatrixXd p_, n_, s_, z_;
};

/// One-shot cold-started solve.
inline InnerResult solve_subproblem(const ConicProblem& prob, const SymMatrix& yk,
                                    const SymMatrix& wk, const PenaltyParams& params,
                                    const InnerConfig& cfg = {}) {
  InnerSolver solver(prob, cfg);
  return solver.solve(yk, wk, params);
}

/// Objective of the subproblem, constant terms dropped:
/// <C + rho (I - W), Y> + 1/(2 sigma) ||Y - Y_k||^2.
inline double subproblem_objective(const ConicProblem& prob, const SymMatrix& y,
                                   const SymMatrix& yk, const SymMatrix& wk,
                                   const PenaltyParams& params) {
  const SymMatrix g = prob.cost + (SymMatrix::identity(prob.dim()) - wk) * params.rho;
  return g.dot(y) + (y - yk).dot(y - yk) / (2.0 * params.sigma);
}

}  // namespace pdca
