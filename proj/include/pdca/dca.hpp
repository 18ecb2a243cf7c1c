#pragma once

// Proximal DCA on f_rho(Y) = <C, Y> + rho (||Y||_* - ||Y||_2) over Omega:
//   W^k = u_1 u_1^T,  Y^{k+1} = argmin <C + rho (I - W^k), Y> + ||Y - Y^k||^2 / (2 sigma)
// and the penalty-parameter search built on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdca/errors.hpp"
#include "pdca/extract.hpp"
#include "pdca/inner.hpp"
#include "pdca/linalg.hpp"
#include "pdca/model.hpp"
#include "pdca/penalty.hpp"

namespace pdca {

struct RhoBisection {
  double rho_lo = 0.1;
  double rho_hi = 100.0;
  int rounds = 8;
};

struct DcaConfig {
  double rho = 1.0;
  std::optional<double> sigma;  // default_sigma(C, rho) when unset
  InnerConfig inner;
  double tol_outer = 1e-6;
  int max_outer = 500;
  std::optional<RhoBisection> rho_bisection;
  // bisect_rho starts from (1 - w) * barycenter + w * (random feasible lift).
  double start_weight = 0.05;
  std::uint64_t seed = 0;
};

inline void validate(const DcaConfig& cfg) {
  if (!(cfg.rho >= 0.0)) throw std::invalid_argument("DcaConfig: rho must be nonnegative");
  if (cfg.sigma && !(*cfg.sigma > 0.0)) throw std::invalid_argument("DcaConfig: sigma must be positive");
  if (!(cfg.tol_outer > 0.0)) throw std::invalid_argument("DcaConfig: tol_outer must be positive");
  if (cfg.max_outer < 1) throw std::invalid_argument("DcaConfig: max_outer must be >= 1");
  if (cfg.rho_bisection) {
    const auto& b = *cfg.rho_bisection;
    if (!(b.rho_lo > 0.0) || !(b.rho_lo < b.rho_hi)) {
      throw std::invalid_argument("DcaConfig: need 0 < rho_lo < rho_hi");
    }
    if (b.rounds < 0) throw std::invalid_argument("DcaConfig: rounds must be >= 0");
  }
  if (!(cfg.start_weight >= 0.0 && cfg.start_weight < 1.0)) {
    throw std::invalid_argument("DcaConfig: start_weight must lie in [0, 1)");
  }
  validate(cfg.inner);
}

/// One outer step, as handed to the log sink.
struct IterationRecord {
  int k = 0;
  double rho = 0.0;
  double sigma = 0.0;
  double f = 0.0;        // f_rho(Y^{k+1})
  double step = 0.0;     // ||Y^{k+1} - Y^k||
  double y_norm = 0.0;   // ||Y^{k+1}||
  double lambda1 = 0.0;
  double rank_ratio = 0.0;
  int inner_iters = 0;
  bool inner_converged = false;
  KktResiduals residuals;
};

using LogSink = std::function<void(const IterationRecord&)>;

struct DcaState {
  int k = 0;
  SymMatrix Y;
  SymMatrix W;
  std::vector<double> f_history;
  std::vector<double> rank_history;
  long inner_iters = 0;
  double sigma = 0.0;
  int sigma_halvings = 0;
};

enum class DcaStatus { Stationary, MaxIters, InnerFailure };

inline const char* to_string(DcaStatus s) {
  switch (s) {
    case DcaStatus::Stationary:
      return "stationary";
    case DcaStatus::MaxIters:
      return "max_iters";
    case DcaStatus::InnerFailure:
      return "inner_failure";
  }
  return "?";
}

struct DcaOutcome {
  SymMatrix Y_final;
  DcaState state;
  DcaStatus status = DcaStatus::MaxIters;
  DualCertificate cert_final;
  double rho = 0.0;
  std::string message;

  bool rank_one(double tol_rank = kRankTol) const {
    return state.rank_history.empty() ? rank_ratio(Y_final) <= tol_rank
                                      : state.rank_history.back() <= tol_rank;
  }
};

/// Residuals of Y against Omega: affine, PSD and entrywise.
inline double feasibility_violation(const ConicProblem& prob, const SymMatrix& y) {
  const double aff = prob.constraints.residual(y).norm() / std::max(1.0, prob.rhs().norm());
  const SpectralDecomposition sd = eig(y);
  const double psd = std::max(0.0, -sd.values(sd.values.size() - 1));
  const double nn = std::max(0.0, -y.mat().minCoeff());
  return std::max({aff, psd, nn});
}

/// Closed-form point of Omega (the barycenter of all feasible lifts).
inline SymMatrix initial_point(const ConicProblem& prob) {
  SymMatrix y0 = barycenter(prob);
  const double v = feasibility_violation(prob, y0);
  if (v > 1e-8) {
    throw ModelError("initial_point: barycenter violates the constraints by " + std::to_string(v));
  }
  return y0;
}

/// Lift of a feasible combinatorial solution drawn from `seed`: a uniform
/// permutation, a uniform partition with the given sizes, or a flat
/// Dirichlet point of the simplex.
inline SymMatrix random_lift(const ConicProblem& prob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (prob.kind) {
    case ProblemKind::Qap: {
      Permutation p(std::get<QapInstance>(prob.source).n);
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
      return lift_permutation(p);
    }
    case ProblemKind::Stqp: {
      std::exponential_distribution<double> e(1.0);
      VectorXd x(prob.dim());
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = e(rng);
      return lift_simplex(x / x.sum());
    }
    case ProblemKind::TriPartition: {
      const auto& inst = std::get<TriPartInstance>(prob.source);
      std::vector<int> labels;
      for (int k = 0; k < 3; ++k) labels.insert(labels.end(), inst.sizes[k], k);
      std::shuffle(labels.begin(), labels.end(), rng);
      return lift_partition(labels, inst.sizes);
    }
  }
  throw std::logic_error("random_lift: unknown problem kind");
}

/// Convex combination of the barycenter and a random lift. The barycenter is
/// invariant under every symmetry of the instance and so are the DCA iterates
/// started there; the mix breaks such ties.
inline SymMatrix perturbed_start(const ConicProblem& prob, std::uint64_t seed, double weight) {
  if (!(weight >= 0.0 && weight < 1.0)) {
    throw std::invalid_argument("perturbed_start: weight must lie in [0, 1)");
  }
  const SymMatrix y0 = initial_point(prob);
  if (weight == 0.0) return y0;
  return y0 * (1.0 - weight) + random_lift(prob, seed) * weight;
}

/// Magnitude against which the descent inequality is checked at Y^k:
/// max(|f|, (1 + ||C||)(1 + ||Y^k||)), the same normalization as the
/// complementarity residual of the inner solver.
inline double descent_scale(const SymMatrix& cost, const SymMatrix& yk, double f) {
  return std::max(std::abs(f), (1.0 + cost.norm()) * (1.0 + yk.norm()));
}

/// Runs the outer iteration from Y0 until ||Y^{k+1} - Y^k|| <= tol_outer * max(1, ||Y^k||)
/// or max_outer steps. A step that breaks the descent inequality
///   f(Y^k) - f(Y^{k+1}) >= ||Y^{k+1} - Y^k||^2 / (2 sigma) - 10 tol_kkt descent_scale
/// is retried once with sigma halved; a second failure ends the run. Iterates
/// with primal or cone residual above 10 tol_kkt count as f = +inf.
inline DcaOutcome run_dca(const ConicProblem& prob, const DcaConfig& cfg, const SymMatrix& y0,
                          const LogSink& log = {}) {
  validate(cfg);
  check_same_dim(y0, prob.cost, "run_dca");
  if (feasibility_violation(prob, y0) > 1e-6) {
    throw ModelError("run_dca: initial point is not in the feasible set");
  }

  DcaOutcome out;
  out.rho = cfg.rho;
  DcaState& st = out.state;
  st.Y = y0;
  st.sigma = cfg.sigma ? *cfg.sigma : default_sigma(prob.cost, cfg.rho);
  SpectralDecomposition sd = eig(y0);
  double f = penalty_objective(y0, sd, prob.cost, cfg.rho);
  st.f_history.push_back(f);
  st.rank_history.push_back(rank_ratio(sd));

  InnerSolver solver(prob, cfg.inner);
  out.status = DcaStatus::MaxIters;
  for (st.k = 0; st.k < cfg.max_outer;) {
    st.W = spectral_subgradient(st.Y, sd);
    InnerResult res = solver.solve(st.Y, st.W, {cfg.rho, st.sigma});
    SpectralDecomposition sdn = eig(res.Y_next);
    double fn = penalty_objective(res.Y_next, sdn, prob.cost, cfg.rho);
    double step = (res.Y_next - st.Y).norm();
    const double slack = 10.0 * cfg.inner.tol_kkt * descent_scale(prob.cost, st.Y, f);
    // f_rho is +inf off Omega.
    auto feasible = [&](const InnerResult& r) {
      return std::max(r.cert.residuals.primal, r.cert.residuals.cone) <= 10.0 * cfg.inner.tol_kkt;
    };
    bool ok = feasible(res) && f - fn >= step * step / (2.0 * st.sigma) - slack;
    if (!ok) {
      st.sigma *= 0.5;
      ++st.sigma_halvings;
      solver.reset();
      res = solver.solve(st.Y, st.W, {cfg.rho, st.sigma});
      sdn = eig(res.Y_next);
      fn = penalty_objective(res.Y_next, sdn, prob.cost, cfg.rho);
      step = (res.Y_next - st.Y).norm();
      ok = feasible(res) && f - fn >= step * step / (2.0 * st.sigma) - slack;
    }
    st.inner_iters += res.iters;
    if (!ok) {
      out.status = DcaStatus::InnerFailure;
      out.cert_final = res.cert;
      out.message = "descent inequality failed after halving sigma at outer step " +
                    std::to_string(st.k) + " (inner converged: " +
                    (res.converged ? "yes" : "no") + ", kkt " +
                    std::to_string(res.cert.residuals.max()) + ")";
      break;
    }

    const double ynorm = st.Y.norm();
    st.Y = res.Y_next;
    sd = std::move(sdn);
    f = fn;
    ++st.k;
    st.f_history.push_back(f);
    st.rank_history.push_back(rank_ratio(sd));
    out.cert_final = res.cert;

    if (log) {
      IterationRecord rec;
      rec.k = st.k;
      rec.rho = cfg.rho;
      rec.sigma = st.sigma;
      rec.f = f;
      rec.step = step;
      rec.y_norm = st.Y.norm();
      rec.lambda1 = sd.values(0);
      rec.rank_ratio = st.rank_history.back();
      rec.inner_iters = res.iters;
      rec.inner_converged = res.converged;
      rec.residuals = res.cert.residuals;
      log(rec);
    }

    if (res.converged && step <= cfg.tol_outer * std::max(1.0, ynorm)) {
      out.status = DcaStatus::Stationary;
      break;
    }
  }
  out.Y_final = st.Y;
  return out;
}

/// One tested penalty value.
struct RhoTrial {
  double rho = 0.0;
  double rank_ratio = 0.0;
  int rank = 0;
  double objective = 0.0;  // rounded feasible objective
  DcaStatus status = DcaStatus::MaxIters;
  int outer_iters = 0;
};

struct BisectionResult {
  DcaOutcome outcome;
  double rho = 0.0;
  bool rank_one = false;
  RoundedSolution solution;
  std::vector<RhoTrial> trials;
  int doublings = 0;
};

/// Single run at cfg.rho from perturbed_start, reported like a one-trial search.
inline BisectionResult solve_at_rho(const ConicProblem& prob, const DcaConfig& cfg,
                                    const LogSink& log = {}) {
  validate(cfg);
  BisectionResult r;
  r.outcome = run_dca(prob, cfg, perturbed_start(prob, cfg.seed, cfg.start_weight), log);
  r.rho = cfg.rho;
  r.solution = round_solution(prob, r.outcome.Y_final);
  const SpectralDecomposition sd = eig(r.outcome.Y_final);
  r.rank_one = rank_ratio(sd) <= kRankTol;
  r.trials.push_back({cfg.rho, rank_ratio(sd), numerical_rank(sd), r.solution.objective,
                      r.outcome.status, r.outcome.state.k});
  return r;
}

/// Penalty search. Runs at rho_hi, doubling it up to `rounds` times until the
/// result is rank one. Then tries rho_lo, and otherwise bisects [rho_lo, rho_hi]
/// at the geometric midpoint for `rounds` steps, moving toward the smallest
/// rank-one rho. Among rank-one outcomes the smallest rounded objective wins,
/// ties going to the smaller rho. Each run starts from
/// perturbed_start(prob, seed, start_weight).
inline BisectionResult bisect_rho(const ConicProblem& prob, const DcaConfig& cfg,
                                  const LogSink& log = {}) {
  validate(cfg);
  if (!cfg.rho_bisection) throw std::invalid_argument("bisect_rho: rho_bisection is not set");
  const RhoBisection b = *cfg.rho_bisection;
  const SymMatrix y0 = perturbed_start(prob, cfg.seed, cfg.start_weight);

  BisectionResult best;
  bool have_best = false;
  auto run = [&](double rho) {
    DcaConfig c = cfg;
    c.rho = rho;
    if (!cfg.sigma) c.sigma.reset();
    DcaOutcome o = run_dca(prob, c, y0, log);
    RoundedSolution sol = round_solution(prob, o.Y_final);
    const SpectralDecomposition sd = eig(o.Y_final);
    RhoTrial t{rho, rank_ratio(sd), numerical_rank(sd), sol.objective, o.status, o.state.k};
    best.trials.push_back(t);
    const bool r1 = t.rank_ratio <= kRankTol;
    if (r1) {
      const bool better = !have_best || !best.rank_one || sol.objective < best.solution.objective ||
                          (sol.objective == best.solution.objective && rho < best.rho);
      if (better) {
        best.outcome = o;
        best.rho = rho;
        best.rank_one = true;
        best.solution = sol;
        have_best = true;
      }
    } else if (!have_best || !best.rank_one) {
      best.outcome = o;
      best.rho = rho;
      best.rank_one = false;
      best.solution = sol;
      have_best = true;
    }
    return r1;
  };

  double hi = b.rho_hi;
  bool ok = run(hi);
  while (!ok && best.doublings < b.rounds) {
    hi *= 2.0;
    ++best.doublings;
    ok = run(hi);
  }
  if (!ok) return best;

  if (run(b.rho_lo)) return best;
  double lo = b.rho_lo;
  for (int r = 0; r < b.rounds; ++r) {
    const double mid = std::sqrt(lo * hi);
    if (run(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return best;
}

}  // namespace pdca
