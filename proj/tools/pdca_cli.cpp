// pdca: solve | sweep-rho | bench | verify
//
// Exit codes: 0 success (solve: stationary), 1 bad input, 2 solver did not
// reach a stationary point (best-effort output is still written).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pdca/pdca.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct SolverFlags {
  double tol_kkt = 1e-6;
  double tol_outer = 1e-6;
  double rho = -1.0;  // < 0: search
  double rho_lo = 0.1;
  double rho_hi = 10.0;
  int rounds = 8;
  double sigma = 0.0;  // 0: default
  int max_outer = 500;
  int max_inner = 20000;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--tol-kkt", f.tol_kkt, "Inner relative KKT tolerance")->capture_default_str();
  app->add_option("--tol-outer", f.tol_outer, "Outer step tolerance")->capture_default_str();
  app->add_option("--rho", f.rho, "Fixed penalty parameter; omit to search [rho-lo, rho-hi]");
  app->add_option("--rho-lo", f.rho_lo, "Lower end of the rho search")->capture_default_str();
  app->add_option("--rho-hi", f.rho_hi, "Upper end of the rho search")->capture_default_str();
  app->add_option("--rounds", f.rounds, "Doubling and bisection rounds")->capture_default_str();
  app->add_option("--sigma", f.sigma, "Proximal weight (default 1/||C + rho I||)");
  app->add_option("--max-outer", f.max_outer, "Outer iteration cap")->capture_default_str();
  app->add_option("--max-inner", f.max_inner, "Inner iteration cap")->capture_default_str();
  app->add_option("--seed", f.seed, "Seed for the starting point")->capture_default_str();
  app->add_option("--threads", f.threads, "Worker threads")
      ->envname("PDCA_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

pdca::DcaConfig make_config(const SolverFlags& f) {
  pdca::DcaConfig cfg;
  cfg.inner.tol_kkt = f.tol_kkt;
  cfg.inner.max_iters = f.max_inner;
  cfg.tol_outer = f.tol_outer;
  cfg.max_outer = f.max_outer;
  cfg.seed = f.seed;
  if (f.sigma > 0.0) cfg.sigma = f.sigma;
  if (f.rho >= 0.0) {
    cfg.rho = f.rho;
  } else {
    cfg.rho_bisection = pdca::RhoBisection{f.rho_lo, f.rho_hi, f.rounds};
  }
  pdca::validate(cfg);
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json permutation_json(const pdca::Permutation& p) {
  json a = json::array();
  for (int v : p) a.push_back(v + 1);
  return a;
}

std::string permutation_text(const pdca::Permutation& p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i] + 1;
  return os.str();
}

struct Loaded {
  pdca::QapInstance inst;
  std::optional<double> opt;
};

Loaded load(const std::string& path, const std::string& sln_path) {
  Loaded l;
  l.inst = pdca::to_qap(pdca::load_instance(path));
  if (!sln_path.empty()) {
    const pdca::SolutionFile s = pdca::load_solution(sln_path);
    pdca::check_solution(l.inst, s);
    l.opt = static_cast<double>(s.opt_value);
  }
  return l;
}

// Runs worker(i) for i in [0, count) on `threads` threads.
template <class F>
void parallel_for(int count, int threads, F worker) {
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int t = std::max(1, std::min(threads, count));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) worker(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------

int cmd_solve(const std::string& path, const std::string& sln, const SolverFlags& flags,
              const std::string& json_out, const std::string& log_out) {
  Loaded l = load(path, sln);
  const pdca::ConicProblem prob = pdca::build_qap(l.inst);
  const pdca::DcaConfig cfg = make_config(flags);

  std::ofstream log_file;
  pdca::LogSink sink;
  if (!log_out.empty()) {
    log_file.open(log_out);
    if (!log_file) throw pdca::ParseError("cannot write '" + log_out + "'");
    sink = [&](const pdca::IterationRecord& r) {
      log_file << json{{"k", r.k},
                       {"rho", r.rho},
                       {"sigma", r.sigma},
                       {"f_rho", r.f},
                       {"step", r.step},
                       {"lambda1", r.lambda1},
                       {"rank_ratio", r.rank_ratio},
                       {"inner_iters", r.inner_iters},
                       {"inner_converged", r.inner_converged},
                       {"kkt",
                        {r.residuals.primal, r.residuals.cone, r.residuals.dual,
                         r.residuals.complementarity}}}
                      .dump()
               << "\n";
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  const pdca::BisectionResult res =
      cfg.rho_bisection ? pdca::bisect_rho(prob, cfg, sink) : pdca::solve_at_rho(prob, cfg, sink);
  const double secs = seconds_since(t0);

  json out;
  out["schema_version"] = kSchemaVersion;
  out["instance"] = l.inst.name;
  out["n"] = l.inst.n;
  out["status"] = pdca::to_string(res.outcome.status);
  out["rho"] = res.rho;
  out["sigma"] = res.outcome.state.sigma;
  out["relaxation_value"] = res.solution.relaxation;
  out["rank_ratio"] = res.solution.rank_ratio;
  out["outer_iters"] = res.outcome.state.k;
  out["inner_iters"] = res.outcome.state.inner_iters;
  out["time_seconds"] = secs;
  out["time"] = pdca::format_hms(secs);
  json trials = json::array();
  for (const auto& t : res.trials) {
    trials.push_back({{"rho", t.rho},
                      {"rank_ratio", t.rank_ratio},
                      {"rank", t.rank},
                      {"objective", t.objective},
                      {"status", pdca::to_string(t.status)},
                      {"outer_iters", t.outer_iters}});
  }
  out["trials"] = trials;
  if (cfg.rho == 0.0 && !cfg.rho_bisection) {
    // Convex relaxation only: the value is a lower bound, Y need not be rank one.
    out["lower_bound"] = res.solution.relaxation;
    out["rank_one"] = nullptr;
  } else {
    out["rank_one"] = res.rank_one;
    out["objective"] = res.solution.objective;
    out["permutation"] = permutation_json(res.solution.permutation);
    if (l.opt) {
      out["reference_opt"] = *l.opt;
      if (*l.opt != 0.0) {
        out["gap_percent"] = pdca::compute_gap(res.solution.objective, *l.opt);
      } else {
        out["gap_percent"] = res.solution.objective == 0.0 ? json(0.0) : json(nullptr);
      }
    }
  }

  const std::string text = out.dump(2);
  if (json_out.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream f(json_out);
    if (!f) throw pdca::ParseError("cannot write '" + json_out + "'");
    f << text << "\n";
  }
  return res.outcome.status == pdca::DcaStatus::Stationary ? 0 : 2;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> g;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !(v >= 0.0)) {
      throw pdca::ParseError("--grid: '" + tok + "' is not a nonnegative number");
    }
    g.push_back(v);
  }
  if (g.empty()) throw pdca::ParseError("--grid: empty");
  return g;
}

int cmd_sweep(const std::string& path, const std::string& sln, const std::string& grid_text,
              const std::string& out_csv, const SolverFlags& flags) {
  Loaded l = load(path, sln);
  if (!l.opt && l.inst.n <= 8) l.opt = pdca::qap_brute_force(l.inst).opt;
  const pdca::ConicProblem prob = pdca::build_qap(l.inst);
  const std::vector<double> grid = parse_grid(grid_text);

  struct Row {
    double rho = 0, gap = 0, f = 0, secs = 0;
    int rank = 0;
    bool has_gap = false;
    pdca::DcaStatus status{};
  };
  std::vector<Row> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), flags.threads, [&](int i) {
    SolverFlags f = flags;
    f.rho = grid[i];
    const pdca::DcaConfig cfg = make_config(f);
    const auto t0 = std::chrono::steady_clock::now();
    const pdca::BisectionResult r = pdca::solve_at_rho(prob, cfg);
    Row& row = rows[i];
    row.rho = grid[i];
    row.secs = seconds_since(t0);
    row.rank = r.trials.front().rank;
    row.f = r.outcome.state.f_history.back();
    row.status = r.outcome.status;
    if (l.opt && *l.opt != 0.0) {
      row.gap = pdca::compute_gap(r.solution.objective, *l.opt);
      row.has_gap = true;
    }
  });

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out_csv.empty()) {
    file.open(out_csv);
    if (!file) throw pdca::ParseError("cannot write '" + out_csv + "'");
    os = &file;
  }
  *os << "rho,gap_percent,rank,f_rho,time_seconds,status\n";
  *os << std::setprecision(17);
  bool all_ok = true;
  for (const Row& r : rows) {
    *os << r.rho << ",";
    if (r.has_gap) *os << r.gap;
    *os << "," << r.rank << "," << r.f << "," << r.secs << "," << pdca::to_string(r.status) << "\n";
    all_ok = all_ok && r.status == pdca::DcaStatus::Stationary;
  }
  return all_ok ? 0 : 2;
}

struct ManifestEntry {
  std::string path, sln;
};

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pdca::ParseError("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string p) {
    p.erase(0, p.find_first_not_of(" \t"));
    p.erase(p.find_last_not_of(" \t\r") + 1);
    if (p.empty()) return p;
    const fs::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry e;
    const std::size_t comma = line.find(',');
    e.path = resolve(line.substr(0, comma));
    if (comma != std::string::npos) e.sln = resolve(line.substr(comma + 1));
    if (e.path.empty()) {
      throw pdca::ParseError(path + ":" + std::to_string(lineno) + ": missing instance path");
    }
    out.push_back(e);
  }
  return out;
}

int cmd_bench(const std::string& manifest, const std::string& out_path, const SolverFlags& flags) {
  const std::vector<ManifestEntry> entries = read_manifest(manifest);
  struct Row {
    std::string name, opt = "-", value = "-", gap = "-", time = "-", perm = "-", status = "error";
    std::string error;
  };
  std::vector<Row> rows(entries.size());
  parallel_for(static_cast<int>(entries.size()), flags.threads, [&](int i) {
    Row& row = rows[i];
    row.name = pdca::stem_of(entries[i].path);
    try {
      Loaded l = load(entries[i].path, entries[i].sln);
      row.name = l.inst.name;
      const pdca::ConicProblem prob = pdca::build_qap(l.inst);
      const pdca::DcaConfig cfg = make_config(flags);
      const auto t0 = std::chrono::steady_clock::now();
      const pdca::BisectionResult r =
          cfg.rho_bisection ? pdca::bisect_rho(prob, cfg) : pdca::solve_at_rho(prob, cfg);
      row.time = pdca::format_hms(seconds_since(t0));
      std::ostringstream v;
      v << r.solution.objective;
      row.value = v.str();
      row.perm = permutation_text(r.solution.permutation);
      row.status = pdca::to_string(r.outcome.status);
      if (l.opt) {
        std::ostringstream o, g;
        o << *l.opt;
        row.opt = o.str();
        if (*l.opt != 0.0) {
          g << std::fixed << std::setprecision(2) << pdca::compute_gap(r.solution.objective, *l.opt);
          row.gap = g.str();
        } else if (r.solution.objective == 0.0) {
          row.gap = "0.00";
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw pdca::ParseError("cannot write '" + out_path + "'");
    os = &file;
  }
  *os << std::left << std::setw(14) << "problem" << std::setw(12) << "opt" << std::setw(12)
      << "PDCA" << std::setw(9) << "gap(%)" << std::setw(10) << "time" << std::setw(14) << "status"
      << "permutation\n";
  bool ok = true;
  for (const Row& r : rows) {
    *os << std::left << std::setw(14) << r.name << std::setw(12) << r.opt << std::setw(12)
        << r.value << std::setw(9) << r.gap << std::setw(10) << r.time << std::setw(14) << r.status
        << (r.error.empty() ? r.perm : r.error) << "\n";
    ok = ok && r.error.empty();
  }
  return ok ? 0 : 1;
}

// Oracle equivalence on seeded instances: the minimum of <C, Y> over all
// lifted feasible points equals the brute-force optimum for each problem
// kind, and every lift factors back to its combinatorial solution.
int cmd_verify(int n_max, int trials, std::uint64_t seed, bool with_solver,
               const SolverFlags& flags) {
  if (n_max < 2 || n_max > 7) throw pdca::ParseError("--n-max must lie in [2, 7]");
  if (trials < 1) throw pdca::ParseError("--trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_n(2, n_max);
  int failures = 0;
  auto fail = [&](const std::string& what) {
    ++failures;
    std::cerr << "MISMATCH " << what << "\n";
  };

  for (int t = 0; t < trials; ++t) {
    const int n = pick_n(rng);
    const std::uint64_t s = rng();
    const std::string tag = " (trial " + std::to_string(t) + ", n=" + std::to_string(n) + ")";

    // QAP
    const pdca::QapInstance qi = pdca::generate_random(n, s);
    const pdca::ConicProblem qp = pdca::build_qap(qi);
    const pdca::QapOracle qo = pdca::qap_brute_force(qi);
    pdca::Permutation p(n);
    std::iota(p.begin(), p.end(), 0);
    double lifted_min = std::numeric_limits<double>::infinity();
    do {
      const pdca::SymMatrix y = pdca::lift_permutation(p);
      lifted_min = std::min(lifted_min, qp.cost.dot(y));
      if (qp.constraints.residual(y).norm() > 1e-10) fail("qap lift infeasible" + tag);
      const auto x = pdca::rank_one_factor(y);
      if (!x || pdca::round_to_permutation(Eigen::Map<const pdca::MatrixXd>(x->data(), n, n)) != p) {
        fail("qap factor round trip" + tag);
      }
    } while (std::next_permutation(p.begin(), p.end()));
    if (lifted_min != qo.opt) fail("qap lifted minimum vs oracle" + tag);

    // StQP: the oracle minimizer lifts to the same value.
    const pdca::StqpInstance si = pdca::generate_random_stqp(n, s);
    const pdca::ConicProblem sp = pdca::build_stqp(si);
    const pdca::StqpOracle so = pdca::stqp_brute_force(si);
    const double sv = sp.cost.dot(pdca::lift_simplex(so.minimizer));
    if (std::abs(sv - so.opt) > 1e-9 * std::max(1.0, std::abs(so.opt))) fail("stqp lift" + tag);

    // Tri-partition
    if (n >= 3) {
      const pdca::TriPartInstance ti = pdca::generate_random_tripartition(n, s);
      const pdca::ConicProblem tp = pdca::build_tripartition(ti);
      const pdca::TriPartOracle to = pdca::tripartition_brute_force(ti);
      std::vector<int> labels;
      for (int k = 0; k < 3; ++k) labels.insert(labels.end(), ti.sizes[k], k);
      double tmin = std::numeric_limits<double>::infinity();
      do {
        tmin = std::min(tmin, tp.cost.dot(pdca::lift_partition(labels, ti.sizes)));
      } while (std::next_permutation(labels.begin(), labels.end()));
      if (std::abs(tmin - to.opt) > 1e-9) fail("tri-partition lifted minimum vs oracle" + tag);
    }

    if (with_solver) {
      const pdca::BisectionResult r = pdca::bisect_rho(qp, make_config(flags));
      if (r.solution.objective < qo.opt) fail("solver beat the oracle" + tag);
    }
  }
  std::cout << (failures == 0 ? "OK" : "FAILED") << ": " << trials << " trials, " << failures
            << " mismatches\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-one DNN penalty solver for the quadratic assignment problem"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  // Solver flags are top-level; subcommands pass unknown options up.
  app.fallthrough();

  SolverFlags flags;
  add_solver_flags(&app, flags);
  const std::string footer = "Solver options (--rho, --max-outer, ...) are listed in 'pdca --help'.";
  std::string path, sln, json_out, log_out, grid = "0.1,1,10,100", csv_out, manifest, bench_out;
  int n_max = 4, trials = 50;
  bool with_solver = false;

  CLI::App* solve = app.add_subcommand("solve", "Solve one QAPLIB instance, print JSON");
  solve->footer(footer);
  solve->add_option("instance", path, "QAPLIB .dat file")->required();
  solve->add_option("--sln", sln, "QAPLIB .sln file with the reference optimum");
  solve->add_option("--json", json_out, "Write the report here instead of stdout");
  solve->add_option("--log", log_out, "Per-iteration records, one JSON object per line");

  CLI::App* sweep = app.add_subcommand("sweep-rho", "Fixed-rho runs over a grid, CSV out");
  sweep->footer(footer);
  sweep->add_option("instance", path, "QAPLIB .dat file")->required();
  sweep->add_option("--sln", sln, "Reference optimum (else brute force for n <= 8)");
  sweep->add_option("--grid", grid, "Comma-separated rho values")->capture_default_str();
  sweep->add_option("--out", csv_out, "CSV path (default stdout)");

  CLI::App* bench = app.add_subcommand("bench", "Benchmark table over a manifest");
  bench->footer(footer);
  bench->add_option("manifest", manifest, "Lines of 'instance.dat[,solution.sln]'")->required();
  bench->add_option("--out", bench_out, "Table path (default stdout)");

  CLI::App* verify = app.add_subcommand("verify", "Oracle equivalence on seeded instances");
  verify->footer(footer);
  verify->add_option("--n-max", n_max, "Largest n")->capture_default_str();
  verify->add_option("--trials", trials, "Number of instances")->capture_default_str();
  verify->add_flag("--with-solver", with_solver, "Also run the solver on each QAP instance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(path, sln, flags, json_out, log_out);
    if (*sweep) return cmd_sweep(path, sln, grid, csv_out, flags);
    if (*bench) return cmd_bench(manifest, bench_out, flags);
    if (*verify) return cmd_verify(n_max, trials, flags.seed, with_solver, flags);
  } catch (const pdca::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pdca::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
