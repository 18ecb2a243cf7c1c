// Solves a seeded random QAP and compares with brute force.
//   solve_random [n] [seed]

#include <cstdlib>
#include <iostream>

#include "pdca/pdca.hpp"

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 4;
  const unsigned long seed = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 1;

  const pdca::QapInstance inst = pdca::generate_random(n, seed);
  const pdca::ConicProblem prob = pdca::build_qap(inst);

  pdca::DcaConfig cfg;
  cfg.rho_bisection = pdca::RhoBisection{0.1, 10.0, 8};
  const pdca::BisectionResult r = pdca::bisect_rho(prob, cfg);

  std::cout << inst.name << ": objective " << r.solution.objective << " at rho " << r.rho
            << (r.rank_one ? " (rank one)" : " (not rank one)") << "\n  permutation";
  for (int v : r.solution.permutation) std::cout << " " << v + 1;
  std::cout << "\n";
  if (n <= 8) {
    const double opt = pdca::qap_brute_force(inst).opt;
    std::cout << "  brute force " << opt << "\n";
  }
  return 0;
}
