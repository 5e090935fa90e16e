// Simulates a small logit panel, fits the first stage and prints the set estimate.
#include <iostream>

#include "pmc/pmc.hpp"

int main(int argc, char** argv) {
  pmc::DgpConfig cfg;
  cfg.design = pmc::Design::oracle_logit;
  cfg.n = argc > 1 ? std::atoi(argv[1]) : 4000;
  cfg.beta_true = {1.0, -0.5, 0.25};
  cfg.seed = 11;
  const auto sim = pmc::simulate(cfg);

  pmc::EstimatorSettings s;
  s.jobs = 1;
  const auto out = pmc::estimate_two_stage(sim.data, s);
  pmc::write_text(std::cout, pmc::estimate_table({out.estimate}, {"0"}));
  std::cout << "truth on the sphere:";
  for (double b : sim.truth.beta_unit) std::cout << ' ' << pmc::fixed(b);
  std::cout << '\n';
}
