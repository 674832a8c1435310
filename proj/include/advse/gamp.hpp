#pragma once

#include <cstdint>

#include "advse/sim.hpp"

namespace advse {

struct GampConfig {
  double damping = 0.5;   // on (theta, s); 0 disables
  double tol = 1e-7;      // relative weight change
  int max_iter = 5000;
  std::uint64_t init_seed = 1;
};

// Generalised approximate message passing for the adversarially trained
// ridge-logistic problem. The output-node denoiser is the margin-shifted
// logistic proximal with the running constraint value P = theta' Sigma_d
// theta / d; the input-node denoiser is the ridge tilted by the conjugate
// constraint Phat = eps_t / (2 sqrt(P)) s'y / d. Throws on divergence.
Estimator advgamp_train(const Dataset& data, double lambda, double eps_t,
                        const GampConfig& cfg = {});

}  // namespace advse
