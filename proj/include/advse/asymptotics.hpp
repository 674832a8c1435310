#pragma once

#include <vector>

#include "advse/bfm.hpp"
#include "advse/se.hpp"

namespace advse {

// Alpha-independent limits of the overlaps and the linear-in-alpha
// coefficients of the conjugates, under the scaling m = m0, q = q0, V = V0 /
// alpha, P = P0, mhat = mhat0 alpha, ... with lambda = lambda1 alpha.
struct ScaledState {
  double m0 = 0.0, q0 = 0.0, v0 = 0.0, p0 = 0.0;
  double mhat0 = 0.0, qhat0 = 0.0, vhat0 = 0.0, phat0 = 0.0;
  double lambda1 = 0.0;
};

struct LargeAlphaSolution {
  ScaledState state;
  AuxOverlaps aux;  // A0, F0, N0, rho
  int iterations = 0;
  double residual = 0.0;
};

struct PlateauReport {
  double egen_inf = 0.0;
  double ebnd_inf = 0.0;
  double eadv_inf = 0.0;
  double alignment_inf = 0.0;
  double attack_ratio_inf = 0.0;
};

// Solves the rescaled fixed-point system. Refuses eps_t = tau = 0, where the
// scaling ansatz breaks down.
LargeAlphaSolution solve_large_alpha(double lambda1, double tau, double eps_t,
                                     const BlockFeatureModel& model,
                                     const SolverConfig& cfg = {});

PlateauReport plateau_errors(const LargeAlphaSolution& sol,
                             const BlockFeatureModel& model, double tau,
                             double eps_g);

struct UniversalityTable {
  std::vector<double> alphas;
  std::vector<double> eps_ts;
  // gaps[i][j] = |Eadv(eps_t[i], alpha[j]) - Eadv(0, alpha[j])|
  std::vector<std::vector<double>> gaps;
  std::vector<double> decay_exponents;  // log-log slope per eps_t
};

// Single-block universality: adversarial training leaves Eadv unchanged up
// to O(1/alpha). Full-solver sweep; multi-block models are rejected.
UniversalityTable universality_check(const BlockFeatureModel& model, double tau,
                                     double eps_g, double lambda,
                                     const std::vector<double>& eps_t_list,
                                     const std::vector<double>& alpha_list,
                                     const SolverConfig& cfg = {});

struct RotationSlopes {
  double egen_slope = 0.0;
  double ebnd_slope = 0.0;
  double eadv_slope = 0.0;
  bool improvement_condition = false;
};

// Two-block defence rotation at large alpha: Sigma_delta(rho) has block
// entries (Delta_1 + delta1 rho, Delta_2 - delta1 rho). Requires psi1 > psi2,
// Delta2 psi1 >= Delta1 psi2 and Upsilon = 1. Slopes at rho = 0 come from
// central differences with Richardson extrapolation (steps h and h/2).
RotationSlopes defence_rotation_check(const BlockFeatureModel& model,
                                      double delta1, double step,
                                      double lambda1, double tau, double eps_g,
                                      double eps_t,
                                      const SolverConfig& cfg = {});

}  // namespace advse
