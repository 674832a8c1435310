#pragma once

#include <stdexcept>

#include "advse/bfm.hpp"

namespace advse {

struct Overlaps {
  double m = 0.1;
  double q = 1.0;
  double v = 1.0;
  double p = 1.0;
};

struct ConjugateOverlaps {
  double mhat = 0.0;
  double qhat = 0.0;
  double vhat = 0.0;
  double phat = 0.0;
};

struct AuxOverlaps {
  double a = 0.0;
  double f = 0.0;
  double n = 0.0;
  double rho = 0.0;
};

struct ExperimentParams {
  double alpha = 1.0;
  double lambda = 1e-3;
  double tau = 0.0;
  double eps_t = 0.0;
  double eps_g = 0.0;
};

struct SolverConfig {
  double damping = 0.7;
  double tol = 1e-8;
  int max_iter = 10000;
  int nodes = 151;
  Overlaps init{0.1, 1.0, 1.0, 1.0};
};

struct FixedPoint {
  Overlaps ov;
  ConjugateOverlaps hat;
  AuxOverlaps aux;
  int iterations = 0;
  double residual = 0.0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Overlaps last, double residual)
      : std::runtime_error(what), last_state(last), residual(residual) {}
  Overlaps last_state;
  double residual;
};

// Hat-side update: Gaussian expectation over xi by Gauss-Hermite with
// `nodes` points; the result is cross-checked against a doubled rule and
// falls back to adaptive quadrature when the two disagree beyond 1e-9
// (this happens once the teacher/student alignment gets close to one and
// the Z0 transition becomes narrower than the node spacing).
ConjugateOverlaps channel_update(const Overlaps& ov,
                                 const ExperimentParams& params,
                                 const BlockFeatureModel& model,
                                 int nodes = 151);

// Block closed forms with denominators D_l = lambda + vhat psi_l + phat delta_l.
Overlaps prior_update(const ConjugateOverlaps& hat, double lambda,
                      const BlockFeatureModel& model);

AuxOverlaps aux_overlaps(const ConjugateOverlaps& hat, double lambda,
                         const BlockFeatureModel& model);

// Damped alternation of the two update maps. Throws ConvergenceError when
// max_iter is exceeded even after halving the damping three times.
FixedPoint solve_fixed_point(const ExperimentParams& params,
                             const BlockFeatureModel& model,
                             const SolverConfig& cfg = {});

}  // namespace advse
