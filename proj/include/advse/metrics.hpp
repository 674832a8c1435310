#pragma once

#include <optional>

#include "advse/bfm.hpp"
#include "advse/se.hpp"

namespace advse {

struct ErrorReport {
  double egen = 0.0;
  double ebnd = 0.0;
  double eadv = 0.0;
  std::optional<double> etrain;
  std::optional<double> ltrain;
  std::optional<double> ecp;
};

struct GeometryAngles {
  double alignment = 0.0;     // m / sqrt(rho q)
  double attack_ratio = 0.0;  // sqrt(A) / sqrt(q)
};

GeometryAngles geometry_angles(const Overlaps& ov, const AuxOverlaps& aux);

// (1/pi) arccos(m / sqrt((rho + tau^2) q)); the argument is clamped into
// [-1, 1] with 1e-12 slack and rejected beyond it.
double generalisation_error(double m, double q, double rho, double tau);

// Quadrature form of the boundary error, absolute tolerance 1e-10.
double boundary_error(double m, double q, double a, double rho, double tau,
                      double eps_g);

// Closed form in terms of Owen's T function; agrees with boundary_error to
// 1e-8 across the tested range.
double boundary_error_owen(double m, double q, double a, double rho, double tau,
                           double eps_g);

// T(h, a) = (1/2pi) int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx
double owen_t(double h, double a);

double adversarial_error(double m, double q, double a, double rho, double tau,
                         double eps_g);

// Teacher-level feature quality: U = sqrt(2/pi) rho / sqrt(rho + tau^2),
// R = U - eps_g sqrt(theta0' Sigma_upsilon theta0 / d).
double usefulness(const BlockFeatureModel& model, double tau);
double robustness(const BlockFeatureModel& model, double tau, double eps_g);

double training_error(const Overlaps& ov, const AuxOverlaps& aux,
                      const ExperimentParams& params);
double training_loss(const Overlaps& ov, const AuxOverlaps& aux,
                     const ExperimentParams& params);

// Class-preserving generalisation error with teacher margin gamma; requires
// N > 0. tau = 0 uses the sign-channel form, tau > 0 the probit form.
double class_preserving_error(const Overlaps& ov, const AuxOverlaps& aux,
                              double rho, double tau, double eps_g,
                              double gamma);

struct ErrorBoundsReport {
  double egen_lower = 0.0;
  double ebnd_upper = 0.0;
};

// Overlap-free bounds: Egen >= (1/pi) arccos(sqrt(pi/(2 rho)) U) and the
// Owen-T upper bound on Ebnd.
ErrorBoundsReport error_bounds(const BlockFeatureModel& model, double tau,
                               double eps_g);

// All overlap-level error metrics in one call (gamma is the class-preserving
// teacher margin).
ErrorReport theory_errors(const Overlaps& ov, const AuxOverlaps& aux,
                          const ExperimentParams& params, double gamma = 0.0);

}  // namespace advse
