#include "advse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advse/channel.hpp"
#include "advse/quadrature.hpp"

namespace advse {

namespace {

constexpr double kTailSigmas = 8.0;

double clamp_cos(double x) {
  if (x > 1.0 + 1e-12 || x < -1.0 - 1e-12)
    throw std::invalid_argument("generalisation_error: argument outside [-1,1]");
  return std::clamp(x, -1.0, 1.0);
}

// Odd branch of the inverse cotangent, arctan(1/x).
double acot_odd(double x) { return std::atan(1.0 / x); }

}  // namespace

GeometryAngles geometry_angles(const Overlaps& ov, const AuxOverlaps& aux) {
  GeometryAngles g;
  g.alignment = ov.m / std::sqrt(aux.rho * ov.q);
  g.attack_ratio = std::sqrt(aux.a / ov.q);
  return g;
}

double generalisation_error(double m, double q, double rho, double tau) {
  if (!(q > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("generalisation_error: q, rho must be > 0");
  const double arg = clamp_cos(m / std::sqrt((rho + tau * tau) * q));
  return std::acos(arg) / M_PI;
}

double boundary_error(double m, double q, double a, double rho, double tau,
                      double eps_g) {
  if (!(q > 0.0) || a < 0.0)
    throw std::invalid_argument("boundary_error: need q > 0 and A >= 0");
  if (eps_g < 0.0)
    throw std::invalid_argument("boundary_error: eps_g must be >= 0");
  if (eps_g == 0.0 || a == 0.0) return 0.0;
  const double upper = std::min(eps_g * std::sqrt(a / q), kTailSigmas);
  const double var = std::max(rho + tau * tau - m * m / q, 1e-300);
  const double slope = m / std::sqrt(q) / std::sqrt(2.0 * var);
  auto f = [&](double nu) {
    return std::erfc(-slope * nu) * gauss_pdf(nu);
  };
  return integrate_adaptive(f, 0.0, upper, 1e-10);
}

double owen_t(double h, double a) {
  if (a == 0.0) return 0.0;
  if (h == 0.0) return std::atan(a) / (2.0 * M_PI);
  const double sign = a > 0.0 ? 1.0 : -1.0;
  const double amag = std::abs(a);
  const double h2 = h * h;
  // exp(-h^2 (1+x^2)/2) is below 1e-300 once h^2 x^2 / 2 > ~690.
  double cutoff = std::sqrt(1380.0) / std::abs(h);
  const double upper = std::min(amag, cutoff);
  auto f = [&](double x) {
    return std::exp(-0.5 * h2 * (1.0 + x * x)) / (1.0 + x * x);
  };
  return sign * integrate_adaptive(f, 0.0, upper, 1e-12 * 2.0 * M_PI) /
         (2.0 * M_PI);
}

double boundary_error_owen(double m, double q, double a, double rho, double tau,
                           double eps_g) {
  if (!(q > 0.0) || a < 0.0)
    throw std::invalid_argument("boundary_error_owen: need q > 0 and A >= 0");
  if (eps_g < 0.0)
    throw std::invalid_argument("boundary_error_owen: eps_g must be >= 0");
  if (eps_g == 0.0 || a == 0.0) return 0.0;
  const double b = eps_g * std::sqrt(a / q);
  const double var = (rho + tau * tau) * q - m * m;
  if (!(var > 0.0))
    throw std::invalid_argument("boundary_error_owen: degenerate covariance");
  const double slope = m / std::sqrt(var);
  if (std::abs(slope) < 1e-12) return gauss_cdf(b) - 0.5;
  const double h = slope * b;
  return 2.0 * owen_t(h, 1.0 / slope) +
         0.5 * std::erf(b / std::sqrt(2.0)) * std::erfc(-h / std::sqrt(2.0)) -
         acot_odd(slope) / M_PI;
}

double adversarial_error(double m, double q, double a, double rho, double tau,
                         double eps_g) {
  return generalisation_error(m, q, rho, tau) +
         boundary_error(m, q, a, rho, tau, eps_g);
}

double usefulness(const BlockFeatureModel& model, double tau) {
  const double r = model.rho();
  return std::sqrt(2.0 / M_PI) * r / std::sqrt(r + tau * tau);
}

double robustness(const BlockFeatureModel& model, double tau, double eps_g) {
  return usefulness(model, tau) -
         eps_g * std::sqrt(model.attack_teacher_norm());
}

double training_error(const Overlaps& ov, const AuxOverlaps& aux,
                      const ExperimentParams& params) {
  const double sq = std::sqrt(ov.q);
  const double teacher_slope = ov.m / sq;
  const double teacher_var = std::max(aux.rho - ov.m * ov.m / ov.q, 1e-14);
  const ProbitChannel channel{params.tau};
  const double shift =
      params.eps_t > 0.0 ? params.eps_t * std::sqrt(std::max(ov.p, 1e-12)) : 0.0;
  auto f = [&](double xi) {
    double acc = 0.0;
    for (int y : {-1, 1}) {
      const double zstar = prox_shifted_logistic(sq * xi, ov.v, y, shift);
      const bool wrong = (zstar > 0.0 ? 1 : -1) != y;
      if (wrong) acc += z0(y, teacher_slope * xi, teacher_var, channel);
    }
    return acc * gauss_pdf(xi);
  };
  return integrate_adaptive(f, -kTailSigmas, kTailSigmas, 1e-8);
}

double training_loss(const Overlaps& ov, const AuxOverlaps& aux,
                     const ExperimentParams& params) {
  const double sq = std::sqrt(ov.q);
  const double teacher_slope = ov.m / sq;
  const double teacher_var = std::max(aux.rho - ov.m * ov.m / ov.q, 1e-14);
  const ProbitChannel channel{params.tau};
  const double shift =
      params.eps_t > 0.0 ? params.eps_t * std::sqrt(std::max(ov.p, 1e-12)) : 0.0;
  auto f = [&](double xi) {
    double acc = 0.0;
    for (int y : {-1, 1}) {
      const double zstar = prox_shifted_logistic(sq * xi, ov.v, y, shift);
      acc += z0(y, teacher_slope * xi, teacher_var, channel) *
             logistic_loss(y * zstar - shift);
    }
    return acc * gauss_pdf(xi);
  };
  return integrate_adaptive(f, -kTailSigmas, kTailSigmas, 1e-8);
}

double class_preserving_error(const Overlaps& ov, const AuxOverlaps& aux,
                              double rho, double tau, double eps_g,
                              double gamma) {
  if (!(aux.n > 0.0))
    throw std::invalid_argument("class_preserving_error: N must be > 0");
  if (gamma < 0.0)
    throw std::invalid_argument("class_preserving_error: gamma must be >= 0");

  const double m = ov.m, q = ov.q, a = aux.a, fo = aux.f, n = aux.n;
  const double cond_var = std::max(q - m * m / rho, 1e-300);
  const double s = std::sqrt(2.0 * cond_var);
  const double sqrt_n = std::sqrt(n);
  const double gamma_star = std::max(gamma, gamma + eps_g * fo / sqrt_n);
  const double sd = std::sqrt(rho);

  // Student-field shift produced by the attack, as a function of the signed
  // teacher margin u.
  auto attack_shift = [&](double u) {
    if (u <= gamma) return 0.0;
    if (u >= gamma_star) return -eps_g * a / sqrt_n;
    return (a / fo) * (gamma - u);
  };
  auto flip_prob = [&](double u) {
    return 0.5 * std::erfc(((m / rho) * u + attack_shift(u)) / s);
  };

  // For tau = 0 the label indicator cuts the teacher margin at zero; for the
  // probit channel the weight is the smooth label likelihood.
  const double lo = tau == 0.0 ? 0.0 : -kTailSigmas * sd;
  const double hi = std::max(gamma_star, 0.0) + kTailSigmas * sd;
  auto weight = [&](double u) {
    if (tau == 0.0) return 1.0;
    return 0.5 * std::erfc(-u / (std::sqrt(2.0) * tau));
  };
  auto f = [&](double u) {
    return 2.0 * weight(u) * flip_prob(u) * gauss_pdf(u / sd) / sd;
  };

  // Integrate by pieces so the kinks at gamma and gamma_star land on
  // segment boundaries.
  double breaks[3] = {lo, std::clamp(gamma, lo, hi),
                      std::clamp(gamma_star, lo, hi)};
  std::sort(breaks, breaks + 3);
  double total = 0.0;
  double prev = breaks[0];
  for (int i = 1; i < 3; ++i) {
    if (breaks[i] > prev) total += integrate_adaptive(f, prev, breaks[i], 1e-9);
    prev = breaks[i];
  }
  if (hi > prev) total += integrate_adaptive(f, prev, hi, 1e-9);
  return total;
}

ErrorBoundsReport error_bounds(const BlockFeatureModel& model, double tau,
                               double eps_g) {
  const double r = model.rho();
  const double u = usefulness(model, tau);
  // cal_a = sqrt(pi / 2 rho) U is the largest reachable alignment
  // m / sqrt((rho + tau^2) q); cal_b bounds the attack ratio sqrt(A/q).
  const double cal_a = clamp_cos(std::sqrt(M_PI / (2.0 * r)) * u);
  ErrorBoundsReport out;
  out.egen_lower = std::acos(cal_a) / M_PI;

  double cal_b = 0.0;
  for (const Block& b : model.blocks())
    cal_b = std::max(cal_b, std::sqrt(b.upsilon / b.psi));
  const double eb = eps_g * cal_b;
  // Ebnd is increasing in both the alignment and the attack ratio, so the
  // bound is the exact Owen-T closed form at (cal_a, eps_g cal_b). At
  // cal_a -> 1 the integrand saturates at 2.
  if (cal_a >= 1.0 - 1e-12) {
    out.ebnd_upper = std::erf(eb / std::sqrt(2.0));
  } else {
    const double var = r + tau * tau;
    out.ebnd_upper = boundary_error_owen(cal_a * std::sqrt(var), 1.0,
                                         cal_b * cal_b, r, tau, eps_g);
  }
  return out;
}

ErrorReport theory_errors(const Overlaps& ov, const AuxOverlaps& aux,
                          const ExperimentParams& params, double gamma) {
  ErrorReport rep;
  rep.egen = generalisation_error(ov.m, ov.q, aux.rho, params.tau);
  rep.ebnd =
      boundary_error(ov.m, ov.q, aux.a, aux.rho, params.tau, params.eps_g);
  rep.eadv = rep.egen + rep.ebnd;
  rep.etrain = training_error(ov, aux, params);
  rep.ltrain = training_loss(ov, aux, params);
  if (aux.n > 0.0)
    rep.ecp = class_preserving_error(ov, aux, aux.rho, params.tau, params.eps_g,
                                     gamma);
  return rep;
}

}  // namespace advse
