#include "advse/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace advse {

namespace {

constexpr int kMaxNewton = 100;
constexpr double kProxTol = 1e-12;

double shift_from(double eps_t, double p) {
  if (eps_t == 0.0) return 0.0;
  return eps_t * std::sqrt(std::max(p, 1e-12));
}

}  // namespace

double logistic_loss(double x) {
  if (x > 30.0) return std::exp(-x);
  if (x < -30.0) return -x + std::exp(x);
  return std::log1p(std::exp(-x));
}

double logistic_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double z0(int y, double omega, double v, const ProbitChannel& channel) {
  if (v <= 0.0) throw std::invalid_argument("z0: V must be positive");
  const double var = v + channel.tau * channel.tau;
  return 0.5 * std::erfc(-y * omega / std::sqrt(2.0 * var));
}

double dz0_domega(int y, double omega, double v, const ProbitChannel& channel) {
  if (v <= 0.0) throw std::invalid_argument("dz0_domega: V must be positive");
  const double var = v + channel.tau * channel.tau;
  return y * std::exp(-omega * omega / (2.0 * var)) /
         std::sqrt(2.0 * M_PI * var);
}

double prox_shifted_logistic(double omega, double v, int y, double shift) {
  if (v <= 0.0)
    throw std::invalid_argument("prox_shifted_logistic: V must be positive");
  if (y != 1 && y != -1)
    throw std::invalid_argument("prox_shifted_logistic: y must be +-1");

  // Stationarity: r(x) = x - omega - y V sigmoid(shift - y x) = 0.
  // r is strictly increasing and the root lies in [omega - V, omega + V].
  auto resid = [&](double x) {
    return x - omega - y * v * logistic_sigmoid(shift - y * x);
  };
  double lo = omega - v, hi = omega + v;
  double x = omega + y * v * logistic_sigmoid(shift - y * omega);
  x = std::min(std::max(x, lo), hi);
  double r = resid(x);
  for (int it = 0; it < kMaxNewton; ++it) {
    if (std::abs(r) <= kProxTol) return x;
    if (r > 0.0)
      hi = x;
    else
      lo = x;
    const double s = logistic_sigmoid(shift - y * x);
    const double dr = 1.0 + v * s * (1.0 - s);
    double x_next = x - r / dr;
    if (!(x_next > lo && x_next < hi)) x_next = 0.5 * (lo + hi);
    double r_next = resid(x_next);
    // Newton can shuttle between flat regions of the sigmoid; force the
    // bracket to shrink whenever the residual fails to halve.
    if (std::abs(r_next) > 0.5 * std::abs(r)) {
      const double mid = 0.5 * (lo + hi);
      if (x_next != mid) {
        if (r_next > 0.0)
          hi = std::min(hi, x_next);
        else
          lo = std::max(lo, x_next);
        x_next = mid;
        r_next = resid(x_next);
      }
    }
    x = x_next;
    r = r_next;
  }
  if (std::abs(r) > 1e-9)
    throw std::runtime_error("prox_shifted_logistic: Newton failed, residual " +
                             std::to_string(std::abs(r)));
  return x;
}

double moreau_shifted_logistic(double omega, double v, int y, double shift) {
  const double x = prox_shifted_logistic(omega, v, y, shift);
  const double d = x - omega;
  return d * d / (2.0 * v) + logistic_loss(y * x - shift);
}

double fg(int y, double omega, double v, double p, double eps_t) {
  const double shift = shift_from(eps_t, p);
  const double x = prox_shifted_logistic(omega, v, y, shift);
  return y * logistic_sigmoid(shift - y * x);
}

double dfg_domega(int y, double omega, double v, double p, double eps_t) {
  const double shift = shift_from(eps_t, p);
  const double x = prox_shifted_logistic(omega, v, y, shift);
  const double s = logistic_sigmoid(shift - y * x);
  const double g2 = s * (1.0 - s);
  return -g2 / (1.0 + v * g2);
}

}  // namespace advse
