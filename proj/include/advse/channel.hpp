#pragma once

namespace advse {

// Stable log(1 + exp(-x)) and 1/(1 + exp(-x)).
double logistic_loss(double x);
double logistic_sigmoid(double x);

// Probit label channel P(y|z) = erfc(-y z / (sqrt(2) tau)) / 2; tau = 0 is
// the sign channel.
struct ProbitChannel {
  double tau = 0.0;
};

// Z0(y, omega, V) = E_{x ~ N(omega, V)}[P(y|x)] = erfc(-y omega / sqrt(2(V + tau^2))) / 2
double z0(int y, double omega, double v, const ProbitChannel& channel);

// d/domega of z0.
double dz0_domega(int y, double omega, double v, const ProbitChannel& channel);

// argmin_x (x - omega)^2 / (2 V) + log(1 + exp(-(y x - shift))),
// solved by safeguarded Newton on the stationarity equation with a bisection
// fallback on [omega - V, omega + V]. Residual below 1e-12.
double prox_shifted_logistic(double omega, double v, int y, double shift);

// Moreau envelope value at the prox point.
double moreau_shifted_logistic(double omega, double v, int y, double shift);

// fg(y, omega, V, P) = (prox(omega) - omega) / V evaluated in the exact
// stationarity form y * sigmoid(shift - y x*); shift = eps_t sqrt(P).
double fg(int y, double omega, double v, double p, double eps_t);

// d/domega of fg, using x*'(omega) = 1 / (1 + V g''(y x* - shift)).
double dfg_domega(int y, double omega, double v, double p, double eps_t);

}  // namespace advse
