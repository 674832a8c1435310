#pragma once

#include <array>
#include <functional>
#include <vector>

namespace advse {

// Gauss-Hermite rule for E[f(xi)] with xi ~ N(0,1):
//   E[f] = sum_i weight[i] * f(node[i])
// Nodes/weights are precomputed per rule size and cached.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussHermiteRule& gauss_hermite(int n);

// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol, int max_depth = 60);

// Vector-valued variant sharing function evaluations; error is measured in
// the max norm across components.
template <int K>
using VecIntegrand = std::function<std::array<double, K>(double)>;

std::array<double, 4> integrate_adaptive4(const VecIntegrand<4>& f, double a,
                                          double b, double tol,
                                          int max_depth = 60);

// Standard normal pdf / cdf.
double gauss_pdf(double x);
double gauss_cdf(double x);

// Scalar golden-section minimiser on [a, b]; used as an independent oracle
// for proximal operators in tests and kept here so test code can share it.
double golden_section_min(const std::function<double(double)>& f, double a,
                          double b, double tol);

}  // namespace advse
