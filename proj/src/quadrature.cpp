#include "advse/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace advse {

namespace {

// Golub-Welsch on the Hermite Jacobi matrix. Nodes come out in physicist
// convention; they are rescaled so the rule integrates against N(0,1).
GaussHermiteRule build_gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite: eigensolver failed");
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = std::sqrt(2.0) * es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // sqrt(pi) * v0^2 / sqrt(pi)
  }
  return rule;
}

std::map<int, GaussHermiteRule> g_gh_cache;
std::mutex g_gh_mutex;

struct Simpson {
  double fa, fm, fb;
  double estimate(double a, double b) const {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }
};

double adaptive_step(const std::function<double(double)>& f, double a,
                     double b, const Simpson& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  Simpson left{whole.fa, f(lm), whole.fm};
  Simpson right{whole.fm, f(rm), whole.fb};
  const double coarse = whole.estimate(a, b);
  const double fine = left.estimate(a, m) + right.estimate(m, b);
  if (depth <= 0 || std::abs(fine - coarse) <= 15.0 * tol)
    return fine + (fine - coarse) / 15.0;
  return adaptive_step(f, a, m, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, b, right, 0.5 * tol, depth - 1);
}

using Arr4 = std::array<double, 4>;

Arr4 operator+(const Arr4& x, const Arr4& y) {
  return {x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]};
}

struct Simpson4 {
  Arr4 fa, fm, fb;
  Arr4 estimate(double a, double b) const {
    const double h = (b - a) / 6.0;
    Arr4 out;
    for (int k = 0; k < 4; ++k) out[k] = h * (fa[k] + 4.0 * fm[k] + fb[k]);
    return out;
  }
};

Arr4 adaptive_step4(const VecIntegrand<4>& f, double a, double b,
                    const Simpson4& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  Simpson4 left{whole.fa, f(0.5 * (a + m)), whole.fm};
  Simpson4 right{whole.fm, f(0.5 * (m + b)), whole.fb};
  const Arr4 coarse = whole.estimate(a, b);
  const Arr4 fine = left.estimate(a, m) + right.estimate(m, b);
  double err = 0.0;
  for (int k = 0; k < 4; ++k) err = std::max(err, std::abs(fine[k] - coarse[k]));
  if (depth <= 0 || err <= 15.0 * tol) {
    Arr4 out;
    for (int k = 0; k < 4; ++k) out[k] = fine[k] + (fine[k] - coarse[k]) / 15.0;
    return out;
  }
  return adaptive_step4(f, a, m, left, 0.5 * tol, depth - 1) +
         adaptive_step4(f, m, b, right, 0.5 * tol, depth - 1);
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int n) {
  std::lock_guard<std::mutex> lock(g_gh_mutex);
  auto it = g_gh_cache.find(n);
  if (it == g_gh_cache.end())
    it = g_gh_cache.emplace(n, build_gauss_hermite(n)).first;
  return it->second;
}

// Both integrators seed the recursion with a uniform 16-panel split so
// narrow features away from the midpoint are not skipped over.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  constexpr int kPanels = 16;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  for (int k = 0; k < kPanels; ++k) {
    const double x0 = a + k * h, x1 = a + (k + 1) * h;
    Simpson panel{f(x0), f(0.5 * (x0 + x1)), f(x1)};
    total += adaptive_step(f, x0, x1, panel, tol / kPanels, max_depth);
  }
  return total;
}

std::array<double, 4> integrate_adaptive4(const VecIntegrand<4>& f, double a,
                                          double b, double tol,
                                          int max_depth) {
  if (a == b) return {0.0, 0.0, 0.0, 0.0};
  constexpr int kPanels = 16;
  const double h = (b - a) / kPanels;
  Arr4 total{0.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < kPanels; ++k) {
    const double x0 = a + k * h, x1 = a + (k + 1) * h;
    Simpson4 panel{f(x0), f(0.5 * (x0 + x1)), f(x1)};
    total = total + adaptive_step4(f, x0, x1, panel, tol / kPanels, max_depth);
  }
  return total;
}

double gauss_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double gauss_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double golden_section_min(const std::function<double(double)>& f, double a,
                          double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace advse
