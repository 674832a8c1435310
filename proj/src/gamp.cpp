#include "advse/gamp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "advse/channel.hpp"

namespace advse {

Estimator advgamp_train(const Dataset& data, double lambda, double eps_t,
                        const GampConfig& cfg) {
  const int n = static_cast<int>(data.x.rows());
  const int d = static_cast<int>(data.x.cols());
  const double sqrt_d = std::sqrt(double(d));

  const Eigen::MatrixXd a_mat = data.x / sqrt_d;
  const Eigen::MatrixXd f_mat = a_mat.cwiseProduct(a_mat);
  const Eigen::VectorXd zeta = spectrum_delta(data.model, d);

  std::mt19937_64 rng = seeded_rng(cfg.init_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd theta(d);
  for (int j = 0; j < d; ++j) theta(j) = normal(rng) / sqrt_d;
  Eigen::VectorXd tau_w = Eigen::VectorXd::Ones(d);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd z(n), tau_z(n), tau_s(n), s_new(n);
  int it = 0;
  double rel = 0.0;
  for (; it < cfg.max_iter; ++it) {
    // Output node.
    const Eigen::VectorXd tau_p = f_mat * tau_w;
    const Eigen::VectorXd omega =
        a_mat * theta - s.cwiseProduct(tau_p);
    const double p = theta.cwiseProduct(zeta.cwiseProduct(theta)).sum() / d;
    const double shift =
        eps_t > 0.0 ? eps_t * std::sqrt(std::max(p, 1e-12)) : 0.0;
    for (int i = 0; i < n; ++i) {
      const int y = data.y(i) > 0.0 ? 1 : -1;
      const double x_star =
          prox_shifted_logistic(omega(i), tau_p(i), y, shift);
      const double sig = logistic_sigmoid(shift - y * x_star);
      const double dprox = 1.0 / (1.0 + tau_p(i) * sig * (1.0 - sig));
      z(i) = x_star;
      tau_z(i) = tau_p(i) * dprox;
      s_new(i) = (z(i) - omega(i)) / tau_p(i);
      tau_s(i) = (1.0 - tau_z(i) / tau_p(i)) / tau_p(i);
    }
    if (cfg.damping > 0.0 && it > 0)
      s = (1.0 - cfg.damping) * s + cfg.damping * s_new;
    else
      s = s_new;

    // Input node.
    const double phat =
        eps_t > 0.0
            ? eps_t / (2.0 * std::sqrt(std::max(p, 1e-12))) * s.dot(data.y) / d
            : 0.0;
    const Eigen::VectorXd tau_r = (f_mat.transpose() * tau_s).cwiseInverse();
    const Eigen::VectorXd r = theta + tau_r.cwiseProduct(a_mat.transpose() * s);
    Eigen::VectorXd theta_new(d);
    for (int j = 0; j < d; ++j) {
      const double denom = 1.0 + tau_r(j) * (lambda + 2.0 * phat * zeta(j));
      theta_new(j) = r(j) / denom;
      tau_w(j) = tau_r(j) / denom;
    }
    if (cfg.damping > 0.0 && it > 0)
      theta_new = (1.0 - cfg.damping) * theta + cfg.damping * theta_new;

    rel = (theta_new - theta).norm() / std::max(theta.norm(), 1e-12);
    theta.swap(theta_new);
    if (theta.norm() > 1e6)
      throw std::runtime_error(
          "advgamp_train: iterates diverged; try stronger damping");
    if (rel < cfg.tol) break;
  }
  if (it >= cfg.max_iter)
    throw std::runtime_error("advgamp_train: no convergence in " +
                             std::to_string(cfg.max_iter) + " iterations");

  Estimator est;
  est.theta = std::move(theta);
  est.method = Method::kGamp;
  est.iterations = it + 1;
  est.residual = rel;
  return est;
}

}  // namespace advse
