#include "advse/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "advse/channel.hpp"

namespace advse {

std::uint64_t mix_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 seeded_rng(std::uint64_t seed) {
  return std::mt19937_64(mix_seed(seed));
}

namespace {

constexpr double kNormFloor = 1e-30;

Eigen::VectorXd expand_per_block(const BlockFeatureModel& model, int d,
                                 double Block::*field) {
  const std::vector<int> sizes = block_sizes(model, d);
  Eigen::VectorXd out(d);
  int pos = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    out.segment(pos, sizes[l]).setConstant(model.blocks()[l].*field);
    pos += sizes[l];
  }
  return out;
}

// Objective family shared by the three trainers: margins u_i plus a
// theta-only penalty.
struct Problem {
  const Dataset& data;
  double lambda;
  double eps_t;   // erm / fgm
  double lt1 = 0.0, lt2 = 0.0;
  Method method;
  Eigen::VectorXd zeta;  // defence spectrum at dimension d
  double sqrt_d;

  double penalty(const Eigen::VectorXd& theta, double* quad_out = nullptr) const {
    const double quad = theta.cwiseProduct(zeta.cwiseProduct(theta)).sum();
    if (quad_out) *quad_out = quad;
    switch (method) {
      case Method::kErm:
        return 0.0;  // folded into the margins
      case Method::kFgm:
        return 0.0;
      case Method::kSurrogate:
        return lt1 * std::sqrt(std::max(quad, kNormFloor)) + lt2 * quad;
      default:
        return 0.0;
    }
  }

  // Margin shift subtracted inside the loss (per sample, identical for all).
  double margin_shift(const Eigen::VectorXd& theta, double quad) const {
    switch (method) {
      case Method::kErm:
        return eps_t * std::sqrt(std::max(quad, 0.0)) / sqrt_d;
      case Method::kFgm: {
        const double norm = std::sqrt(std::max(theta.squaredNorm(), kNormFloor));
        return eps_t * quad / (sqrt_d * norm);
      }
      default:
        return 0.0;
    }
  }

  double value(const Eigen::VectorXd& theta) const {
    double quad = 0.0;
    const double pen = penalty(theta, &quad);
    const double shift = margin_shift(theta, quad);
    const Eigen::VectorXd z = data.x * theta / sqrt_d;
    double loss = 0.0;
    for (int i = 0; i < z.size(); ++i)
      loss += logistic_loss(data.y(i) * z(i) - shift);
    return loss + pen + 0.5 * lambda * theta.squaredNorm();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    double quad = 0.0;
    penalty(theta, &quad);
    const double shift = margin_shift(theta, quad);
    const Eigen::VectorXd z = data.x * theta / sqrt_d;
    Eigen::VectorXd gprime(z.size());
    double gsum = 0.0;
    for (int i = 0; i < z.size(); ++i) {
      gprime(i) = -logistic_sigmoid(-(data.y(i) * z(i) - shift));
      gsum += gprime(i);
    }
    Eigen::VectorXd grad =
        data.x.transpose() * gprime.cwiseProduct(data.y) / sqrt_d;
    grad += lambda * theta;

    const Eigen::VectorXd sigma_theta = zeta.cwiseProduct(theta);
    switch (method) {
      case Method::kErm: {
        if (eps_t > 0.0) {
          const double sq = std::sqrt(std::max(quad, kNormFloor));
          grad += (-gsum) * eps_t / (sqrt_d * sq) * sigma_theta;
        }
        break;
      }
      case Method::kFgm: {
        if (eps_t > 0.0) {
          const double norm =
              std::sqrt(std::max(theta.squaredNorm(), kNormFloor));
          const Eigen::VectorXd dshift =
              (2.0 / norm) * sigma_theta - (quad / (norm * norm * norm)) * theta;
          grad += (-gsum) * eps_t / sqrt_d * dshift;
        }
        break;
      }
      case Method::kSurrogate: {
        const double sq = std::sqrt(std::max(quad, kNormFloor));
        grad += (lt1 / sq + 2.0 * lt2) * sigma_theta;
        break;
      }
      default:
        break;
    }
    return grad;
  }
};

// Barzilai-Borwein descent with a nonmonotone (10-step window) Armijo
// backtracking safeguard.
Estimator minimise(const Problem& prob, const TrainerConfig& cfg,
                   Method method) {
  const int d = static_cast<int>(prob.data.x.cols());
  std::mt19937_64 rng = seeded_rng(cfg.init_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd theta(d);
  for (int i = 0; i < d; ++i) theta(i) = normal(rng) / std::sqrt(double(d));

  double f = prob.value(theta);
  Eigen::VectorXd grad = prob.gradient(theta);
  double step = 1.0 / std::max(grad.norm(), 1.0);
  std::vector<double> window(10, f);
  int wpos = 0;

  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    const double gnorm = grad.norm();
    if (gnorm <= cfg.grad_tol * std::max(1.0, theta.norm())) break;

    const double fmax = *std::max_element(window.begin(), window.end());
    double t = std::clamp(step, 1e-12, 1e8);
    Eigen::VectorXd theta_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      theta_new = theta - t * grad;
      f_new = prob.value(theta_new);
      if (f_new <= fmax - 1e-4 * t * gnorm * gnorm) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw std::runtime_error(
          "trainer: line search failed (iteration " + std::to_string(it) +
          ", |grad| " + std::to_string(gnorm) + ")");

    Eigen::VectorXd grad_new = prob.gradient(theta_new);
    const Eigen::VectorXd s = theta_new - theta;
    const Eigen::VectorXd yv = grad_new - grad;
    const double sy = s.dot(yv);
    step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t;
    theta.swap(theta_new);
    grad.swap(grad_new);
    f = f_new;
    window[wpos] = f;
    wpos = (wpos + 1) % 10;
  }
  if (it >= cfg.max_iter)
    throw std::runtime_error("trainer: gradient descent did not converge in " +
                             std::to_string(cfg.max_iter) + " iterations");

  Estimator est;
  est.theta = std::move(theta);
  est.method = method;
  est.iterations = it;
  est.residual = grad.norm();
  return est;
}

}  // namespace

std::vector<int> block_sizes(const BlockFeatureModel& model, int d) {
  const auto& blocks = model.blocks();
  std::vector<int> sizes(blocks.size());
  std::vector<double> remainders(blocks.size());
  int assigned = 0;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const double exact = blocks[l].fraction * d;
    sizes[l] = static_cast<int>(std::floor(exact));
    remainders[l] = exact - sizes[l];
    assigned += sizes[l];
  }
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (int k = 0; k < d - assigned; ++k) sizes[order[k % order.size()]] += 1;
  if (std::accumulate(sizes.begin(), sizes.end(), 0) != d)
    throw std::logic_error("block_sizes: sizes do not sum to d");
  return sizes;
}

Eigen::VectorXd spectrum_psi(const BlockFeatureModel& model, int d) {
  return expand_per_block(model, d, &Block::psi);
}
Eigen::VectorXd spectrum_delta(const BlockFeatureModel& model, int d) {
  return expand_per_block(model, d, &Block::delta);
}
Eigen::VectorXd spectrum_upsilon(const BlockFeatureModel& model, int d) {
  return expand_per_block(model, d, &Block::upsilon);
}
Eigen::VectorXd spectrum_teacher(const BlockFeatureModel& model, int d) {
  return expand_per_block(model, d, &Block::t);
}

Dataset sample_dataset(const BlockFeatureModel& model, int d, double alpha,
                       double tau, std::uint64_t seed) {
  if (d < 50) throw std::invalid_argument("sample_dataset: d must be >= 50");
  if (!(alpha > 0.0))
    throw std::invalid_argument("sample_dataset: alpha must be > 0");
  const int n = static_cast<int>(std::lround(alpha * d));

  Dataset data;
  data.model = model;
  data.seed = seed;
  data.block_sizes = block_sizes(model, d);

  std::mt19937_64 rng = seeded_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::VectorXd psi_sd = spectrum_psi(model, d).cwiseSqrt();
  const Eigen::VectorXd t_sd = spectrum_teacher(model, d).cwiseSqrt();

  data.theta0.resize(d);
  for (int j = 0; j < d; ++j) data.theta0(j) = t_sd(j) * normal(rng);

  data.x.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.x(i, j) = psi_sd(j) * normal(rng);

  data.y.resize(n);
  const Eigen::VectorXd field = data.x * data.theta0 / std::sqrt(double(d));
  for (int i = 0; i < n; ++i) {
    const double z = tau > 0.0 ? field(i) + tau * normal(rng) : field(i);
    data.y(i) = z >= 0.0 ? 1.0 : -1.0;
  }
  return data;
}

Estimator erm_train(const Dataset& data, double lambda, double eps_t,
                    const TrainerConfig& cfg) {
  if (!(lambda > 0.0) && !(eps_t > 0.0))
    throw std::invalid_argument("erm_train: need lambda > 0 or eps_t > 0");
  Problem prob{data,
               lambda,
               eps_t,
               0.0,
               0.0,
               Method::kErm,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return minimise(prob, cfg, Method::kErm);
}

Estimator fgm_train(const Dataset& data, double lambda, double eps_t,
                    const TrainerConfig& cfg) {
  if (!(lambda > 0.0) && !(eps_t > 0.0))
    throw std::invalid_argument("fgm_train: need lambda > 0 or eps_t > 0");
  Problem prob{data,
               lambda,
               eps_t,
               0.0,
               0.0,
               Method::kFgm,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return minimise(prob, cfg, Method::kFgm);
}

Estimator surrogate_train(const Dataset& data, double lambda, double lt1,
                          double lt2, const TrainerConfig& cfg) {
  if (lt1 < 0.0 || lt2 < 0.0)
    throw std::invalid_argument("surrogate_train: lt1, lt2 must be >= 0");
  Problem prob{data,
               lambda,
               0.0,
               lt1,
               lt2,
               Method::kSurrogate,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  // The sqrt penalty makes early steps jumpy; retry with smaller initial
  // steps if the line search gives up.
  TrainerConfig attempt = cfg;
  for (int k = 0; k < 3; ++k) {
    try {
      return minimise(prob, attempt, Method::kSurrogate);
    } catch (const std::runtime_error&) {
      attempt.init_seed += 101;
    }
  }
  return minimise(prob, attempt, Method::kSurrogate);
}

double erm_objective(const Dataset& data, double lambda, double eps_t,
                     const Eigen::VectorXd& theta) {
  Problem prob{data, lambda, eps_t, 0.0, 0.0, Method::kErm,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return prob.value(theta);
}

Eigen::VectorXd erm_gradient(const Dataset& data, double lambda, double eps_t,
                             const Eigen::VectorXd& theta) {
  Problem prob{data, lambda, eps_t, 0.0, 0.0, Method::kErm,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return prob.gradient(theta);
}

double fgm_objective(const Dataset& data, double lambda, double eps_t,
                     const Eigen::VectorXd& theta) {
  Problem prob{data, lambda, eps_t, 0.0, 0.0, Method::kFgm,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return prob.value(theta);
}

Eigen::VectorXd fgm_gradient(const Dataset& data, double lambda, double eps_t,
                             const Eigen::VectorXd& theta) {
  Problem prob{data, lambda, eps_t, 0.0, 0.0, Method::kFgm,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return prob.gradient(theta);
}

double surrogate_objective(const Dataset& data, double lambda, double lt1,
                           double lt2, const Eigen::VectorXd& theta) {
  Problem prob{data, lambda, 0.0, lt1, lt2, Method::kSurrogate,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return prob.value(theta);
}

Eigen::VectorXd surrogate_gradient(const Dataset& data, double lambda,
                                   double lt1, double lt2,
                                   const Eigen::VectorXd& theta) {
  Problem prob{data, lambda, 0.0, lt1, lt2, Method::kSurrogate,
               spectrum_delta(data.model, static_cast<int>(data.x.cols())),
               std::sqrt(double(data.x.cols()))};
  return prob.gradient(theta);
}

EmpiricalOverlaps empirical_overlaps(const Estimator& est,
                                     const Eigen::VectorXd& theta0,
                                     const BlockFeatureModel& model) {
  const int d = static_cast<int>(est.theta.size());
  const Eigen::VectorXd psi = spectrum_psi(model, d);
  const Eigen::VectorXd zeta = spectrum_delta(model, d);
  const Eigen::VectorXd ups = spectrum_upsilon(model, d);
  const Eigen::VectorXd& th = est.theta;

  EmpiricalOverlaps ov;
  ov.m = theta0.cwiseProduct(psi.cwiseProduct(th)).sum() / d;
  ov.q = th.cwiseProduct(psi.cwiseProduct(th)).sum() / d;
  ov.p = th.cwiseProduct(zeta.cwiseProduct(th)).sum() / d;
  ov.a = th.cwiseProduct(ups.cwiseProduct(th)).sum() / d;
  ov.f = theta0.cwiseProduct(ups.cwiseProduct(th)).sum() / d;
  ov.n = th.squaredNorm() / d;
  return ov;
}

EmpiricalErrors empirical_errors(const Estimator& est,
                                 const Eigen::VectorXd& theta0,
                                 const BlockFeatureModel& model, double tau,
                                 double eps_g, int test_size,
                                 std::uint64_t seed, double gamma) {
  const int d = static_cast<int>(est.theta.size());
  const int n = test_size;
  std::mt19937_64 rng = seeded_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Every metric depends on a test point only through the pair of fields
  // (theta0' x / sqrt(d), theta' x / sqrt(d)), which for Gaussian covariates
  // is exactly bivariate normal with the empirical quadratic forms as
  // covariance. Sampling the fields is the same test distribution without
  // the d-dimensional draws.
  const EmpiricalOverlaps ov = empirical_overlaps(est, theta0, model);
  const Eigen::VectorXd psi = spectrum_psi(model, d);
  const double rho_d = theta0.cwiseProduct(psi.cwiseProduct(theta0)).sum() / d;
  const double cross = ov.m;  // theta0' Sigma_x theta / d
  const double q_d = std::max(ov.q, kNormFloor);
  const double cond_var = std::max(rho_d - cross * cross / q_d, 0.0);

  const double sq_a = std::sqrt(std::max(ov.a, 0.0));
  const double sq_n = std::sqrt(std::max(ov.n, kNormFloor));

  long gen = 0, bnd = 0, adv = 0, cp = 0;
  for (int i = 0; i < n; ++i) {
    const double student = std::sqrt(q_d) * normal(rng);
    const double nu =
        (cross / q_d) * student + std::sqrt(cond_var) * normal(rng);
    const double z = tau > 0.0 ? nu + tau * normal(rng) : nu;
    const double y = z >= 0.0 ? 1.0 : -1.0;
    const double margin = y * student;

    const bool wrong = margin <= 0.0;
    const bool flippable = margin - eps_g * sq_a <= 0.0;
    gen += wrong;
    adv += flippable;
    bnd += (!wrong && flippable);

    // Class-preserving attack along Sigma_u theta / ||theta||.
    const double tm = y * nu;
    bool cp_wrong;
    if (tm <= gamma) {
      cp_wrong = wrong;
    } else if (ov.f <= 0.0 || tm - eps_g * ov.f / sq_n >= gamma) {
      cp_wrong = margin - eps_g * ov.a / sq_n <= 0.0;
    } else {
      cp_wrong = margin + (ov.a / ov.f) * (gamma - tm) <= 0.0;
    }
    cp += cp_wrong;
  }

  auto rate = [&](long c) { return static_cast<double>(c) / n; };
  auto sem = [&](double p) { return std::sqrt(p * (1.0 - p) / n); };
  EmpiricalErrors out;
  out.egen = rate(gen);
  out.ebnd = rate(bnd);
  out.eadv = rate(adv);
  out.ecp = rate(cp);
  out.egen_sem = sem(out.egen);
  out.ebnd_sem = sem(out.ebnd);
  out.eadv_sem = sem(out.eadv);
  out.ecp_sem = sem(out.ecp);
  out.test_size = n;
  return out;
}

TrainSetMetrics training_metrics(const Estimator& est, const Dataset& data,
                                 double eps_t) {
  const int n = static_cast<int>(data.x.rows());
  const double sqrt_d = std::sqrt(double(data.x.cols()));
  const Eigen::VectorXd zeta =
      spectrum_delta(data.model, static_cast<int>(data.x.cols()));
  const double p =
      est.theta.cwiseProduct(zeta.cwiseProduct(est.theta)).sum() /
      data.x.cols();
  const double shift = eps_t * std::sqrt(std::max(p, 0.0));
  const Eigen::VectorXd z = data.x * est.theta / sqrt_d;

  TrainSetMetrics out;
  long wrong = 0;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    wrong += data.y(i) * z(i) <= 0.0;
    loss += logistic_loss(data.y(i) * z(i) - shift);
  }
  out.etrain = static_cast<double>(wrong) / n;
  out.ltrain = loss / n;
  return out;
}

}  // namespace advse
