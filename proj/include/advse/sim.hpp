#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "advse/bfm.hpp"
#include "advse/se.hpp"

namespace advse {

// Raw integer seeds with arithmetic structure (base + k * spacing) produce
// visibly correlated mt19937_64 streams; every engine is therefore seeded
// through a splitmix64 avalanche of the user-level seed.
std::uint64_t mix_seed(std::uint64_t seed);
std::mt19937_64 seeded_rng(std::uint64_t seed);

struct Dataset {
  Eigen::MatrixXd x;        // n x d covariates
  Eigen::VectorXd y;        // +-1 labels
  Eigen::VectorXd theta0;   // teacher
  BlockFeatureModel model;
  std::uint64_t seed = 0;
  std::vector<int> block_sizes;
};

enum class Method { kErm, kGamp, kFgm, kSurrogate };

struct Estimator {
  Eigen::VectorXd theta;
  Method method = Method::kErm;
  int iterations = 0;
  double residual = 0.0;
};

struct TrainerConfig {
  double grad_tol = 1e-6;   // on ||grad|| / max(1, ||theta||)
  int max_iter = 200000;
  std::uint64_t init_seed = 1;
};

// Per-coordinate eigenvalues of the four covariances at dimension d, blocks
// sized by largest remainder.
std::vector<int> block_sizes(const BlockFeatureModel& model, int d);
Eigen::VectorXd spectrum_psi(const BlockFeatureModel& model, int d);
Eigen::VectorXd spectrum_delta(const BlockFeatureModel& model, int d);
Eigen::VectorXd spectrum_upsilon(const BlockFeatureModel& model, int d);
Eigen::VectorXd spectrum_teacher(const BlockFeatureModel& model, int d);

// n = round(alpha d) samples with x ~ N(0, Sigma_x), theta0 ~ N(0, Sigma_theta),
// labels from the probit channel on theta0' x / sqrt(d). Deterministic per seed.
Dataset sample_dataset(const BlockFeatureModel& model, int d, double alpha,
                       double tau, std::uint64_t seed);

// Minimises sum_i g(y_i theta' x_i / sqrt(d) - eps_t sqrt(theta' Sigma_d theta / d))
// + lambda/2 ||theta||^2 by Barzilai-Borwein descent with a nonmonotone
// backtracking safeguard.
Estimator erm_train(const Dataset& data, double lambda, double eps_t,
                    const TrainerConfig& cfg = {});

// FGM variant: the penalty is eps_t theta' Sigma_d theta / (sqrt(d) ||theta||).
Estimator fgm_train(const Dataset& data, double lambda, double eps_t,
                    const TrainerConfig& cfg = {});

// Data-dependent regularisation surrogate:
// sum_i g(y_i theta' x_i / sqrt(d)) + lt1 sqrt(theta' Sigma_d theta)
// + lt2 theta' Sigma_d theta + lambda/2 ||theta||^2.
Estimator surrogate_train(const Dataset& data, double lambda, double lt1,
                          double lt2, const TrainerConfig& cfg = {});

// Objective values and gradients, exposed for finite-difference checks.
double erm_objective(const Dataset& data, double lambda, double eps_t,
                     const Eigen::VectorXd& theta);
Eigen::VectorXd erm_gradient(const Dataset& data, double lambda, double eps_t,
                             const Eigen::VectorXd& theta);
double fgm_objective(const Dataset& data, double lambda, double eps_t,
                     const Eigen::VectorXd& theta);
Eigen::VectorXd fgm_gradient(const Dataset& data, double lambda, double eps_t,
                             const Eigen::VectorXd& theta);
double surrogate_objective(const Dataset& data, double lambda, double lt1,
                           double lt2, const Eigen::VectorXd& theta);
Eigen::VectorXd surrogate_gradient(const Dataset& data, double lambda,
                                   double lt1, double lt2,
                                   const Eigen::VectorXd& theta);

struct EmpiricalOverlaps {
  double m = 0.0, q = 0.0, p = 0.0;
  double a = 0.0, f = 0.0, n = 0.0;
};

EmpiricalOverlaps empirical_overlaps(const Estimator& est,
                                     const Eigen::VectorXd& theta0,
                                     const BlockFeatureModel& model);

struct EmpiricalErrors {
  double egen = 0.0, ebnd = 0.0, eadv = 0.0, ecp = 0.0;
  double egen_sem = 0.0, ebnd_sem = 0.0, eadv_sem = 0.0, ecp_sem = 0.0;
  int test_size = 0;
};

// Fresh test sample; the inner maximisation is the closed-form margin shift
// eps_g sqrt(theta' Sigma_u theta / d). Ecp uses the three-case class-
// preserving attack with teacher margin gamma. Test points enter every
// metric only through the teacher/student fields, so those are drawn from
// their exact bivariate law instead of materialising d-dimensional vectors.
EmpiricalErrors empirical_errors(const Estimator& est,
                                 const Eigen::VectorXd& theta0,
                                 const BlockFeatureModel& model, double tau,
                                 double eps_g, int test_size,
                                 std::uint64_t seed, double gamma = 0.0);

struct TrainSetMetrics {
  double etrain = 0.0;
  double ltrain = 0.0;
};

// Misclassification rate and mean shifted-margin loss on the training set.
TrainSetMetrics training_metrics(const Estimator& est, const Dataset& data,
                                 double eps_t);

}  // namespace advse
