#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "advse/bfm.hpp"
#include "advse/serialize.hpp"
#include "advse/sim.hpp"
#include "doctest.h"

using namespace advse;

namespace {

const BlockFeatureModel kIdentity = build_bfm({{1.0, 1.0, 1.0, 1.0, 1.0}});
const BlockFeatureModel kTwoBlock =
    build_bfm({{0.5, 5.0, 2.0, 1.0, 1.0}, {0.5, 0.2, 1.0, 1.0, 1.0}});

Dataset tiny_dataset(int d, int n, std::uint64_t seed,
                     const BlockFeatureModel& model) {
  // Hand-built dataset below the d >= 50 sampling threshold.
  Dataset data;
  data.model = model;
  data.seed = seed;
  data.block_sizes = block_sizes(model, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  data.theta0.resize(d);
  for (int j = 0; j < d; ++j) data.theta0(j) = normal(rng);
  data.x.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.x(i, j) = normal(rng);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double f = data.x.row(i).dot(data.theta0) / std::sqrt(double(d));
    data.y(i) = f >= 0.0 ? 1.0 : -1.0;
  }
  return data;
}

}  // namespace

TEST_CASE("sampled datasets follow the block model") {
  const auto data = sample_dataset(kTwoBlock, 2000, 1.5, 0.0, 11);
  CHECK(data.x.rows() == 3000);
  CHECK(data.x.cols() == 2000);

  // tau = 0: labels are exact signs of the teacher field.
  for (int i = 0; i < data.y.size(); ++i) {
    const double f = data.x.row(i).dot(data.theta0) / std::sqrt(2000.0);
    CHECK(data.y(i) == (f >= 0.0 ? 1.0 : -1.0));
  }

  // Teacher norm concentrates on rho; chi-square fluctuations give
  // SD = sqrt(2 sum phi psi^2 t^2 / d), so test a 5-sigma band.
  const Eigen::VectorXd psi = spectrum_psi(kTwoBlock, 2000);
  const double rho_d =
      data.theta0.cwiseProduct(psi.cwiseProduct(data.theta0)).sum() / 2000.0;
  double rho_var = 0.0;
  for (const Block& b : kTwoBlock.blocks())
    rho_var += 2.0 * b.fraction * b.psi * b.psi * b.t * b.t / 2000.0;
  CHECK(std::abs(rho_d - kTwoBlock.rho()) < 5.0 * std::sqrt(rho_var));

  // Identity model at d = 2000 sits within 5% of rho = 1.
  const auto id_data =
      sample_dataset(build_bfm({{1.0, 1.0, 1.0, 1.0, 1.0}}), 2000, 1.0, 0.0,
                     12);
  CHECK(std::abs(id_data.theta0.squaredNorm() / 2000.0 - 1.0) < 0.05);

  // Per-block empirical variance within 5 sqrt(2 / (n d_l)) of psi.
  int pos = 0;
  for (std::size_t l = 0; l < data.block_sizes.size(); ++l) {
    const int dl = data.block_sizes[l];
    const double var =
        data.x.middleCols(pos, dl).squaredNorm() / (3000.0 * dl);
    const double band = 5.0 * std::sqrt(2.0 / (3000.0 * dl));
    CHECK(std::abs(var - kTwoBlock.blocks()[l].psi) <
          band * kTwoBlock.blocks()[l].psi);
    pos += dl;
  }

  // Label symmetry.
  CHECK(std::abs(data.y.mean()) < 3.0 / std::sqrt(3000.0));

  // Determinism per seed.
  const auto again = sample_dataset(kTwoBlock, 2000, 1.5, 0.0, 11);
  CHECK(again.x == data.x);
  CHECK(again.y == data.y);

  CHECK_THROWS_AS(sample_dataset(kTwoBlock, 10, 1.0, 0.0, 1),
                  std::invalid_argument);
}

TEST_CASE("ridge crush leaves near-zero weights") {
  const auto data = sample_dataset(kIdentity, 200, 2.0, 0.05, 3);
  const auto est = erm_train(data, 1e6, 0.0);
  CHECK(est.theta.norm() < 1e-3);
  const auto fgm = fgm_train(data, 1e6, 0.2);
  CHECK(fgm.theta.norm() < 1e-3);
}

TEST_CASE("trainer residual honours the advertised tolerance") {
  const auto data = sample_dataset(kIdentity, 300, 2.0, 0.05, 111);
  TrainerConfig cfg;
  const auto est = erm_train(data, 1e-2, 0.2, cfg);
  CHECK(est.residual <= cfg.grad_tol * std::max(1.0, est.theta.norm()));
}

TEST_CASE("fgm training tracks full-minimisation training") {
  // Non-uniform defence spectrum so the two objectives genuinely differ;
  // the learning curves stay close across sample complexities.
  const auto model =
      build_bfm({{0.5, 5.0, 2.0, 1.0, 1.0}, {0.5, 0.2, 1.0, 1.0, 1.0}});
  for (double alpha : {1.0, 4.0}) {
    double erm_egen = 0.0, fgm_egen = 0.0, erm_ebnd = 0.0, fgm_ebnd = 0.0;
    const int seeds = 4;
    for (int s = 0; s < seeds; ++s) {
      const auto data = sample_dataset(model, 500, alpha, 0.05, 200 + s);
      const auto erm = erm_train(data, 1e-3, 0.2);
      const auto fgm = fgm_train(data, 1e-3, 0.2);
      const auto ee = empirical_errors(erm, data.theta0, model, 0.05, 0.2,
                                       400000, 300 + s);
      const auto ef = empirical_errors(fgm, data.theta0, model, 0.05, 0.2,
                                       400000, 300 + s);
      erm_egen += ee.egen / seeds;
      fgm_egen += ef.egen / seeds;
      erm_ebnd += ee.ebnd / seeds;
      fgm_ebnd += ef.ebnd / seeds;
    }
    CHECK(std::abs(erm_egen - fgm_egen) < 0.02);
    CHECK(std::abs(erm_ebnd - fgm_ebnd) < 0.02);
  }
}

TEST_CASE("surrogate training tracks adversarial training") {
  // Surrogate penalties read off the small-eps_t expansion: lt1 counts the
  // negative-margin fraction times eps_t / (2 sqrt(d)).
  const double alpha = 2.0, eps_t = 0.2;
  const int d = 500, seeds = 4;
  double adv_egen = 0.0, sur_egen = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const auto data = sample_dataset(kIdentity, d, alpha, 0.05, 400 + s);
    const auto erm = erm_train(data, 1e-3, eps_t);
    // Count training points with negative shifted margin at the adversarial
    // solution to calibrate the surrogate weights.
    const Eigen::VectorXd z = data.x * erm.theta / std::sqrt(double(d));
    const double p_d = erm.theta.squaredNorm() / d;
    long neg = 0;
    for (int i = 0; i < z.size(); ++i)
      neg += data.y(i) * z(i) - eps_t * std::sqrt(p_d) < 0.0;
    const double lt1 = neg * eps_t / (2.0 * std::sqrt(double(d)));
    const double lt2 = neg * eps_t * eps_t / (8.0 * d);
    const auto sur = surrogate_train(data, 1e-3, lt1, lt2);
    const auto ea = empirical_errors(erm, data.theta0, kIdentity, 0.05, 0.2,
                                     400000, 500 + s);
    const auto es = empirical_errors(sur, data.theta0, kIdentity, 0.05, 0.2,
                                     400000, 500 + s);
    adv_egen += ea.egen / seeds;
    sur_egen += es.egen / seeds;
  }
  CHECK(std::abs(adv_egen - sur_egen) < 0.02);
}

TEST_CASE("two-dimensional objective matches an exhaustive grid search") {
  const auto data = tiny_dataset(2, 4, 5, kIdentity);
  const double lambda = 0.3, eps_t = 0.4;
  const auto est = erm_train(data, lambda, eps_t);
  const double trained = erm_objective(data, lambda, eps_t, est.theta);

  double best = 1e300;
  const int grid = 400;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      Eigen::Vector2d theta(-3.0 + 6.0 * i / (grid - 1),
                            -3.0 + 6.0 * j / (grid - 1));
      best = std::min(best, erm_objective(data, lambda, eps_t, theta));
    }
  }
  CHECK(trained <= best + 1e-4);
  CHECK(std::abs(trained - best) < 1e-3);
}

TEST_CASE("objective gradients match central finite differences") {
  const auto data = tiny_dataset(20, 50, 9, kTwoBlock);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd theta(20);
    for (int j = 0; j < 20; ++j) theta(j) = normal(rng);
    auto check_grad = [&](auto value, auto grad) {
      const Eigen::VectorXd g = grad(theta);
      Eigen::VectorXd dir(20);
      for (int j = 0; j < 20; ++j) dir(j) = normal(rng);
      dir.normalize();
      const double h = 1e-6;
      const double fd =
          (value(theta + h * dir) - value(theta - h * dir)) / (2.0 * h);
      CHECK(std::abs(fd - g.dot(dir)) <
            1e-5 * std::max(1.0, std::abs(g.dot(dir))));
    };
    check_grad(
        [&](const Eigen::VectorXd& t) { return erm_objective(data, 0.1, 0.3, t); },
        [&](const Eigen::VectorXd& t) { return erm_gradient(data, 0.1, 0.3, t); });
    check_grad(
        [&](const Eigen::VectorXd& t) { return fgm_objective(data, 0.1, 0.3, t); },
        [&](const Eigen::VectorXd& t) { return fgm_gradient(data, 0.1, 0.3, t); });
    check_grad(
        [&](const Eigen::VectorXd& t) {
          return surrogate_objective(data, 0.1, 0.2, 0.1, t);
        },
        [&](const Eigen::VectorXd& t) {
          return surrogate_gradient(data, 0.1, 0.2, 0.1, t);
        });
  }
}

TEST_CASE("fgm with a uniform defence spectrum reduces to erm") {
  // Sigma_d = identity: the penalty becomes eps_t ||theta|| / sqrt(d) in
  // both objectives.
  const auto data = sample_dataset(kIdentity, 300, 1.5, 0.05, 13);
  TrainerConfig cfg;
  cfg.grad_tol = 1e-9;
  const auto erm = erm_train(data, 1e-2, 0.3, cfg);
  const auto fgm = fgm_train(data, 1e-2, 0.3, cfg);
  CHECK((erm.theta - fgm.theta).norm() / erm.theta.norm() < 1e-4);
}

TEST_CASE("surrogate limits") {
  const auto data = sample_dataset(kIdentity, 300, 1.5, 0.05, 17);
  TrainerConfig cfg;
  cfg.grad_tol = 1e-9;
  // lt1 = lt2 = 0 plus an explicit ridge is plain logistic regression.
  const auto sur = surrogate_train(data, 1e-2, 0.0, 0.0, cfg);
  const auto erm = erm_train(data, 1e-2, 0.0, cfg);
  CHECK((sur.theta - erm.theta).norm() / erm.theta.norm() < 1e-5);

  // lt1 = 0 on a uniform defence spectrum is a remapped ridge.
  const auto sur2 = surrogate_train(data, 1e-2, 0.0, 0.05, cfg);
  const auto erm2 = erm_train(data, 1e-2 + 2.0 * 0.05, 0.0, cfg);
  const double obj_sur = surrogate_objective(data, 1e-2, 0.0, 0.05, sur2.theta);
  const double obj_erm = surrogate_objective(data, 1e-2, 0.0, 0.05, erm2.theta);
  CHECK(std::abs(obj_sur - obj_erm) < 1e-4);
  CHECK((sur2.theta - erm2.theta).norm() / erm2.theta.norm() < 1e-4);
}

TEST_CASE("empirical overlaps: fixed points of the definitions") {
  const int d = 500;
  const auto data = sample_dataset(kTwoBlock, d, 1.0, 0.0, 23);
  Estimator est;
  est.theta = data.theta0;
  const auto ov = empirical_overlaps(est, data.theta0, kTwoBlock);
  CHECK(ov.m == doctest::Approx(ov.q).epsilon(1e-14));
  CHECK(ov.f == doctest::Approx(ov.a).epsilon(1e-14));

  est.theta = Eigen::VectorXd::Zero(d);
  const auto zero = empirical_overlaps(est, data.theta0, kTwoBlock);
  CHECK(zero.m == 0.0);
  CHECK(zero.q == 0.0);
  CHECK(zero.p == 0.0);
  CHECK(zero.a == 0.0);
  CHECK(zero.f == 0.0);
  CHECK(zero.n == 0.0);
}

TEST_CASE("empirical overlaps against dense quadratic forms") {
  const int d = 500;
  const auto data = sample_dataset(kTwoBlock, d, 1.0, 0.05, 29);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  Estimator est;
  est.theta.resize(d);
  for (int j = 0; j < d; ++j) est.theta(j) = normal(rng);

  const Eigen::MatrixXd sx = spectrum_psi(kTwoBlock, d).asDiagonal();
  const Eigen::MatrixXd sd = spectrum_delta(kTwoBlock, d).asDiagonal();
  const Eigen::MatrixXd su = spectrum_upsilon(kTwoBlock, d).asDiagonal();
  const auto ov = empirical_overlaps(est, data.theta0, kTwoBlock);
  CHECK(ov.m ==
        doctest::Approx(data.theta0.dot(sx * est.theta) / d).epsilon(1e-12));
  CHECK(ov.q ==
        doctest::Approx(est.theta.dot(sx * est.theta) / d).epsilon(1e-12));
  CHECK(ov.p ==
        doctest::Approx(est.theta.dot(sd * est.theta) / d).epsilon(1e-12));
  CHECK(ov.a ==
        doctest::Approx(est.theta.dot(su * est.theta) / d).epsilon(1e-12));
  CHECK(ov.f ==
        doctest::Approx(data.theta0.dot(su * est.theta) / d).epsilon(1e-12));
  CHECK(ov.n == doctest::Approx(est.theta.squaredNorm() / d).epsilon(1e-12));
}

TEST_CASE("empirical errors: clean limits") {
  const int d = 400;
  const auto data = sample_dataset(kIdentity, d, 1.0, 0.0, 37);
  Estimator est;
  est.theta = data.theta0;

  // Perfect teacher, no noise, no attack: every metric vanishes.
  const auto perfect =
      empirical_errors(est, data.theta0, kIdentity, 0.0, 0.0, 200000, 41);
  CHECK(perfect.egen == 0.0);
  CHECK(perfect.ebnd == 0.0);
  CHECK(perfect.eadv == 0.0);
  CHECK(perfect.ecp == 0.0);

  // eps_g = 0 collapses the adversarial metrics onto the clean error.
  std::mt19937_64 rng(43);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < d; ++j) est.theta(j) = data.theta0(j) + 0.7 * normal(rng);
  const auto rep =
      empirical_errors(est, data.theta0, kIdentity, 0.05, 0.0, 200000, 47);
  CHECK(rep.eadv == rep.egen);
  CHECK(rep.ebnd == 0.0);
  CHECK(rep.ecp == rep.egen);
}

TEST_CASE("closed-form flip criterion equals ellipsoid maximisation at d=3") {
  const auto model = build_bfm({{1.0, 1.0, 0.7, 1.9, 1.0}});
  std::mt19937_64 rng(53);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Vector3d ups = spectrum_upsilon(model, 3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector3d theta(normal(rng), normal(rng), normal(rng));
    const double eps_g = 0.3;
    // Closed form: worst-case decrease of the margin along Sigma_u theta.
    const double closed =
        eps_g * std::sqrt(theta.dot(ups.cwiseProduct(theta)));
    // Numerical maximisation of theta' delta over delta' Su^-1 delta <= eps^2
    // via delta = eps Su^(1/2) u on a fine sphere grid.
    double best = 0.0;
    const int nphi = 6000, ntheta = 3000;
    const Eigen::Vector3d root = ups.cwiseSqrt();
    for (int i = 0; i < ntheta; ++i) {
      const double th = M_PI * (i + 0.5) / ntheta;
      for (int j = 0; j < nphi; ++j) {
        const double ph = 2.0 * M_PI * j / nphi;
        const Eigen::Vector3d u(std::sin(th) * std::cos(ph),
                                std::sin(th) * std::sin(ph), std::cos(th));
        best = std::max(best, eps_g * theta.dot(root.cwiseProduct(u)));
      }
    }
    CHECK(std::abs(best - closed) < 1e-5 * std::max(1.0, closed));
  }
}

TEST_CASE("overlap SEM shrinks like one over root seeds") {
  const int d = 200;
  auto sem_of = [&](int seeds, std::uint64_t base) {
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < seeds; ++k) {
      const auto data = sample_dataset(kIdentity, d, 2.0, 0.05, base + k);
      TrainerConfig cfg;
      cfg.init_seed = base + 1000 + k;
      const auto est = erm_train(data, 1e-2, 0.0, cfg);
      const auto ov = empirical_overlaps(est, data.theta0, kIdentity);
      s += ov.m;
      s2 += ov.m * ov.m;
    }
    const double mean = s / seeds;
    return std::sqrt((s2 / seeds - mean * mean) / (seeds - 1));
  };
  const double sem5 = sem_of(5, 100);
  const double sem20 = sem_of(20, 200);
  const double sem80 = sem_of(80, 300);
  // Each ratio should be near sqrt(4) = 2; SEM estimates from few seeds are
  // themselves noisy, hence the slack.
  CHECK(sem5 / sem20 > 1.0);
  CHECK(sem5 / sem20 < 4.0);
  CHECK(sem20 / sem80 > 1.4);
  CHECK(sem20 / sem80 < 2.6);
}

TEST_CASE("training metrics on the training set") {
  const auto data = sample_dataset(kIdentity, 300, 0.5, 0.0, 59);
  TrainerConfig cfg;
  const auto est = erm_train(data, 1e-4, 0.0, cfg);
  const auto tm = training_metrics(est, data, 0.0);
  // Separable noiseless data at small alpha interpolates.
  CHECK(tm.etrain == 0.0);
  CHECK(tm.ltrain < 1e-2);
}

TEST_CASE("dataset and estimator serialisation round trips") {
  const auto data = sample_dataset(kTwoBlock, 60, 1.0, 0.05, 61);
  save_dataset(data, "/tmp/advse_test_dataset.bin");
  const auto back = load_dataset("/tmp/advse_test_dataset.bin");
  CHECK(back.x == data.x);
  CHECK(back.y == data.y);
  CHECK(back.theta0 == data.theta0);
  CHECK(back.seed == data.seed);
  CHECK(back.model.rho() == doctest::Approx(kTwoBlock.rho()).epsilon(1e-15));

  Estimator est;
  est.theta = data.theta0;
  est.method = Method::kGamp;
  est.iterations = 42;
  est.residual = 1.5e-8;
  save_estimator(est, 777, "/tmp/advse_test_estimator.bin");
  std::uint64_t seed = 0;
  const auto est2 = load_estimator("/tmp/advse_test_estimator.bin", &seed);
  CHECK(est2.theta == est.theta);
  CHECK(est2.method == Method::kGamp);
  CHECK(est2.iterations == 42);
  CHECK(est2.residual == est.residual);
  CHECK(seed == 777);

  std::uint64_t jseed = 0;
  const auto est3 = estimator_from_json(estimator_to_json(est, 99), &jseed);
  CHECK(est3.theta == est.theta);
  CHECK(jseed == 99);

  const auto small = sample_dataset(kIdentity, 50, 0.5, 0.05, 67);
  const auto jback = dataset_from_json(dataset_to_json(small));
  CHECK(jback.x == small.x);
  CHECK(jback.y == small.y);
  CHECK(jback.theta0 == small.theta0);
  CHECK(jback.seed == small.seed);
}
