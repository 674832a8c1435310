#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "advse/bfm.hpp"
#include "advse/channel.hpp"
#include "advse/metrics.hpp"
#include "advse/presets.hpp"
#include "advse/se.hpp"
#include "advse/sim.hpp"
#include "doctest.h"

using namespace advse;

namespace {

const BlockFeatureModel kIdentity = build_bfm({{1.0, 1.0, 1.0, 1.0, 1.0}});
const BlockFeatureModel kTwoBlock =
    build_bfm({{0.5, 5.0, 2.0, 1.0, 1.0}, {0.5, 0.2, 1.0, 1.0, 1.0}});

}  // namespace

TEST_CASE("channel update: eps_t = 0 gives phat = 0 exactly") {
  ExperimentParams params{1.0, 1e-3, 0.05, 0.0, 0.0};
  const auto hat = channel_update({0.4, 1.2, 0.8, 0.5}, params, kIdentity);
  CHECK(hat.phat == 0.0);
  CHECK(hat.qhat > 0.0);
  CHECK(hat.vhat > 0.0);
}

TEST_CASE("channel update: teacher response stays positive at m = 0") {
  // dZ0 carries a factor y, so the y-sum pairs fg(+1, w) - fg(-1, w) > 0:
  // the map escapes the zero-alignment point, as it must for the iteration
  // to reach the informative solution.
  ExperimentParams params{1.0, 1e-3, 0.05, 0.2, 0.0};
  const auto hat = channel_update({0.0, 1.0, 1.0, 1.0}, params, kIdentity);
  CHECK(hat.mhat > 0.0);
  const auto next = prior_update(hat, params.lambda, kIdentity);
  CHECK(next.m > 0.0);
}

TEST_CASE("channel update against a Monte-Carlo oracle") {
  // Same expectations sampled from the joint (xi, teacher field, label)
  // measure; the dZ0 weight enters as the score dZ0/Z0.
  const Overlaps ov{0.5, 1.0, 1.0, 1.0};
  ExperimentParams params{1.0, 1e-3, 0.05, 0.2, 0.0};
  const auto hat = channel_update(ov, params, kIdentity);

  const double rho_val = 1.0;
  const double a = ov.m / std::sqrt(ov.q);
  const double c = rho_val - ov.m * ov.m / ov.q;
  const ProbitChannel channel{params.tau};
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const long samples = 10000000;
  double s_m = 0, s_q = 0, s_v = 0, s_p = 0;
  double s2_m = 0, s2_q = 0, s2_v = 0, s2_p = 0;
  for (long i = 0; i < samples; ++i) {
    const double xi = normal(rng);
    const double nu = a * xi + std::sqrt(c) * normal(rng);
    const double p_plus =
        0.5 * std::erfc(-nu / (std::sqrt(2.0) * params.tau));
    const int y = unif(rng) < p_plus ? 1 : -1;
    const double f = fg(y, std::sqrt(ov.q) * xi, ov.v, ov.p, params.eps_t);
    const double df =
        dfg_domega(y, std::sqrt(ov.q) * xi, ov.v, ov.p, params.eps_t);
    const double score =
        dz0_domega(y, a * xi, c, channel) / z0(y, a * xi, c, channel);
    const double vm = score * f, vq = f * f, vv = df, vp = y * f;
    s_m += vm;
    s_q += vq;
    s_v += vv;
    s_p += vp;
    s2_m += vm * vm;
    s2_q += vq * vq;
    s2_v += vv * vv;
    s2_p += vp * vp;
  }
  auto mean_sem = [&](double s, double s2) {
    const double mu = s / samples;
    const double var = s2 / samples - mu * mu;
    return std::pair<double, double>(mu, std::sqrt(var / samples));
  };
  const auto [mc_m, sem_m] = mean_sem(s_m, s2_m);
  const auto [mc_q, sem_q] = mean_sem(s_q, s2_q);
  const auto [mc_v, sem_v] = mean_sem(s_v, s2_v);
  const auto [mc_p, sem_p] = mean_sem(s_p, s2_p);

  CHECK(std::abs(hat.mhat - params.alpha * mc_m) < 3.0 * params.alpha * sem_m);
  CHECK(std::abs(hat.qhat - params.alpha * mc_q) < 3.0 * params.alpha * sem_q);
  CHECK(std::abs(hat.vhat + params.alpha * mc_v) < 3.0 * params.alpha * sem_v);
  const double mc_phat = params.alpha * params.eps_t * mc_p / std::sqrt(ov.p);
  const double sem_phat =
      params.alpha * params.eps_t * sem_p / std::sqrt(ov.p);
  CHECK(std::abs(hat.phat - mc_phat) < 3.0 * sem_phat);
}

TEST_CASE("prior update: zero signal and identity-block arithmetic") {
  // mhat = qhat = 0 with vhat = 0 leaves only V = sum phi psi / (lambda +
  // phat delta).
  ConjugateOverlaps hat{0.0, 0.0, 0.0, 0.5};
  const auto out = prior_update(hat, 2.0, kTwoBlock);
  CHECK(out.m == 0.0);
  CHECK(out.q == 0.0);
  CHECK(out.p == 0.0);
  double expected_v = 0.0;
  for (const Block& b : kTwoBlock.blocks())
    expected_v += b.fraction * b.psi / (2.0 + 0.5 * b.delta);
  CHECK(out.v == doctest::Approx(expected_v).epsilon(1e-15));

  // Single identity block, lambda = 1, vhat = 1, mhat = qhat = 1.
  const auto id = prior_update({1.0, 1.0, 1.0, 0.0}, 1.0, kIdentity);
  CHECK(id.m == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(id.q == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(id.v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(id.p == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("prior and aux updates against a dense trace oracle") {
  // Averaged-teacher trace forms evaluated with dense d = 2000 matrices.
  const int d = 2000;
  const ConjugateOverlaps hat{1.3, 0.7, 0.9, 0.4};
  const double lambda = 0.05;

  const Eigen::VectorXd psi = spectrum_psi(kTwoBlock, d);
  const Eigen::VectorXd zeta = spectrum_delta(kTwoBlock, d);
  const Eigen::VectorXd ups = spectrum_upsilon(kTwoBlock, d);
  const Eigen::VectorXd tvec = spectrum_teacher(kTwoBlock, d);

  const Eigen::MatrixXd sx = psi.asDiagonal();
  const Eigen::MatrixXd sd = zeta.asDiagonal();
  const Eigen::MatrixXd su = ups.asDiagonal();
  const Eigen::MatrixXd st = tvec.asDiagonal();
  const Eigen::MatrixXd lam_inv =
      (lambda * Eigen::MatrixXd::Identity(d, d) + hat.vhat * sx +
       hat.phat * sd)
          .inverse();
  const Eigen::MatrixXd h =
      hat.mhat * hat.mhat * sx * st * sx + hat.qhat * sx;

  const auto out = prior_update(hat, lambda, kTwoBlock);
  const auto aux = aux_overlaps(hat, lambda, kTwoBlock);
  CHECK(out.m ==
        doctest::Approx((hat.mhat * sx * st * sx * lam_inv).trace() / d)
            .epsilon(1e-10));
  CHECK(out.q ==
        doctest::Approx((h * sx * lam_inv * lam_inv).trace() / d)
            .epsilon(1e-10));
  CHECK(out.v == doctest::Approx((sx * lam_inv).trace() / d).epsilon(1e-10));
  CHECK(out.p ==
        doctest::Approx((h * sd * lam_inv * lam_inv).trace() / d)
            .epsilon(1e-10));
  CHECK(aux.a ==
        doctest::Approx((h * su * lam_inv * lam_inv).trace() / d)
            .epsilon(1e-10));
  CHECK(aux.f ==
        doctest::Approx((hat.mhat * sx * st * su * lam_inv).trace() / d)
            .epsilon(1e-10));
  CHECK(aux.n ==
        doctest::Approx((h * lam_inv * lam_inv).trace() / d).epsilon(1e-10));
}

TEST_CASE("aux overlap identities") {
  const ConjugateOverlaps hat{0.8, 0.6, 1.1, 0.3};
  // Uniform attack spectrum: A = N.
  const auto aux_u = aux_overlaps(hat, 0.1, kTwoBlock);
  CHECK(aux_u.a == doctest::Approx(aux_u.n).epsilon(1e-14));

  // Attack aligned with the data spectrum: A = q. The psi spectrum here has
  // unit trace so upsilon = psi survives the trace normalisation.
  const auto aligned =
      build_bfm({{0.5, 1.8, 2.0, 1.8, 1.0}, {0.5, 0.2, 1.0, 0.2, 1.0}});
  const auto aux_a = aux_overlaps(hat, 0.1, aligned);
  const auto pr = prior_update(hat, 0.1, aligned);
  CHECK(aux_a.a == doctest::Approx(pr.q).epsilon(1e-14));
}

TEST_CASE("over-regularised limit crushes the overlaps") {
  ExperimentParams params{1.0, 1e6, 0.05, 0.0, 0.0};
  const auto fp = solve_fixed_point(params, kIdentity);
  CHECK(fp.ov.q < 1e-4);
  CHECK(std::abs(fp.ov.m) < 1e-2);
  const double egen =
      generalisation_error(fp.ov.m, fp.ov.q, fp.aux.rho, params.tau);
  CHECK(egen > 0.2);
  CHECK(egen <= 0.5);
}

TEST_CASE("fixed point satisfies both maps and basic inequalities") {
  for (const char* name : {"fig1-hr-hu", "fig2-left-uniform"}) {
    const Preset& preset = preset_by_name(name);
    const auto model = preset.model();
    ExperimentParams params{2.0, preset.lambda, preset.tau, 0.2, preset.eps_g};
    SolverConfig cfg;
    const auto fp = solve_fixed_point(params, model, cfg);

    const auto hat = channel_update(fp.ov, params, model, cfg.nodes);
    const auto next = prior_update(hat, params.lambda, model);
    CHECK(std::abs(next.m - fp.ov.m) < 10.0 * cfg.tol);
    CHECK(std::abs(next.q - fp.ov.q) < 10.0 * cfg.tol);
    CHECK(std::abs(next.v - fp.ov.v) < 10.0 * cfg.tol);
    CHECK(std::abs(next.p - fp.ov.p) < 10.0 * cfg.tol);

    CHECK(fp.hat.phat >= 0.0);
    CHECK(fp.hat.qhat >= 0.0);
    CHECK(fp.hat.vhat >= 0.0);
    // Cauchy-Schwarz in the data and attack geometries.
    CHECK(fp.ov.m * fp.ov.m <= fp.aux.rho * fp.ov.q + 1e-9);
    CHECK(fp.aux.f * fp.aux.f <=
          fp.aux.a * model.attack_teacher_norm() + 1e-9);
  }
}

TEST_CASE("gauss-hermite rule is doubling stable at a moderate fixed point") {
  const Preset& preset = preset_by_name("fig1-hr-hu");
  const auto model = preset.model();
  ExperimentParams params{2.0, preset.lambda, preset.tau, 0.2, preset.eps_g};
  const auto fp = solve_fixed_point(params, model);
  const auto h1 = channel_update(fp.ov, params, model, 151);
  const auto h2 = channel_update(fp.ov, params, model, 303);
  CHECK(std::abs(h1.mhat - h2.mhat) < 1e-9 * std::max(1.0, std::abs(h1.mhat)));
  CHECK(std::abs(h1.qhat - h2.qhat) < 1e-9 * std::max(1.0, std::abs(h1.qhat)));
  CHECK(std::abs(h1.vhat - h2.vhat) < 1e-9 * std::max(1.0, std::abs(h1.vhat)));
  CHECK(std::abs(h1.phat - h2.phat) < 1e-9 * std::max(1.0, std::abs(h1.phat)));
}

TEST_CASE("alignment grows with sample complexity without adversary") {
  double prev = -1.0;
  for (double alpha : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    ExperimentParams params{alpha, 1e-3, 0.05, 0.0, 0.0};
    const auto fp = solve_fixed_point(params, kIdentity);
    const double align = fp.ov.m / std::sqrt(fp.aux.rho * fp.ov.q);
    CHECK(align >= prev - 1e-6);
    prev = align;
  }
}

TEST_CASE("state evolution matches finite-size ERM without adversary") {
  // eps_t = eps_g = 0: plain ridge-logistic teacher-student learning.
  ExperimentParams params{2.0, 1e-2, 0.05, 0.0, 0.0};
  const auto fp = solve_fixed_point(params, kIdentity);
  const double align_th = fp.ov.m / std::sqrt(fp.aux.rho * fp.ov.q);

  const int d = 1000, seeds = 20;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < seeds; ++k) {
    const Dataset data = sample_dataset(kIdentity, d, params.alpha, params.tau,
                                        500 + 17 * k);
    TrainerConfig cfg;
    cfg.init_seed = 900 + k;
    const Estimator est = erm_train(data, params.lambda, 0.0, cfg);
    const EmpiricalOverlaps eo = empirical_overlaps(est, data.theta0, kIdentity);
    const double align = eo.m / std::sqrt(kIdentity.rho() * eo.q);
    s += align;
    s2 += align * align;
  }
  const double mean = s / seeds;
  const double sem = std::sqrt((s2 / seeds - mean * mean) / (seeds - 1));
  CHECK(std::abs(align_th - mean) < 3.0 * sem);
}

TEST_CASE("convergence error carries the last state") {
  ExperimentParams params{2.0, 1e-3, 0.05, 0.2, 0.2};
  SolverConfig cfg;
  cfg.max_iter = 3;
  CHECK_THROWS_AS(solve_fixed_point(params, kIdentity, cfg), ConvergenceError);
  try {
    solve_fixed_point(params, kIdentity, cfg);
  } catch (const ConvergenceError& e) {
    CHECK(e.residual > 0.0);
    CHECK(e.last_state.q > 0.0);
  }
}
