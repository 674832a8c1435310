#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "advse/gamp.hpp"
#include "advse/presets.hpp"
#include "advse/sim.hpp"
#include "doctest.h"

using namespace advse;

namespace {

const BlockFeatureModel kModel = build_bfm({{1.0, 2.0, 1.0, 1.0, 2.0}});

}  // namespace

TEST_CASE("gamp reduces to ridge-logistic gamp without adversary") {
  const auto data = sample_dataset(kModel, 600, 2.0, 0.05, 71);
  TrainerConfig tc;
  tc.grad_tol = 1e-9;
  const auto erm = erm_train(data, 1e-3, 0.0, tc);
  GampConfig gc;
  gc.tol = 1e-9;
  gc.damping = 0.0;  // plain iteration in the sanity case
  const auto gamp = advgamp_train(data, 1e-3, 0.0, gc);
  CHECK((erm.theta - gamp.theta).norm() / erm.theta.norm() < 1e-3);
}

TEST_CASE("gamp minimises the adversarial risk") {
  const auto data = sample_dataset(kModel, 600, 2.0, 0.05, 73);
  TrainerConfig tc;
  tc.grad_tol = 1e-9;
  const auto erm = erm_train(data, 1e-3, 0.2, tc);
  GampConfig gc;
  gc.tol = 1e-9;
  const auto gamp = advgamp_train(data, 1e-3, 0.2, gc);
  CHECK((erm.theta - gamp.theta).norm() / erm.theta.norm() < 1e-3);

  const auto oe = empirical_overlaps(erm, data.theta0, kModel);
  const auto og = empirical_overlaps(gamp, data.theta0, kModel);
  CHECK(std::abs(oe.m - og.m) < 1e-3);
  CHECK(std::abs(oe.q - og.q) < 1e-3);
  CHECK(std::abs(oe.p - og.p) < 1e-3);

  // The GAMP solution also fails to improve the convex objective.
  const double obj_erm = erm_objective(data, 1e-3, 0.2, erm.theta);
  const double obj_gamp = erm_objective(data, 1e-3, 0.2, gamp.theta);
  CHECK(obj_gamp <= obj_erm + 1e-6 * std::abs(obj_erm));
}

TEST_CASE("gamp matches erm across the preset battery") {
  for (const char* name : {"fig1-lr-lu", "fig2-left-uniform"}) {
    const Preset& p = preset_by_name(name);
    const auto model = p.model();
    const auto data = sample_dataset(model, 1000, 2.0, p.tau, 83);
    TrainerConfig tc;
    tc.grad_tol = 1e-9;
    const auto erm = erm_train(data, p.lambda, 0.2, tc);
    GampConfig gc;
    gc.tol = 1e-9;
    const auto gamp = advgamp_train(data, p.lambda, 0.2, gc);
    CHECK((erm.theta - gamp.theta).norm() / erm.theta.norm() < 1e-3);
  }
}

TEST_CASE("gamp reports convergence failures") {
  const auto data = sample_dataset(kModel, 100, 1.0, 0.05, 79);
  GampConfig gc;
  gc.max_iter = 2;
  CHECK_THROWS_AS(advgamp_train(data, 1e-3, 0.2, gc), std::runtime_error);
}
