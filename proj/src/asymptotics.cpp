#include "advse/asymptotics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "advse/channel.hpp"
#include "advse/metrics.hpp"
#include "advse/quadrature.hpp"

namespace advse {

namespace {

struct ScaledHats {
  double mhat0, qhat0, vhat0, phat0;
};

// Rescaled channel side. The proximal displacement collapses to the
// logistic-gradient form c(xi) = y V0 sigma(shift - y sqrt(q0) xi), so the
// hats no longer depend on V0.
ScaledHats scaled_channel(double m0, double q0, double p0, double tau,
                          double eps_t, double rho_val, int nodes) {
  const double sq = std::sqrt(q0);
  const double teacher_slope = m0 / sq;
  const double teacher_var = std::max(rho_val - m0 * m0 / q0, 1e-14);
  const ProbitChannel channel{tau};
  const double shift =
      eps_t > 0.0 ? eps_t * std::sqrt(std::max(p0, 1e-12)) : 0.0;

  // Noiseless perfect-alignment limit: Z0 degenerates to a label indicator
  // and dZ0 to a point mass at xi = 0, giving smooth half-line integrals.
  if (tau == 0.0 && rho_val - m0 * m0 / q0 <= 2e-14 && teacher_slope > 0.0) {
    auto half = [&](auto f) {
      return integrate_adaptive(
          [&](double xi) { return f(xi) * gauss_pdf(xi); }, 0.0, 10.0, 1e-12);
    };
    ScaledHats hats;
    hats.mhat0 = 2.0 * logistic_sigmoid(shift) * gauss_pdf(0.0) / teacher_slope;
    hats.qhat0 = 2.0 * half([&](double xi) {
      const double sg = logistic_sigmoid(shift - sq * xi);
      return sg * sg;
    });
    hats.vhat0 = 2.0 * half([&](double xi) {
      const double sg = logistic_sigmoid(shift - sq * xi);
      return sg * (1.0 - sg);
    });
    const double mom = 2.0 * half([&](double xi) {
      return logistic_sigmoid(shift - sq * xi);
    });
    hats.phat0 =
        eps_t > 0.0 ? eps_t * mom / std::sqrt(std::max(p0, 1e-12)) : 0.0;
    return hats;
  }

  auto integrand = [&](double xi) {
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    for (int y : {-1, 1}) {
      const double w0 = z0(y, teacher_slope * xi, teacher_var, channel);
      const double dw0 = dz0_domega(y, teacher_slope * xi, teacher_var, channel);
      const double sig = logistic_sigmoid(shift - y * sq * xi);
      const double g2 = sig * (1.0 - sig);
      out[0] += dw0 * y * sig;
      out[1] += w0 * sig * sig;
      out[2] += w0 * g2;
      out[3] += w0 * sig;
    }
    return out;
  };

  // Same width heuristic as the finite-alpha channel: the sharpest feature
  // must span several node spacings, otherwise adaptive quadrature takes
  // over. Here the proximal smoothing is gone (V ~ 1/alpha), so the
  // logistic transition width is 4 / sqrt(q0).
  const double spacing = M_PI / std::sqrt(2.0 * nodes);
  const double w_z0 = std::abs(teacher_slope) > 0.0
                          ? std::sqrt(teacher_var + tau * tau) /
                                std::abs(teacher_slope)
                          : 1e30;
  const double w_fg = 4.0 / sq;
  std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
  if (std::min(w_z0, w_fg) > 5.0 * spacing) {
    const GaussHermiteRule& rule = gauss_hermite(nodes);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const auto val = integrand(rule.nodes[i]);
      for (int k = 0; k < 4; ++k) acc[k] += rule.weights[i] * val[k];
    }
  } else {
    auto f = [&](double xi) {
      auto val = integrand(xi);
      const double pdf = gauss_pdf(xi);
      for (int k = 0; k < 4; ++k) val[k] *= pdf;
      return val;
    };
    acc = integrate_adaptive4(f, -10.0, 10.0, 1e-11);
  }

  ScaledHats hats;
  hats.mhat0 = acc[0];
  hats.qhat0 = acc[1];
  hats.vhat0 = acc[2];
  hats.phat0 =
      eps_t > 0.0 ? eps_t * acc[3] / std::sqrt(std::max(p0, 1e-12)) : 0.0;
  return hats;
}

struct ScaledPrior {
  double m0, q0, v0, p0, a0, f0, n0;
};

ScaledPrior scaled_prior(const ScaledHats& hats, double lambda1,
                         const BlockFeatureModel& model) {
  ScaledPrior out{0, 0, 0, 0, 0, 0, 0};
  for (const Block& b : model.blocks()) {
    const double den = lambda1 + hats.vhat0 * b.psi + hats.phat0 * b.delta;
    if (!(den > 0.0))
      throw std::runtime_error("solve_large_alpha: nonpositive denominator");
    const double sig = hats.mhat0 * hats.mhat0 * b.psi * b.psi * b.t;
    out.m0 += b.fraction * hats.mhat0 * b.psi * b.psi * b.t / den;
    out.q0 += b.fraction * sig * b.psi / (den * den);
    out.v0 += b.fraction * b.psi / den;
    out.p0 += b.fraction * b.delta * sig / (den * den);
    out.a0 += b.fraction * b.upsilon * sig / (den * den);
    out.f0 += b.fraction * hats.mhat0 * b.psi * b.upsilon * b.t / den;
    out.n0 += b.fraction * sig / (den * den);
  }
  return out;
}

}  // namespace

LargeAlphaSolution solve_large_alpha(double lambda1, double tau, double eps_t,
                                     const BlockFeatureModel& model,
                                     const SolverConfig& cfg) {
  if (!(lambda1 > 0.0))
    throw std::invalid_argument("solve_large_alpha: lambda1 must be > 0");
  if (eps_t == 0.0 && tau == 0.0)
    throw std::invalid_argument(
        "solve_large_alpha: scaling assumptions break down when eps_t = tau = "
        "0");

  const double rho_val = model.rho();
  const SolverConfig defaults;
  const bool custom_init = cfg.init.m != defaults.init.m ||
                           cfg.init.q != defaults.init.q ||
                           cfg.init.p != defaults.init.p;
  const double init_m = custom_init ? cfg.init.m : 0.5 * std::sqrt(rho_val);
  const double init_q = custom_init ? cfg.init.q : rho_val;
  const double init_p = custom_init ? cfg.init.p : 1.0;
  double m0 = init_m, q0 = init_q, p0 = init_p;
  double damping = cfg.damping;
  double residual = 0.0;
  // Strong adversarial training can collapse the whole overlap scale while
  // the error-determining ratios stay finite, so convergence is measured
  // relative to each component.
  auto rel = [](double next, double cur) {
    return std::abs(next - cur) / std::max(std::abs(next), 1e-300);
  };
  auto step_residual = [&](double m, double q, double p, ScaledPrior* out) {
    const ScaledHats hats =
        scaled_channel(m, q, p, tau, eps_t, rho_val, cfg.nodes);
    const ScaledPrior next = scaled_prior(hats, lambda1, model);
    if (out) *out = next;
    return std::max({rel(next.m0, m), rel(next.q0, q), rel(next.p0, p)});
  };
  for (int attempt = 0; attempt < 4; ++attempt) {
    double hist[3][3] = {{m0, q0, p0}, {m0, q0, p0}, {m0, q0, p0}};
    int iters = 0;
    for (; iters < cfg.max_iter; ++iters) {
      ScaledPrior next;
      residual = step_residual(m0, q0, p0, &next);
      if (residual < cfg.tol) {
        // Return the pure prior-map image so the closed-form ratio
        // identities hold exactly.
        const ScaledHats h =
            scaled_channel(m0, q0, p0, tau, eps_t, rho_val, cfg.nodes);
        const ScaledPrior pr = scaled_prior(h, lambda1, model);
        LargeAlphaSolution sol;
        sol.state = {pr.m0,   pr.q0,   pr.v0,   pr.p0,  h.mhat0,
                     h.qhat0, h.vhat0, h.phat0, lambda1};
        sol.aux = {pr.a0, pr.f0, pr.n0, rho_val};
        sol.iterations = iters + 1;
        sol.residual = residual;
        return sol;
      }
      m0 = (1.0 - damping) * m0 + damping * next.m0;
      q0 = std::max((1.0 - damping) * q0 + damping * next.q0, 1e-250);
      p0 = std::max((1.0 - damping) * p0 + damping * next.p0, 0.0);
      double* slot = hist[iters % 3];
      slot[0] = m0;
      slot[1] = q0;
      slot[2] = p0;
      if (iters >= 2 && iters % 40 == 0) {
        const double* x0 = hist[(iters - 2) % 3];
        const double* x1 = hist[(iters - 1) % 3];
        const double* x2 = hist[iters % 3];
        auto aitken = [](double a0, double a1, double a2) {
          const double d1 = a1 - a0, d2 = a2 - 2.0 * a1 + a0;
          if (std::abs(d2) < 1e-300) return a2;
          const double acc = a0 - d1 * d1 / d2;
          return std::isfinite(acc) ? acc : a2;
        };
        const double cm = aitken(x0[0], x1[0], x2[0]);
        const double cq = std::max(aitken(x0[1], x1[1], x2[1]), 1e-250);
        const double cp = std::max(aitken(x0[2], x1[2], x2[2]), 0.0);
        if (step_residual(cm, cq, cp, nullptr) < residual) {
          m0 = cm;
          q0 = cq;
          p0 = cp;
        }
      }
    }
    damping *= 0.5;
    m0 = init_m;
    q0 = init_q;
    p0 = init_p;
  }
  throw ConvergenceError("solve_large_alpha: no convergence",
                         Overlaps{m0, q0, 0.0, p0}, residual);
}

PlateauReport plateau_errors(const LargeAlphaSolution& sol,
                             const BlockFeatureModel& model, double tau,
                             double eps_g) {
  (void)model;
  PlateauReport rep;
  const double rho_val = sol.aux.rho;
  rep.alignment_inf =
      sol.state.m0 / std::sqrt((rho_val + tau * tau) * sol.state.q0);
  rep.attack_ratio_inf = std::sqrt(sol.aux.a / sol.state.q0);
  rep.egen_inf =
      generalisation_error(sol.state.m0, sol.state.q0, rho_val, tau);
  rep.ebnd_inf =
      boundary_error(sol.state.m0, sol.state.q0, sol.aux.a, rho_val, tau, eps_g);
  rep.eadv_inf = rep.egen_inf + rep.ebnd_inf;
  return rep;
}

UniversalityTable universality_check(const BlockFeatureModel& model, double tau,
                                     double eps_g, double lambda,
                                     const std::vector<double>& eps_t_list,
                                     const std::vector<double>& alpha_list,
                                     const SolverConfig& cfg) {
  if (model.blocks().size() != 1)
    throw std::invalid_argument(
        "universality_check: proposition covers single-block models only");
  UniversalityTable table;
  table.alphas = alpha_list;
  table.eps_ts = eps_t_list;

  // Warm-start each alpha from the previous fixed point: the iteration's
  // slow mode makes cold starts expensive deep into the large-alpha regime.
  std::vector<double> baseline;
  SolverConfig base_cfg = cfg;
  for (double alpha : alpha_list) {
    ExperimentParams params{alpha, lambda, tau, 0.0, eps_g};
    const FixedPoint fp = solve_fixed_point(params, model, base_cfg);
    base_cfg.init = fp.ov;
    baseline.push_back(adversarial_error(fp.ov.m, fp.ov.q, fp.aux.a,
                                         fp.aux.rho, tau, eps_g));
  }
  for (double eps_t : eps_t_list) {
    std::vector<double> row;
    SolverConfig row_cfg = cfg;
    for (std::size_t j = 0; j < alpha_list.size(); ++j) {
      if (eps_t == 0.0) {
        row.push_back(0.0);
        continue;
      }
      ExperimentParams params{alpha_list[j], lambda, tau, eps_t, eps_g};
      const FixedPoint fp = solve_fixed_point(params, model, row_cfg);
      row_cfg.init = fp.ov;
      const double eadv = adversarial_error(fp.ov.m, fp.ov.q, fp.aux.a,
                                            fp.aux.rho, tau, eps_g);
      row.push_back(std::abs(eadv - baseline[j]));
    }
    // Least-squares slope of log(gap) vs log(alpha).
    double exponent = 0.0;
    int count = 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] <= 0.0) continue;
      const double x = std::log(alpha_list[j]);
      const double y = std::log(row[j]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++count;
    }
    if (count >= 2) exponent = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    table.gaps.push_back(std::move(row));
    table.decay_exponents.push_back(exponent);
  }
  return table;
}

namespace {

PlateauReport rotated_plateau(const BlockFeatureModel& base, double delta1,
                              double varrho, double lambda1, double tau,
                              double eps_g, double eps_t,
                              const SolverConfig& cfg) {
  std::vector<Block> blocks = base.blocks();
  blocks[0].delta += delta1 * varrho;
  blocks[1].delta -= delta1 * varrho;
  if (!(blocks[0].delta > 0.0) || !(blocks[1].delta > 0.0))
    throw std::invalid_argument(
        "defence_rotation_check: perturbation drives a defence weight "
        "nonpositive");
  const BlockFeatureModel rotated = bfm_from_normalized_blocks(blocks);
  const LargeAlphaSolution sol =
      solve_large_alpha(lambda1, tau, eps_t, rotated, cfg);
  return plateau_errors(sol, rotated, tau, eps_g);
}

SolverConfig warmed(const SolverConfig& cfg, const LargeAlphaSolution& base) {
  SolverConfig out = cfg;
  out.init = Overlaps{base.state.m0, base.state.q0, 1.0, base.state.p0};
  return out;
}

}  // namespace

RotationSlopes defence_rotation_check(const BlockFeatureModel& model,
                                      double delta1, double step,
                                      double lambda1, double tau, double eps_g,
                                      double eps_t, const SolverConfig& cfg) {
  if (model.blocks().size() != 2)
    throw std::invalid_argument("defence_rotation_check: model must be a SWFM");
  const Block& b1 = model.blocks()[0];
  const Block& b2 = model.blocks()[1];
  if (!(b1.psi > b2.psi))
    throw std::invalid_argument("defence_rotation_check: requires psi1 > psi2");
  if (!(b2.delta * b1.psi >= b1.delta * b2.psi))
    throw std::invalid_argument(
        "defence_rotation_check: requires Delta2 psi1 >= Delta1 psi2");
  if (std::abs(b1.upsilon - b2.upsilon) > 1e-12)
    throw std::invalid_argument(
        "defence_rotation_check: requires a uniform attack spectrum");

  const LargeAlphaSolution base =
      solve_large_alpha(lambda1, tau, eps_t, model, cfg);
  const SolverConfig wcfg = warmed(cfg, base);
  auto central = [&](double h) {
    const PlateauReport plus =
        rotated_plateau(model, delta1, h, lambda1, tau, eps_g, eps_t, wcfg);
    const PlateauReport minus =
        rotated_plateau(model, delta1, -h, lambda1, tau, eps_g, eps_t, wcfg);
    return std::array<double, 3>{
        (plus.egen_inf - minus.egen_inf) / (2.0 * h),
        (plus.ebnd_inf - minus.ebnd_inf) / (2.0 * h),
        (plus.eadv_inf - minus.eadv_inf) / (2.0 * h)};
  };
  const auto d1 = central(step);
  const auto d2 = central(0.5 * step);

  RotationSlopes out;
  out.egen_slope = (4.0 * d2[0] - d1[0]) / 3.0;
  out.ebnd_slope = (4.0 * d2[1] - d1[1]) / 3.0;
  out.eadv_slope = (4.0 * d2[2] - d1[2]) / 3.0;
  const double theta0 =
      base.state.m0 / std::sqrt(base.aux.rho * base.state.q0);
  const double u0 = std::sqrt(base.aux.a) / std::sqrt(base.state.q0);
  const double lhs =
      eps_g / std::sqrt(2.0) *
      std::erfc(-theta0 * u0 * eps_g / std::sqrt(2.0 - 2.0 * theta0 * theta0));
  const double rhs =
      std::exp(-theta0 * theta0 * u0 * u0 * eps_g * eps_g /
               (2.0 * (1.0 - theta0 * theta0))) /
      (std::sqrt(M_PI) * std::sqrt(1.0 - theta0 * theta0));
  out.improvement_condition = lhs < rhs;
  return out;
}

}  // namespace advse
