#include "advse/se.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "advse/channel.hpp"
#include "advse/quadrature.hpp"

namespace advse {

namespace {

constexpr double kPFloor = 1e-12;
constexpr double kVarFloor = 1e-14;

// Integrand of the four hat moments at a given xi, already summed over
// y in {-1, +1}. Components: (dZ0 * fg, Z0 * fg^2, Z0 * dfg, y Z0 * fg).
std::array<double, 4> hat_integrand(double xi, double teacher_slope,
                                    double teacher_var, double sq, double v,
                                    double p, double eps_t,
                                    const ProbitChannel& channel) {
  std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
  const double omega_teacher = teacher_slope * xi;
  const double omega_student = sq * xi;
  for (int y : {-1, 1}) {
    const double w0 = z0(y, omega_teacher, teacher_var, channel);
    const double dw0 = dz0_domega(y, omega_teacher, teacher_var, channel);
    const double f = fg(y, omega_student, v, p, eps_t);
    const double df = dfg_domega(y, omega_student, v, p, eps_t);
    out[0] += dw0 * f;
    out[1] += w0 * f * f;
    out[2] += w0 * df;
    out[3] += y * w0 * f;
  }
  return out;
}

std::array<double, 4> gh_moments(int nodes, double teacher_slope,
                                 double teacher_var, double sq, double v,
                                 double p, double eps_t,
                                 const ProbitChannel& channel) {
  const GaussHermiteRule& rule = gauss_hermite(nodes);
  std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const auto val = hat_integrand(rule.nodes[i], teacher_slope, teacher_var,
                                   sq, v, p, eps_t, channel);
    for (int k = 0; k < 4; ++k) acc[k] += rule.weights[i] * val[k];
  }
  return acc;
}

}  // namespace

ConjugateOverlaps channel_update(const Overlaps& ov,
                                 const ExperimentParams& params,
                                 const BlockFeatureModel& model, int nodes) {
  if (!(ov.q > 0.0)) throw std::invalid_argument("channel_update: q must be > 0");
  if (!(ov.v > 0.0)) throw std::invalid_argument("channel_update: V must be > 0");

  const double r = model.rho();
  const double sq = std::sqrt(ov.q);
  const double teacher_slope = ov.m / sq;
  const double teacher_var = std::max(r - ov.m * ov.m / ov.q, kVarFloor);
  const ProbitChannel channel{params.tau};
  const double p_eff = std::max(ov.p, kPFloor);

  // The Z0 transition has width sqrt(Veff + tau^2) sqrt(q) / m in xi and
  // the proximal response has width ~ (4 + V) / sqrt(q); the Hermite rule
  // only resolves features wider than a few node spacings. Degenerate
  // regimes (alignment near one, large q) go to adaptive quadrature.
  const double spacing = M_PI / std::sqrt(2.0 * nodes);
  const double w_z0 =
      std::abs(teacher_slope) > 0.0
          ? std::sqrt(teacher_var + channel.tau * channel.tau) /
                std::abs(teacher_slope)
          : 1e30;
  const double w_fg = (4.0 + ov.v) / sq;
  std::array<double, 4> moments;
  if (std::min(w_z0, w_fg) > 5.0 * spacing) {
    moments = gh_moments(nodes, teacher_slope, teacher_var, sq, ov.v, p_eff,
                         params.eps_t, channel);
  } else {
    auto f = [&](double xi) {
      auto val = hat_integrand(xi, teacher_slope, teacher_var, sq, ov.v, p_eff,
                               params.eps_t, channel);
      const double pdf = gauss_pdf(xi);
      for (int k = 0; k < 4; ++k) val[k] *= pdf;
      return val;
    };
    moments = integrate_adaptive4(f, -10.0, 10.0, 1e-11);
  }

  ConjugateOverlaps hat;
  hat.mhat = params.alpha * moments[0];
  hat.qhat = params.alpha * moments[1];
  hat.vhat = -params.alpha * moments[2];
  hat.phat = params.eps_t > 0.0 ? params.alpha * params.eps_t * moments[3] /
                                      std::sqrt(p_eff)
                                : 0.0;
  return hat;
}

Overlaps prior_update(const ConjugateOverlaps& hat, double lambda,
                      const BlockFeatureModel& model) {
  Overlaps out{0.0, 0.0, 0.0, 0.0};
  for (const Block& b : model.blocks()) {
    const double den = lambda + hat.vhat * b.psi + hat.phat * b.delta;
    if (!(den > 0.0))
      throw std::runtime_error("prior_update: nonpositive block denominator");
    const double signal = hat.mhat * hat.mhat * b.psi * b.psi * b.t;
    const double noise = hat.qhat * b.psi;
    out.m += b.fraction * hat.mhat * b.psi * b.psi * b.t / den;
    out.q += b.fraction * (signal + noise) * b.psi / (den * den);
    out.v += b.fraction * b.psi / den;
    out.p += b.fraction * b.delta * (signal + noise) / (den * den);
  }
  return out;
}

AuxOverlaps aux_overlaps(const ConjugateOverlaps& hat, double lambda,
                         const BlockFeatureModel& model) {
  AuxOverlaps aux;
  aux.rho = model.rho();
  for (const Block& b : model.blocks()) {
    const double den = lambda + hat.vhat * b.psi + hat.phat * b.delta;
    if (!(den > 0.0))
      throw std::runtime_error("aux_overlaps: nonpositive block denominator");
    const double signal = hat.mhat * hat.mhat * b.psi * b.psi * b.t;
    const double noise = hat.qhat * b.psi;
    aux.a += b.fraction * b.upsilon * (signal + noise) / (den * den);
    aux.f += b.fraction * hat.mhat * b.psi * b.upsilon * b.t / den;
    aux.n += b.fraction * (signal + noise) / (den * den);
  }
  return aux;
}

FixedPoint solve_fixed_point(const ExperimentParams& params,
                             const BlockFeatureModel& model,
                             const SolverConfig& cfg) {
  if (!(params.alpha > 0.0))
    throw std::invalid_argument("solve_fixed_point: alpha must be > 0");
  if (!(params.lambda > 0.0))
    throw std::invalid_argument("solve_fixed_point: lambda must be > 0");

  double damping = cfg.damping;
  Overlaps ov = cfg.init;
  ConvergenceError last_error("unset", ov, 0.0);

  auto update_residual = [&](const Overlaps& state, Overlaps* next_out) {
    const ConjugateOverlaps hat = channel_update(state, params, model,
                                                 cfg.nodes);
    const Overlaps next = prior_update(hat, params.lambda, model);
    if (next_out) *next_out = next;
    return std::max({std::abs(next.m - state.m), std::abs(next.q - state.q),
                     std::abs(next.v - state.v), std::abs(next.p - state.p)});
  };

  for (int attempt = 0; attempt < 4; ++attempt) {
    ov = cfg.init;
    Overlaps hist[3] = {ov, ov, ov};
    int iters = 0;
    double residual = 0.0;
    bool ok = false;
    for (; iters < cfg.max_iter; ++iters) {
      Overlaps next;
      residual = update_residual(ov, &next);
      if (residual < cfg.tol) {
        ok = true;
        break;
      }
      ov.m = (1.0 - damping) * ov.m + damping * next.m;
      ov.q = (1.0 - damping) * ov.q + damping * next.q;
      ov.v = (1.0 - damping) * ov.v + damping * next.v;
      ov.p = (1.0 - damping) * ov.p + damping * next.p;
      ov.q = std::max(ov.q, kVarFloor);
      ov.v = std::max(ov.v, kVarFloor);
      ov.p = std::max(ov.p, 0.0);

      hist[iters % 3] = ov;
      // A single slow linear mode dominates in the large-alpha regime;
      // componentwise Aitken extrapolation from three consecutive iterates
      // removes it. Accepted only when it actually reduces the residual.
      if (iters >= 2 && iters % 40 == 0) {
        const Overlaps& x0 = hist[(iters - 2) % 3];
        const Overlaps& x1 = hist[(iters - 1) % 3];
        const Overlaps& x2 = hist[iters % 3];
        auto aitken = [](double a0, double a1, double a2) {
          const double d1 = a1 - a0, d2 = a2 - 2.0 * a1 + a0;
          if (std::abs(d2) < 1e-300) return a2;
          const double acc = a0 - d1 * d1 / d2;
          return std::isfinite(acc) ? acc : a2;
        };
        Overlaps cand{aitken(x0.m, x1.m, x2.m), aitken(x0.q, x1.q, x2.q),
                      aitken(x0.v, x1.v, x2.v), aitken(x0.p, x1.p, x2.p)};
        cand.q = std::max(cand.q, kVarFloor);
        cand.v = std::max(cand.v, kVarFloor);
        cand.p = std::max(cand.p, 0.0);
        const double cand_res = update_residual(cand, nullptr);
        if (cand_res < residual) ov = cand;
      }
    }
    if (ok) {
      FixedPoint fp;
      fp.ov = ov;
      fp.hat = channel_update(ov, params, model, cfg.nodes);
      fp.aux = aux_overlaps(fp.hat, params.lambda, model);
      fp.iterations = iters + 1;
      fp.residual = residual;
      return fp;
    }
    last_error = ConvergenceError(
        "solve_fixed_point: no convergence after " +
            std::to_string(cfg.max_iter) + " iterations (damping " +
            std::to_string(damping) + ", residual " + std::to_string(residual) +
            ")",
        ov, residual);
    damping *= 0.5;
  }
  throw last_error;
}

}  // namespace advse
