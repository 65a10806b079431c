#include "ctscene/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctscene {

double ConsistencyCoeffs::c_skip(double t) const {
    double u = t / scale;
    double s2 = sigma_param * sigma_param;
    return s2 / (u * u + s2);
}

double ConsistencyCoeffs::c_out(double t) const {
    double u = t / scale;
    double s2 = sigma_param * sigma_param;
    return u / std::sqrt(u * u + s2);
}

double ConsistencyCoeffs::min_t_below(double threshold) const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("min_t_below: threshold must lie in (0, 1)");
    }
    double lo = 0.0, hi = 1.0;
    while (c_skip(hi) > threshold) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (c_skip(mid) <= threshold) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

CtsWeights cts_weights(double s, double t, const ConsistencyCoeffs& coeffs,
                       const DiffusionSchedule& sched) {
    auto cs = sched.at(s);
    auto ct = sched.at(t);
    CtsWeights w;
    w.w1 = coeffs.c_out(t) * ct.sigma / ct.alpha;
    w.w2 = (coeffs.c_out(t) - coeffs.c_out(s)) * cs.sigma / cs.alpha;
    return w;
}

Vec consistency_fn(const Vec& x, double t, const Condition& cond, const GaussianMixtureOracle& gm,
                   const DiffusionSchedule& sched, const ConsistencyCoeffs& coeffs) {
    if (t == 0.0) {
        return x;  // boundary condition f(x, 0) = x
    }
    auto c = sched.at(t);
    Vec eps = eps_oracle_at(gm, x, c.alpha, c.sigma, cond);
    Vec data_pred = (x - c.sigma * eps) / c.alpha;
    return coeffs.c_skip(t) * x + coeffs.c_out(t) * data_pred;
}

namespace {

void check_pair(int s, int t) {
    if (s < 1) {
        throw std::invalid_argument("require s >= 1");
    }
    if (t <= s) {
        throw std::invalid_argument("require t > s (degenerate gaps are rejected)");
    }
}

}  // namespace

double consistency_loss(const Vec& x_pi, const Vec& eps, int s, int t, const Condition& cond,
                        const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                        const ConsistencyCoeffs& coeffs) {
    check_pair(s, t);
    Vec x_s = add_noise(x_pi, s, eps, sched);
    Vec x_st = dpm_step(x_s, s, t, cond, gm, sched);
    Vec fs = consistency_fn(x_s, s, cond, gm, sched, coeffs);
    Vec ft = consistency_fn(x_st, t, cond, gm, sched, coeffs);
    return (fs - ft).squaredNorm();
}

CtsLossResult cts_loss(const Vec& x_pi, const Vec& eps, int s, int t, const Condition& cond_y,
                       const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                       const ConsistencyCoeffs& coeffs) {
    check_pair(s, t);
    Vec x_s = add_noise(x_pi, s, eps, sched);
    Vec x_st = dpm_step(x_s, s, t, Condition::all(), gm, sched);
    Vec eps_t_y = eps_oracle(gm, x_st, t, cond_y, sched);
    Vec eps_s_0 = eps_oracle(gm, x_s, s, Condition::all(), sched);
    auto w = cts_weights(s, t, coeffs, sched);
    CtsLossResult r;
    r.term1 = (w.w1 * (eps_t_y - eps_s_0)).squaredNorm();
    r.term2 = (w.w2 * (eps_s_0 - eps)).squaredNorm();
    r.loss = r.term1 + r.term2;
    return r;
}

DecompositionReport theorem1_decomposition(const Vec& x_pi, const Vec& eps, int s, int t,
                                           const Condition& cond, const GaussianMixtureOracle& gm,
                                           const DiffusionSchedule& sched,
                                           const ConsistencyCoeffs& coeffs) {
    check_pair(s, t);
    const int dt = t - s;
    // reference flow fine enough that its own error sits far below the
    // single-step error being isolated
    const int n_sub = std::clamp(16 * dt, 256, 4096);

    Vec x_s = add_noise(x_pi, s, eps, sched);
    Vec x_ref = integrate_ode(gm, x_s, s, t, n_sub, cond, sched);

    Vec fs = consistency_fn(x_s, s, cond, gm, sched, coeffs);
    Vec ft = consistency_fn(x_ref, t, cond, gm, sched, coeffs);
    Vec eps_s = eps_oracle(gm, x_s, s, cond, sched);
    Vec eps_t = eps_oracle(gm, x_ref, t, cond, sched);
    auto w = cts_weights(s, t, coeffs, sched);

    Vec w1_term = w.w1 * (eps_t - eps_s);
    Vec w2_term = w.w2 * (eps_s - eps);
    Vec r = (fs - ft) - w1_term - w2_term;

    // boundary-coefficient mass, computable exactly from the states
    Vec leftover = coeffs.c_skip(s) * x_s - coeffs.c_skip(t) * x_ref +
                   (coeffs.c_out(s) - coeffs.c_out(t)) * x_pi;

    DecompositionReport rep;
    rep.dt = dt;
    rep.residual_norm = r.norm();
    rep.w1_term_norm = w1_term.norm();
    rep.w2_term_norm = w2_term.norm();
    rep.leftover_norm = leftover.norm();
    rep.solver_err_norm = (r - leftover).norm();
    rep.m_bound_check = rep.leftover_norm <= 1e-7 * (1.0 + x_pi.norm() + eps.norm());
    rep.hypothesis_ok = s >= 30;
    return rep;
}

CtsGradient cts_image_gradient(const Vec& x_pi, const Vec& eps, double s, double t,
                               const Condition& cond_y, const GaussianMixtureOracle& gm,
                               const DiffusionSchedule& sched, const ConsistencyCoeffs& coeffs,
                               bool noise_on) {
    if (t <= s) {
        throw std::invalid_argument("cts_image_gradient: require t > s");
    }
    auto cs = sched.at(s);
    Vec x_s = noise_on ? Vec(cs.alpha * x_pi + cs.sigma * eps) : x_pi;
    Vec x_st = dpm_step(x_s, s, t, Condition::all(), gm, sched);
    Vec eps_t_y = eps_oracle(gm, x_st, t, cond_y, sched);
    Vec eps_s_0 = eps_oracle(gm, x_s, s, Condition::all(), sched);
    auto w = cts_weights(s, t, coeffs, sched);

    CtsGradient g;
    g.grad = w.w1 * (eps_t_y - eps_s_0);
    g.term1 = g.grad.squaredNorm();
    g.term2 = 0.0;
    if (noise_on) {
        Vec eps_s_y = eps_oracle(gm, x_s, s, cond_y, sched);
        Vec warm = w.w2 * (eps_s_y - eps);
        g.grad += warm;
        g.term2 = warm.squaredNorm();
    }
    return g;
}

SpecialCaseLosses special_case_losses(const Vec& x_pi, const Vec& eps, int s, int t,
                                      const Condition& cond, const GaussianMixtureOracle& gm,
                                      const DiffusionSchedule& sched,
                                      const ConsistencyCoeffs& coeffs) {
    check_pair(s, t);
    Vec x_s = add_noise(x_pi, s, eps, sched);
    Vec x_st = dpm_step(x_s, s, t, Condition::all(), gm, sched);
    auto w = cts_weights(s, t, coeffs, sched);

    SpecialCaseLosses out;
    out.dreamlcm_grad = w.w2 * (eps_oracle(gm, x_st, t, cond, sched) - eps);
    out.vividdreamer_loss =
        (x_pi - consistency_fn(x_s, s, cond, gm, sched, coeffs)).squaredNorm();
    out.cts_grad = cts_image_gradient(x_pi, eps, s, t, cond, gm, sched, coeffs, true).grad;
    return out;
}

}  // namespace ctscene
