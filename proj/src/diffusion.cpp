#include "ctscene/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace ctscene {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dim(const Vec& x, int dim, const char* what) {
    if (x.size() != dim) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

}  // namespace

DiffusionSchedule::Coeffs DiffusionSchedule::at(double t) const {
    if (!valid_index(t)) {
        throw std::invalid_argument("timestep out of range [0, T]");
    }
    double r = std::round(t);
    if (std::abs(t - r) < 1e-9) {
        int i = static_cast<int>(r);
        return {alpha[i], sigma[i], lambda[i]};
    }
    if (t < 1.0) {
        throw std::invalid_argument("fractional timesteps below 1 are undefined (lambda is infinite at 0)");
    }
    int lo = static_cast<int>(std::floor(t));
    int hi = lo + 1;
    double w = t - lo;
    double lam = (1.0 - w) * lambda[lo] + w * lambda[hi];
    // reconstruct (alpha, sigma) on the VP circle from lambda
    double a = 1.0 / std::sqrt(1.0 + std::exp(-2.0 * lam));
    double s = a * std::exp(-lam);
    return {a, s, lam};
}

DiffusionSchedule build_schedule(int T, double beta_min, double beta_max) {
    if (T < 2) {
        throw std::invalid_argument("build_schedule: T must be >= 2");
    }
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0)) {
        throw std::invalid_argument("build_schedule: require 0 < beta_min < beta_max < 1");
    }
    DiffusionSchedule sched;
    sched.T = T;
    sched.alpha.resize(T + 1);
    sched.sigma.resize(T + 1);
    sched.lambda.resize(T + 1);
    sched.alpha[0] = 1.0;
    sched.sigma[0] = 0.0;
    sched.lambda[0] = kInf;

    const double sq0 = std::sqrt(beta_min);
    const double sq1 = std::sqrt(beta_max);
    double log_alpha_bar = 0.0;
    for (int i = 1; i <= T; ++i) {
        double b = sq0 + (sq1 - sq0) * static_cast<double>(i - 1) / static_cast<double>(T - 1);
        double beta = b * b;
        log_alpha_bar += std::log1p(-beta);
        double alpha_bar = std::exp(log_alpha_bar);
        sched.alpha[i] = std::sqrt(alpha_bar);
        sched.sigma[i] = std::sqrt(1.0 - alpha_bar);
        sched.lambda[i] = std::log(sched.alpha[i] / sched.sigma[i]);
    }
    return sched;
}

Condition Condition::subset(std::vector<int> indices) {
    if (indices.empty()) {
        throw std::invalid_argument("Condition::subset: index set must be non-empty");
    }
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    Condition c;
    c.subset_ = std::move(indices);
    return c;
}

const std::vector<int>& Condition::indices() const {
    static const std::vector<int> empty;
    return subset_ ? *subset_ : empty;
}

void Condition::check_against(int component_count) const {
    if (!subset_) {
        return;
    }
    for (int i : *subset_) {
        if (i < 0 || i >= component_count) {
            throw std::invalid_argument("Condition: component index out of range");
        }
    }
}

GaussianMixtureOracle::GaussianMixtureOracle(std::vector<Component> comps)
    : components(std::move(comps)) {
    if (components.empty()) {
        throw std::invalid_argument("GaussianMixtureOracle: need at least one component");
    }
    dim = static_cast<int>(components.front().mean.size());
    double total = 0.0;
    for (const auto& c : components) {
        if (c.weight < 0.0) {
            throw std::invalid_argument("GaussianMixtureOracle: negative weight");
        }
        if (c.mean.size() != dim || c.var.size() != dim) {
            throw std::invalid_argument("GaussianMixtureOracle: inconsistent dimensions");
        }
        if ((c.var.array() < 0.0).any()) {
            throw std::invalid_argument("GaussianMixtureOracle: negative variance");
        }
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("GaussianMixtureOracle: weights must sum to 1 (got " +
                                    std::to_string(total) + ")");
    }
}

GaussianMixtureOracle GaussianMixtureOracle::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("components")) {
        throw std::invalid_argument("oracle json: expected {\"dim\", \"components\"}");
    }
    int dim = j.at("dim").get<int>();
    std::vector<Component> comps;
    for (const auto& cj : j.at("components")) {
        Component c;
        c.weight = cj.at("weight").get<double>();
        auto mean = cj.at("mean").get<std::vector<double>>();
        auto var = cj.at("var").get<std::vector<double>>();
        if (static_cast<int>(mean.size()) != dim || static_cast<int>(var.size()) != dim) {
            throw std::invalid_argument("oracle json: component dim mismatch");
        }
        c.mean = Eigen::Map<Vec>(mean.data(), dim);
        c.var = Eigen::Map<Vec>(var.data(), dim);
        comps.push_back(std::move(c));
    }
    return GaussianMixtureOracle(std::move(comps));
}

nlohmann::json GaussianMixtureOracle::to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : components) {
        comps.push_back({
            {"weight", c.weight},
            {"mean", std::vector<double>(c.mean.data(), c.mean.data() + dim)},
            {"var", std::vector<double>(c.var.data(), c.var.data() + dim)},
        });
    }
    return {{"dim", dim}, {"components", comps}};
}

namespace {

// log responsibilities + log density in one pass, all in log space
struct MixtureEval {
    double log_density;
    std::vector<double> log_resp;   // normalized
    std::vector<int> active;        // component indices under the condition
};

MixtureEval eval_mixture(const GaussianMixtureOracle& gm, const Vec& x, double alpha_t,
                         double sigma_t, const Condition& cond) {
    cond.check_against(static_cast<int>(gm.components.size()));
    MixtureEval ev;
    if (cond.unconditional()) {
        ev.active.resize(gm.components.size());
        for (size_t i = 0; i < gm.components.size(); ++i) ev.active[i] = static_cast<int>(i);
    } else {
        ev.active = cond.indices();
    }

    const double s2 = sigma_t * sigma_t;
    const double a2 = alpha_t * alpha_t;
    double w_total = 0.0;
    for (int k : ev.active) w_total += gm.components[k].weight;
    if (w_total <= 0.0) {
        throw std::invalid_argument("condition selects zero total weight");
    }

    ev.log_resp.resize(ev.active.size());
    double max_log = -kInf;
    for (size_t i = 0; i < ev.active.size(); ++i) {
        const auto& c = gm.components[ev.active[i]];
        double lq = std::log(c.weight / w_total);
        for (int d = 0; d < gm.dim; ++d) {
            double v = a2 * c.var[d] + s2;
            double r = x[d] - alpha_t * c.mean[d];
            lq += -0.5 * (r * r / v + std::log(2.0 * M_PI * v));
        }
        ev.log_resp[i] = lq;
        max_log = std::max(max_log, lq);
    }
    double sum = 0.0;
    for (double lq : ev.log_resp) sum += std::exp(lq - max_log);
    double lse = max_log + std::log(sum);
    for (double& lq : ev.log_resp) lq -= lse;
    ev.log_density = lse;
    return ev;
}

}  // namespace

double GaussianMixtureOracle::log_density(const Vec& x, double alpha_t, double sigma_t,
                                          const Condition& cond) const {
    check_dim(x, dim, "log_density");
    return eval_mixture(*this, x, alpha_t, sigma_t, cond).log_density;
}

double GaussianMixtureOracle::nearest_mode_distance(const Vec& x) const {
    check_dim(x, dim, "nearest_mode_distance");
    double best = kInf;
    for (const auto& c : components) {
        best = std::min(best, (x - c.mean).norm());
    }
    return best;
}

Vec GaussianMixtureOracle::sample(std::mt19937_64& rng, const Condition& cond) const {
    cond.check_against(static_cast<int>(components.size()));
    std::vector<int> active;
    if (cond.unconditional()) {
        active.resize(components.size());
        for (size_t i = 0; i < components.size(); ++i) active[i] = static_cast<int>(i);
    } else {
        active = cond.indices();
    }
    double w_total = 0.0;
    for (int k : active) w_total += components[k].weight;
    std::uniform_real_distribution<double> u(0.0, w_total);
    double pick = u(rng);
    int chosen = active.back();
    for (int k : active) {
        pick -= components[k].weight;
        if (pick <= 0.0) {
            chosen = k;
            break;
        }
    }
    std::normal_distribution<double> n(0.0, 1.0);
    Vec x(dim);
    for (int d = 0; d < dim; ++d) {
        x[d] = components[chosen].mean[d] + std::sqrt(components[chosen].var[d]) * n(rng);
    }
    return x;
}

Vec add_noise(const Vec& x0, int t, const Vec& eps, const DiffusionSchedule& sched) {
    if (t < 0 || t > sched.T) {
        throw std::invalid_argument("add_noise: t out of range");
    }
    if (x0.size() != eps.size()) {
        throw std::invalid_argument("add_noise: x0/eps dimension mismatch");
    }
    return sched.alpha[t] * x0 + sched.sigma[t] * eps;
}

Vec eps_oracle_at(const GaussianMixtureOracle& gm, const Vec& x, double alpha_t, double sigma_t,
                  const Condition& cond) {
    check_dim(x, gm.dim, "eps_oracle");
    if (!(sigma_t > 0.0)) {
        throw std::invalid_argument("eps_oracle: sigma_t = 0 (t = 0) is a singularity");
    }
    MixtureEval ev = eval_mixture(gm, x, alpha_t, sigma_t, cond);
    // grad log p = sum_k resp_k * (-(x - alpha mu_k) / v_k);  eps = -sigma * grad log p
    Vec eps = Vec::Zero(gm.dim);
    const double a2 = alpha_t * alpha_t;
    const double s2 = sigma_t * sigma_t;
    for (size_t i = 0; i < ev.active.size(); ++i) {
        const auto& c = gm.components[ev.active[i]];
        double r = std::exp(ev.log_resp[i]);
        for (int d = 0; d < gm.dim; ++d) {
            double v = a2 * c.var[d] + s2;
            eps[d] += r * (x[d] - alpha_t * c.mean[d]) / v;
        }
    }
    return sigma_t * eps;
}

Vec eps_oracle(const GaussianMixtureOracle& gm, const Vec& x, double t, const Condition& cond,
               const DiffusionSchedule& sched) {
    if (t < 1.0 || t > sched.T) {
        throw std::invalid_argument("eps_oracle: t must be in [1, T]");
    }
    auto c = sched.at(t);
    return eps_oracle_at(gm, x, c.alpha, c.sigma, cond);
}

Vec eps_oracle_guided(const GaussianMixtureOracle& gm, const Vec& x, double t,
                      const Condition& cond_y, double omega, const DiffusionSchedule& sched) {
    if (omega == 1.0) {
        return eps_oracle(gm, x, t, cond_y, sched);
    }
    Vec e0 = eps_oracle(gm, x, t, Condition::all(), sched);
    Vec ey = eps_oracle(gm, x, t, cond_y, sched);
    return e0 + omega * (ey - e0);
}

Vec dpm_step(const Vec& x, double s, double t, const Condition& cond,
             const GaussianMixtureOracle& gm, const DiffusionSchedule& sched) {
    if (s < 1.0 || s > sched.T) {
        throw std::invalid_argument("dpm_step: s must be in [1, T]");
    }
    if (t < 0.0 || t > sched.T) {
        throw std::invalid_argument("dpm_step: t out of range");
    }
    auto cs = sched.at(s);
    auto ct = sched.at(t);
    Vec eps = eps_oracle_at(gm, x, cs.alpha, cs.sigma, cond);
    double ratio = ct.alpha / cs.alpha;
    return ratio * x - (ratio * cs.sigma - ct.sigma) * eps;
}

Vec data_predictor(const Vec& x, double s, const Condition& cond, const GaussianMixtureOracle& gm,
                   const DiffusionSchedule& sched) {
    return dpm_step(x, s, 0.0, cond, gm, sched);
}

Vec integrate_ode(const GaussianMixtureOracle& gm, const Vec& x, double t_from, double t_to,
                  int n_steps, const Condition& cond, const DiffusionSchedule& sched) {
    if (n_steps < 1) {
        throw std::invalid_argument("integrate_ode: n_steps must be >= 1");
    }
    if (t_from < 1.0 || t_from > sched.T) {
        throw std::invalid_argument("integrate_ode: t_from must be in [1, T]");
    }
    bool to_zero = t_to < 1.0;
    if (to_zero && t_to != 0.0) {
        throw std::invalid_argument("integrate_ode: t_to must be 0 or in [1, T]");
    }
    double t_stop = to_zero ? 1.0 : t_to;

    auto cf = sched.at(t_from);
    auto cl = sched.at(t_stop);
    Vec cur = x;
    double a_cur = cf.alpha, s_cur = cf.sigma;
    if (t_from != t_stop) {
        // substeps uniform in lambda; the step update only needs (alpha, sigma)
        for (int i = 1; i <= n_steps; ++i) {
            double lam = cf.lambda + (cl.lambda - cf.lambda) * static_cast<double>(i) / n_steps;
            double a_next = 1.0 / std::sqrt(1.0 + std::exp(-2.0 * lam));
            double s_next = a_next * std::exp(-lam);
            Vec eps = eps_oracle_at(gm, cur, a_cur, s_cur, cond);
            double ratio = a_next / a_cur;
            cur = ratio * cur - (ratio * s_cur - s_next) * eps;
            a_cur = a_next;
            s_cur = s_next;
        }
    }
    if (to_zero) {
        // final exact-form hop to the clean sample
        Vec eps = eps_oracle_at(gm, cur, a_cur, s_cur, cond);
        cur = (cur - s_cur * eps) / a_cur;
    }
    return cur;
}

}  // namespace ctscene
