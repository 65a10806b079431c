#include "ctscene/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ctscene/io.hpp"
#include "ctscene/rng.hpp"

namespace ctscene {

void OptimizerConfig::validate(int schedule_T) const {
    if (total_iters < 1) {
        throw std::invalid_argument("config: total_iters must be >= 1");
    }
    if (!(n_min >= 1 && n_min < n_max && n_max <= schedule_T)) {
        throw std::invalid_argument("config: require 1 <= n_min < n_max <= T");
    }
    if (t_cut < 1) {
        throw std::invalid_argument("config: t_cut must be >= 1");
    }
    if (n_min - 2 * t_cut < 1) {
        throw std::invalid_argument(
            "config: n_min - 2*t_cut must be >= 1, otherwise s can fall below 1");
    }
    if (n_warm_up < 1) {
        throw std::invalid_argument("config: n_warm_up must be >= 1");
    }
    if (!std::isfinite(eta)) {
        throw std::invalid_argument("config: eta must be finite");
    }
}

TimestepPair sample_timesteps(int iter, const OptimizerConfig& cfg, int schedule_T,
                              std::mt19937_64& rng) {
    if (iter < 1) {
        throw std::invalid_argument("sample_timesteps: iterations start at 1");
    }
    double r = 1.0 - std::min(static_cast<double>(iter) / cfg.n_warm_up, 1.0);
    int t_min = static_cast<int>(cfg.n_min + r * cfg.n_warm_up);
    int t_max = static_cast<int>(cfg.n_max + r * cfg.n_warm_up);
    // the shifted window can poke past the schedule top early on
    t_max = std::min(t_max, schedule_T);
    t_min = std::min(t_min, t_max);

    std::uniform_int_distribution<int> pick_t(t_min, t_max);
    int t = pick_t(rng);
    std::uniform_int_distribution<int> pick_s(t - 2 * cfg.t_cut, t - cfg.t_cut);
    int s = pick_s(rng);
    return {s, t};
}

CtsGradientResult cts_gradient(const Renderer& renderer, const Vec& theta, const Pose& pose,
                               const Vec& eps_fixed, int s, int t, const Condition& cond_y,
                               const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                               const ConsistencyCoeffs& coeffs, bool in_warmup) {
    CtsGradientResult out;
    out.x_pi = renderer.render(theta, pose);
    CtsGradient g =
        cts_image_gradient(out.x_pi, eps_fixed, s, t, cond_y, gm, sched, coeffs, in_warmup);
    out.grad_theta = renderer.vjp(theta, pose, g.grad);
    out.term1 = g.term1;
    out.term2 = g.term2;
    if (!out.grad_theta.allFinite()) {
        throw std::runtime_error("cts_gradient: non-finite gradient at (s=" + std::to_string(s) +
                                 ", t=" + std::to_string(t) + ")");
    }
    return out;
}

void RunReport::write_csv(std::ostream& out) const {
    out << "iter,t,s,term1,term2,grad_norm,mode_dist\n";
    for (const auto& r : records) {
        out << r.iter << ',' << r.t << ',' << r.s << ',' << format_double(r.term1) << ','
            << format_double(r.term2) << ',' << format_double(r.grad_norm) << ','
            << format_double(r.mode_dist) << '\n';
    }
}

nlohmann::json RunReport::summary(const GaussianMixtureOracle& gm) const {
    std::vector<double> theta(final_theta.data(), final_theta.data() + final_theta.size());
    return {
        {"iterations", records.size()},
        {"diverged", diverged},
        {"final_theta", theta},
        {"final_mode_dist", gm.nearest_mode_distance(final_theta)},
        {"eps_hash", eps_hash},
    };
}

RunReport optimize(const Vec& theta0, const OptimizerConfig& cfg, const Condition& cond_y,
                   const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                   const ConsistencyCoeffs& coeffs, const Renderer& renderer, const Pose& pose) {
    cfg.validate(sched.T);
    if (!theta0.allFinite()) {
        throw std::invalid_argument("optimize: theta0 must be finite");
    }

    auto rng = rng_stream(cfg.seed, "optimize");
    std::normal_distribution<double> normal(0.0, 1.0);

    // fixed noise: drawn once, bit-identical for the whole run
    const int image_dim = static_cast<int>(renderer.render(theta0, pose).size());
    Vec eps(image_dim);
    for (int i = 0; i < image_dim; ++i) eps[i] = normal(rng);

    RunReport report;
    report.eps_hash = fnv1a64_bytes(eps.data(), sizeof(double) * eps.size());
    report.records.reserve(cfg.total_iters);

    const int warm_cutoff = cfg.warmup_cutoff();
    Vec theta = theta0;
    for (int iter = 1; iter <= cfg.total_iters; ++iter) {
        auto ts = sample_timesteps(iter, cfg, sched.T, rng);
        bool iter_warm = iter <= warm_cutoff;
        bool t_warm = ts.t > cfg.noise_t_threshold;
        bool noise_on = false;
        switch (cfg.noise_removal) {
            case NoiseRemovalMode::kIterationCutoff: noise_on = iter_warm; break;
            case NoiseRemovalMode::kTimestepThreshold: noise_on = t_warm; break;
            case NoiseRemovalMode::kBoth: noise_on = iter_warm && t_warm; break;
        }

        auto g = cts_gradient(renderer, theta, pose, eps, ts.s, ts.t, cond_y, gm, sched, coeffs,
                              noise_on);
        report.records.push_back({iter, ts.t, ts.s, g.term1, g.term2, g.grad_theta.norm(),
                                  gm.nearest_mode_distance(g.x_pi), noise_on});

        theta -= cfg.eta * g.grad_theta;
        if (theta.norm() > cfg.divergence_norm) {
            report.diverged = true;
            break;
        }
    }
    report.final_theta = theta;
    return report;
}

RunReport optimize(const Vec& theta0, const OptimizerConfig& cfg, const Condition& cond_y,
                   const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                   const ConsistencyCoeffs& coeffs) {
    IdentityRenderer identity;
    return optimize(theta0, cfg, cond_y, gm, sched, coeffs, identity, Pose{});
}

namespace {

bool run_converged(const RunReport& report) {
    if (report.diverged || report.records.empty()) {
        return false;
    }
    // plateau test on the trailing mode distances; quartile averages smooth
    // out the jitter from per-iteration timestep resampling
    size_t n = report.records.size();
    size_t quart = std::max<size_t>(n / 4, 1);
    auto mean_over = [&](size_t from, size_t to) {
        double acc = 0.0;
        for (size_t i = from; i < to; ++i) acc += report.records[i].mode_dist;
        return acc / static_cast<double>(to - from);
    };
    double tail = mean_over(n - quart, n);
    double prev = mean_over(n - 2 * quart, n - quart);
    return std::abs(tail - prev) <= 0.05 * (1.0 + tail);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Theorem2Result theorem2_experiment(const std::vector<int>& gaps, const OptimizerConfig& tmpl,
                                   const Condition& cond_y, const GaussianMixtureOracle& gm,
                                   const DiffusionSchedule& sched, const ConsistencyCoeffs& coeffs,
                                   int n_seeds) {
    if (gaps.empty() || n_seeds < 1) {
        throw std::invalid_argument("theorem2_experiment: need gaps and seeds");
    }
    // start box around the component means
    Vec lo = gm.components.front().mean, hi = gm.components.front().mean;
    for (const auto& c : gm.components) {
        lo = lo.cwiseMin(c.mean);
        hi = hi.cwiseMax(c.mean);
    }
    lo.array() -= 1.0;
    hi.array() += 1.0;

    Theorem2Result result;
    for (int gap : gaps) {
        OptimizerConfig cfg = tmpl;
        cfg.t_cut = gap;
        cfg.n_min = 3 * gap + 1;
        cfg.n_max = std::min(4 * gap, sched.T);
        cfg.validate(sched.T);

        GapResult gr;
        gr.t_cut = gap;
        gr.total = n_seeds;
        gr.converged = 0;
        std::vector<double> errors;
        for (int k = 0; k < n_seeds; ++k) {
            OptimizerConfig run_cfg = cfg;
            run_cfg.seed = tmpl.seed * 1000003ull + static_cast<uint64_t>(k);
            auto rng = rng_stream(run_cfg.seed, "theorem2-theta0");
            std::uniform_real_distribution<double> u(0.0, 1.0);
            Vec theta0(gm.dim);
            for (int d = 0; d < gm.dim; ++d) theta0[d] = lo[d] + (hi[d] - lo[d]) * u(rng);

            auto report = optimize(theta0, run_cfg, cond_y, gm, sched, coeffs);
            if (run_converged(report)) {
                ++gr.converged;
                errors.push_back(gm.nearest_mode_distance(report.final_theta));
            }
        }
        gr.per_seed_error = errors;
        gr.median_error = errors.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : median(errors);
        gr.mean_error = 0.0;
        for (double e : errors) gr.mean_error += e;
        gr.mean_error = errors.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : gr.mean_error / errors.size();
        result.gaps.push_back(std::move(gr));
    }

    // log-log regression of median error against the gap
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& gr : result.gaps) {
        if (!std::isfinite(gr.median_error) || gr.median_error <= 0.0) continue;
        double lx = std::log(gr.t_cut), ly = std::log(gr.median_error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    result.loglog_slope =
        n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : std::numeric_limits<double>::quiet_NaN();
    return result;
}

double layout_loss(const std::array<std::vector<double>, 3>& points,
                   const std::array<AxisInterval, 3>& box) {
    double total = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const auto& pts = points[axis];
        if (pts.empty()) {
            throw std::invalid_argument("layout_loss: empty point set on an axis");
        }
        double mn = *std::min_element(pts.begin(), pts.end());
        double mx = *std::max_element(pts.begin(), pts.end());
        double lo = box[axis].center - box[axis].extent / 2.0;
        double hi = box[axis].center + box[axis].extent / 2.0;
        total += (mn - lo) * (mn - lo) + (mx - hi) * (mx - hi);
    }
    return total;
}

double layout_loss_grad(const std::array<std::vector<double>, 3>& points,
                        const std::array<AxisInterval, 3>& box,
                        std::array<std::vector<double>, 3>& grads) {
    double total = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const auto& pts = points[axis];
        if (pts.empty()) {
            throw std::invalid_argument("layout_loss: empty point set on an axis");
        }
        grads[axis].assign(pts.size(), 0.0);
        size_t i_min = std::min_element(pts.begin(), pts.end()) - pts.begin();
        size_t i_max = std::max_element(pts.begin(), pts.end()) - pts.begin();
        double lo = box[axis].center - box[axis].extent / 2.0;
        double hi = box[axis].center + box[axis].extent / 2.0;
        total += (pts[i_min] - lo) * (pts[i_min] - lo) + (pts[i_max] - hi) * (pts[i_max] - hi);
        grads[axis][i_min] += 2.0 * (pts[i_min] - lo);
        grads[axis][i_max] += 2.0 * (pts[i_max] - hi);
    }
    return total;
}

ScaleNormalLosses scale_and_normal_losses(const std::vector<Eigen::Vector3d>& scales,
                                          const std::vector<double>& alphas,
                                          std::vector<Eigen::Vector3d> normals,
                                          std::vector<Eigen::Vector3d> targets) {
    if (alphas.size() != normals.size() || normals.size() != targets.size()) {
        throw std::invalid_argument("scale_and_normal_losses: alpha/normal/target size mismatch");
    }
    ScaleNormalLosses out{0.0, 0.0};
    if (!scales.empty()) {
        for (const auto& s : scales) out.l_scale += s.maxCoeff();
        out.l_scale /= static_cast<double>(scales.size());
    }
    if (normals.empty()) {
        return out;
    }
    auto renormalize = [](std::vector<Eigen::Vector3d>& vs, const char* what) {
        for (auto& v : vs) {
            double n = v.norm();
            if (std::abs(n - 1.0) > 1e-6) {
                log_warn(std::string(what) + " not unit length, normalizing");
                v /= n;
            }
        }
    };
    renormalize(normals, "normal");
    renormalize(targets, "target normal");

    double transmittance = 1.0;
    double acc = 0.0;
    for (size_t i = 0; i < normals.size(); ++i) {
        double w = alphas[i] * transmittance;
        acc += w * (1.0 - normals[i].dot(targets[i]));
        transmittance *= 1.0 - alphas[i];
    }
    out.l_normal = acc / static_cast<double>(normals.size());
    return out;
}

}  // namespace ctscene
