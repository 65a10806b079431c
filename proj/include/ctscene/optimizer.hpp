#pragma once

#include <array>
#include <iosfwd>
#include <memory>

#include "ctscene/consistency.hpp"

namespace ctscene {

struct Pose {
    int view_id = 0;
};

// Differentiable map from parameters to an image-space vector.  The optimizer
// only ever needs the forward value and a vector-Jacobian product, so any
// renderer (identity, texture field, ...) plugs in through this pair.
class Renderer {
  public:
    virtual ~Renderer() = default;
    virtual Vec render(const Vec& theta, const Pose& pose) const = 0;
    virtual Vec vjp(const Vec& theta, const Pose& pose, const Vec& grad_image) const = 0;
};

class IdentityRenderer : public Renderer {
  public:
    Vec render(const Vec& theta, const Pose&) const override { return theta; }
    Vec vjp(const Vec&, const Pose&, const Vec& grad_image) const override { return grad_image; }
};

enum class NoiseRemovalMode {
    kIterationCutoff,    // noise while iter <= t_warm_up
    kTimestepThreshold,  // noise while t > noise_t_threshold
    kBoth,               // noise only while both triggers agree
};

struct OptimizerConfig {
    int total_iters = 1500;
    // timestep window; n_min must leave room for s >= 1 under the gap rule,
    // so with t_cut = 100 the floor sits at 201 rather than the bare
    // hypothesis floor of 30
    int n_min = 201;
    int n_max = 980;
    int n_warm_up = 500;   // annealing step count shifting the window down
    int t_warm_up = -1;    // warm-up iteration cutoff; -1 = total_iters / 2
    int t_cut = 100;
    double eta = 1e-2;
    uint64_t seed = 0;
    NoiseRemovalMode noise_removal = NoiseRemovalMode::kIterationCutoff;
    int noise_t_threshold = 500;
    double divergence_norm = 1e6;

    int warmup_cutoff() const { return t_warm_up < 0 ? total_iters / 2 : t_warm_up; }
    void validate(int schedule_T) const;  // throws std::invalid_argument
};

// Annealed window sampling: r = 1 - min(iter/n_warm_up, 1), window
// [n_min + r n_warm_up, n_max + r n_warm_up] clamped to the schedule top,
// then s uniform in [t - 2 t_cut, t - t_cut].
struct TimestepPair {
    int s;
    int t;
};
TimestepPair sample_timesteps(int iter, const OptimizerConfig& cfg, int schedule_T,
                              std::mt19937_64& rng);

struct CtsGradientResult {
    Vec grad_theta;
    Vec x_pi;
    double term1;
    double term2;
};

// Image-space CTS gradient chained through the renderer's VJP only; the
// oracle outputs enter as constants.
CtsGradientResult cts_gradient(const Renderer& renderer, const Vec& theta, const Pose& pose,
                               const Vec& eps_fixed, int s, int t, const Condition& cond_y,
                               const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                               const ConsistencyCoeffs& coeffs, bool in_warmup);

struct IterationRecord {
    int iter;
    int t;
    int s;
    double term1;
    double term2;
    double grad_norm;
    double mode_dist;
    bool noise_on;
};

struct RunReport {
    std::vector<IterationRecord> records;
    Vec final_theta;
    bool diverged = false;
    uint64_t eps_hash = 0;  // hash of the fixed noise draw

    void write_csv(std::ostream& out) const;
    nlohmann::json summary(const GaussianMixtureOracle& gm) const;
};

// Gradient descent on the CTS objective with one fixed noise draw per run.
// The published update reads theta <- theta + eta grad; the convergence
// argument presupposes loss minimization, so the step implemented here is
// theta <- theta - eta * grad with grad oriented loss-increasing.
RunReport optimize(const Vec& theta0, const OptimizerConfig& cfg, const Condition& cond_y,
                   const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                   const ConsistencyCoeffs& coeffs, const Renderer& renderer, const Pose& pose);

RunReport optimize(const Vec& theta0, const OptimizerConfig& cfg, const Condition& cond_y,
                   const GaussianMixtureOracle& gm, const DiffusionSchedule& sched,
                   const ConsistencyCoeffs& coeffs);

// Convergence-vs-gap sweep: for each gap the timestep window is rescaled to
// [3 gap + 1, 4 gap] with t_cut = gap, so every timestep in play (including
// the smallest s) lives at scale gap; the recorded distance-to-mode then
// tracks the gap to first order.
struct GapResult {
    int t_cut;
    double median_error;
    double mean_error;
    int converged;
    int total;
    std::vector<double> per_seed_error;  // converged seeds only
};

struct Theorem2Result {
    std::vector<GapResult> gaps;
    double loglog_slope;
};

Theorem2Result theorem2_experiment(const std::vector<int>& gaps, const OptimizerConfig& tmpl,
                                   const Condition& cond_y, const GaussianMixtureOracle& gm,
                                   const DiffusionSchedule& sched, const ConsistencyCoeffs& coeffs,
                                   int n_seeds);

// Bounding-box alignment loss: per axis, squared distance of the extremal
// points to the box faces.  Subgradients attach to the extremal point only
// (first occurrence on ties).
struct AxisInterval {
    double center;
    double extent;
};

double layout_loss(const std::array<std::vector<double>, 3>& points,
                   const std::array<AxisInterval, 3>& box);

double layout_loss_grad(const std::array<std::vector<double>, 3>& points,
                        const std::array<AxisInterval, 3>& box,
                        std::array<std::vector<double>, 3>& grads);

struct ScaleNormalLosses {
    double l_scale;   // mean of the largest scale component per primitive
    double l_normal;  // opacity-composited normal alignment penalty
};

// w_i = alpha_i * prod_{j<i} (1 - alpha_j), standard front-to-back compositing.
// Non-unit normals are normalized with a warning rather than rejected.
ScaleNormalLosses scale_and_normal_losses(const std::vector<Eigen::Vector3d>& scales,
                                          const std::vector<double>& alphas,
                                          std::vector<Eigen::Vector3d> normals,
                                          std::vector<Eigen::Vector3d> targets);

}  // namespace ctscene
