#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include <json.hpp>

namespace ctscene {

using Vec = Eigen::VectorXd;

// Discrete variance-preserving schedule: alpha[t]^2 + sigma[t]^2 = 1,
// lambda[t] = log(alpha[t]/sigma[t]).  Index 0 is the clean convention
// (alpha=1, sigma=0, lambda=+inf).  Fractional times in [1, T] are defined
// by linear interpolation of lambda.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> alpha;
    std::vector<double> sigma;
    std::vector<double> lambda;

    struct Coeffs {
        double alpha;
        double sigma;
        double lambda;
    };

    Coeffs at(double t) const;
    bool valid_index(double t) const { return t >= 0.0 && t <= static_cast<double>(T); }
};

// Scaled-linear betas between [beta_min, beta_max], the convention latent
// diffusion / LCM checkpoints are trained with.
DiffusionSchedule build_schedule(int T, double beta_min, double beta_max);

// Conditioning selects a sub-mixture of the oracle; the empty condition uses
// every component.
class Condition {
  public:
    Condition() = default;
    static Condition all() { return Condition(); }
    static Condition subset(std::vector<int> indices);

    bool unconditional() const { return !subset_.has_value(); }
    const std::vector<int>& indices() const;
    void check_against(int component_count) const;

  private:
    std::optional<std::vector<int>> subset_;
};

// Analytic diagonal Gaussian mixture playing the role of the pretrained noise
// predictor: every marginal, score, and epsilon query is closed form.
struct GaussianMixtureOracle {
    struct Component {
        double weight;
        Vec mean;
        Vec var;  // diagonal covariance; entries >= 0 (0 = point mass along that axis)
    };

    int dim = 0;
    std::vector<Component> components;

    GaussianMixtureOracle() = default;
    explicit GaussianMixtureOracle(std::vector<Component> comps);

    static GaussianMixtureOracle from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    // log p_t(x | cond) of the noised marginal  sum_k w_k N(alpha_t mu_k, alpha_t^2 var_k + sigma_t^2 I).
    double log_density(const Vec& x, double alpha_t, double sigma_t, const Condition& cond) const;

    // component means, convenience for distance-to-mode reporting
    double nearest_mode_distance(const Vec& x) const;
    Vec sample(std::mt19937_64& rng, const Condition& cond) const;
};

// x_t = alpha_t x0 + sigma_t eps
Vec add_noise(const Vec& x0, int t, const Vec& eps, const DiffusionSchedule& sched);

// eps_hat(x, t, cond) = -sigma_t * grad_x log p_t(x | cond); t = 0 is a
// singularity and rejected rather than clamped.
Vec eps_oracle(const GaussianMixtureOracle& gm, const Vec& x, double t, const Condition& cond,
               const DiffusionSchedule& sched);

// same, from explicit (alpha, sigma) so integrators can query off-grid times
Vec eps_oracle_at(const GaussianMixtureOracle& gm, const Vec& x, double alpha_t, double sigma_t,
                  const Condition& cond);

// classifier-free-guidance style hook: eps_empty + omega * (eps_cond - eps_empty)
Vec eps_oracle_guided(const GaussianMixtureOracle& gm, const Vec& x, double t,
                      const Condition& cond_y, double omega, const DiffusionSchedule& sched);

// First-order exponential-integrator step of the probability-flow ODE from s
// to t (either direction):
//   G(x, s, t) = (alpha_t/alpha_s) x - (alpha_t sigma_s/alpha_s - sigma_t) eps_hat(x, s)
// The coefficient equals sigma_t (e^h - 1) with h = lambda_t - lambda_s, but the
// ratio form stays finite at t = 0 and is exact whenever eps_hat is constant
// along the trajectory.
Vec dpm_step(const Vec& x, double s, double t, const Condition& cond,
             const GaussianMixtureOracle& gm, const DiffusionSchedule& sched);

// One-step prediction of the trajectory origin: D(x, s) = G(x, s, 0) = (x - sigma_s eps_hat)/alpha_s.
Vec data_predictor(const Vec& x, double s, const Condition& cond, const GaussianMixtureOracle& gm,
                   const DiffusionSchedule& sched);

// Multi-step reference flow from t_from to t_to with n_steps substeps uniform
// in lambda.  Used as the high-resolution oracle that single dpm_step calls
// are measured against, and for reverse sampling down to t = 0.
Vec integrate_ode(const GaussianMixtureOracle& gm, const Vec& x, double t_from, double t_to,
                  int n_steps, const Condition& cond, const DiffusionSchedule& sched);

}  // namespace ctscene
