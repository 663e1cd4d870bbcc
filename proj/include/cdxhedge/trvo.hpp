#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdxhedge/hedging_env.hpp"
#include "cdxhedge/policy.hpp"

namespace cdxhedge {

struct Hyperparams {
    double lambda_user = 4.0;  ///< paper scale 0.1-100; applied to EUR rewards as user * 1e-5
    double gamma = 0.999;
    double delta = 0.01;  ///< mean-KL trust region per update
    int batch_episodes = 64;
    int iterations = 63;  ///< 63 * 64 ~ 4k episodes (desk scale); 625 for the paper's 40k
    std::uint64_t seed = 0;
    int threads = 1;
    int cg_iterations = 10;
    double cg_damping = 1e-2;
    int backtrack_limit = 10;
    std::vector<int> hidden = {64, 64};

    double lambda_internal() const { return lambda_user * 1e-5; }
};

/// Flattened rollouts of one update batch. Observations carry the raw policy
/// features (spread, price in premium units, delta, previous action).
struct TrajectoryBatch {
    Eigen::MatrixXd obs;       ///< 4 x total_steps
    Eigen::VectorXd actions;   ///< pre-clip Gaussian draws
    Eigen::VectorXd rewards_eur;
    Eigen::VectorXd logp_old;
    std::vector<std::size_t> offsets;  ///< episode starts, with the total appended
    std::vector<double> premium_eur;   ///< initial option value per episode

    std::size_t n_episodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t n_steps() const { return offsets.empty() ? 0 : offsets.back(); }
};

/// Discount-weighted mean step reward (EUR): weights gamma^t pooled across
/// the batch; the plain mean when gamma = 1.
double estimate_j(const TrajectoryBatch& batch, double gamma);

/// Reward volatility nu^2 (EUR^2): same weights applied to (r - J)^2.
double reward_volatility(const TrajectoryBatch& batch, double gamma, double j);

/// r~ = r - lambda (r - J)^2, the mean-volatility objective folded into the
/// rewards; lambda = 0 returns the rewards untouched.
Eigen::VectorXd transform_rewards(const TrajectoryBatch& batch, double j, double lambda_internal);

/// Discounted reward-to-go of the transformed rewards in premium units, minus
/// a per-timestep batch-mean baseline, normalized to zero mean and unit
/// variance. All-identical inputs produce all-zero advantages.
Eigen::VectorXd compute_advantages(const TrajectoryBatch& batch,
                                   const Eigen::VectorXd& transformed_eur, double gamma);

/// mean_i exp(logpi(a_i) - logp_old_i) * A_i
double surrogate_value(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                       const Eigen::VectorXd& advantages);
Eigen::VectorXd surrogate_gradient(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                                   const Eigen::VectorXd& advantages);

/// Exact Gaussian Fisher-vector product on the batch states: J^T J v / sigma^2
/// for the mean parameters, 2 v for the log-std coordinate, plus damping * v.
Eigen::VectorXd fisher_vector_product(const GaussianPolicy& policy,
                                      const GaussianPolicy::Cache& cache,
                                      const Eigen::VectorXd& v, double damping);

struct UpdateStats {
    bool accepted = false;
    double mean_kl = 0.0;
    double surrogate = 0.0;
    int backtracks = 0;
};

/// One natural-gradient trust-region step: conjugate gradient on the Fisher,
/// scaled to the KL budget, backtracked until mean KL <= delta and the
/// surrogate improves; restores the old parameters when the search fails.
UpdateStats trust_region_update(GaussianPolicy& policy, const TrajectoryBatch& batch,
                                const Eigen::VectorXd& advantages, const Hyperparams& hp);

/// Observation fed to the policy: {spread, price in units of the episode's
/// initial premium, hedge ratio, previous action}. Shared by training and
/// deterministic evaluation so the two never drift apart.
Eigen::Vector4d policy_observation(const EnvState& state, double premium_eur);

using EnvBatchFactory = std::function<std::vector<HedgingEnv>(int iteration)>;

/// Fresh GBM episodes per iteration, seeded by (seed, iteration); one shared
/// pricing table across all envs.
EnvBatchFactory gbm_batch_factory(const EnvConfig& config, const GbmParams& params,
                                  std::uint64_t seed, int batch_episodes);

/// Rolls the stochastic policy through every env; per-episode RNG substreams
/// keep the result independent of the thread count.
TrajectoryBatch collect_batch(const GaussianPolicy& policy, std::vector<HedgingEnv>& envs,
                              std::uint64_t batch_seed, int threads);

struct IterationLog {
    int iteration;
    double j;
    double nu2;
    double eta;
    double mean_kl;
    long long episodes_seen;
};

struct TrainResult {
    GaussianPolicy policy;
    std::vector<IterationLog> log;
    bool diverged = false;
};

/// collect -> estimate J -> transform -> advantages -> trust-region update,
/// aborting if |J| exceeds 100x the initial premium.
TrainResult train(const EnvBatchFactory& factory, const Hyperparams& hp);

/// CSV `iteration,J,nu2,eta,mean_kl,episodes_seen`.
void write_training_log_csv(const std::string& file, const std::vector<IterationLog>& log);

}  // namespace cdxhedge
