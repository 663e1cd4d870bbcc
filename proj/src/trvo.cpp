#include "cdxhedge/trvo.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "cdxhedge/parallel.hpp"

namespace cdxhedge {

Eigen::Vector4d policy_observation(const EnvState& s, double premium_eur) {
    return {s.spread, s.pay_eur / premium_eur, s.n_h, s.a_prev};
}

double estimate_j(const TrajectoryBatch& batch, double gamma) {
    if (batch.n_episodes() == 0) throw std::invalid_argument("estimate_j: empty batch");
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
        double wt = 1.0;
        for (std::size_t i = batch.offsets[e]; i < batch.offsets[e + 1]; ++i) {
            num += wt * batch.rewards_eur(static_cast<Eigen::Index>(i));
            den += wt;
            wt *= gamma;
        }
    }
    return num / den;
}

double reward_volatility(const TrajectoryBatch& batch, double gamma, double j) {
    if (batch.n_episodes() == 0) throw std::invalid_argument("reward_volatility: empty batch");
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
        double wt = 1.0;
        for (std::size_t i = batch.offsets[e]; i < batch.offsets[e + 1]; ++i) {
            const double d = batch.rewards_eur(static_cast<Eigen::Index>(i)) - j;
            num += wt * d * d;
            den += wt;
            wt *= gamma;
        }
    }
    return num / den;
}

Eigen::VectorXd transform_rewards(const TrajectoryBatch& batch, double j,
                                  double lambda_internal) {
    Eigen::VectorXd out = batch.rewards_eur;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double d = out(i) - j;
        out(i) -= lambda_internal * d * d;
    }
    return out;
}

Eigen::VectorXd compute_advantages(const TrajectoryBatch& batch,
                                   const Eigen::VectorXd& transformed_eur, double gamma) {
    const std::size_t n = batch.n_steps();
    if (transformed_eur.size() != static_cast<Eigen::Index>(n))
        throw std::invalid_argument("compute_advantages: reward vector size mismatch");

    Eigen::VectorXd togo(n);
    std::size_t longest = 0;
    for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
        const std::size_t lo = batch.offsets[e], hi = batch.offsets[e + 1];
        longest = std::max(longest, hi - lo);
        const double premium = batch.premium_eur[e];
        double g = 0.0;
        for (std::size_t i = hi; i-- > lo;) {
            g = transformed_eur(static_cast<Eigen::Index>(i)) / premium + gamma * g;
            togo(static_cast<Eigen::Index>(i)) = g;
        }
    }

    // per-timestep batch-mean baseline
    std::vector<double> base(longest, 0.0);
    std::vector<long> count(longest, 0);
    for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
        std::size_t t = 0;
        for (std::size_t i = batch.offsets[e]; i < batch.offsets[e + 1]; ++i, ++t) {
            base[t] += togo(static_cast<Eigen::Index>(i));
            ++count[t];
        }
    }
    for (std::size_t t = 0; t < longest; ++t) base[t] /= static_cast<double>(count[t]);

    Eigen::VectorXd adv(n);
    for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
        std::size_t t = 0;
        for (std::size_t i = batch.offsets[e]; i < batch.offsets[e + 1]; ++i, ++t)
            adv(static_cast<Eigen::Index>(i)) = togo(static_cast<Eigen::Index>(i)) - base[t];
    }

    const double mean = adv.mean();
    const double sd = std::sqrt((adv.array() - mean).square().mean());
    if (sd == 0.0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    return (adv.array() - mean) / sd;
}

namespace {

struct SurrogateTerms {
    Eigen::VectorXd means;
    Eigen::VectorXd weights;  ///< importance ratios
    Eigen::VectorXd z;        ///< (a - mean) / sigma
};

SurrogateTerms surrogate_terms(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                               GaussianPolicy::Cache* cache) {
    SurrogateTerms t;
    t.means = policy.mean(batch.obs, cache);
    const double sd = policy.std_dev();
    t.z = (batch.actions - t.means) / sd;
    t.weights.resize(t.means.size());
    for (Eigen::Index i = 0; i < t.means.size(); ++i) {
        const double lp = GaussianPolicy::log_prob(batch.actions(i), t.means(i), policy.log_std);
        t.weights(i) = std::exp(lp - batch.logp_old(i));
    }
    return t;
}

}  // namespace

double surrogate_value(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                       const Eigen::VectorXd& advantages) {
    auto t = surrogate_terms(policy, batch, nullptr);
    return (t.weights.array() * advantages.array()).mean();
}

Eigen::VectorXd surrogate_gradient(const GaussianPolicy& policy, const TrajectoryBatch& batch,
                                   const Eigen::VectorXd& advantages) {
    GaussianPolicy::Cache cache;
    auto t = surrogate_terms(policy, batch, &cache);
    const double inv_b = 1.0 / static_cast<double>(t.means.size());
    const double sd = policy.std_dev();

    // d logpi / d mean = z / sigma; d logpi / d log_std = z^2 - 1
    const Eigen::VectorXd coeff =
        (t.weights.array() * advantages.array() * t.z.array() / sd) * inv_b;
    Eigen::VectorXd grad = policy.vjp(cache, coeff);
    grad(grad.size() - 1) =
        (t.weights.array() * advantages.array() * (t.z.array().square() - 1.0)).mean();
    return grad;
}

Eigen::VectorXd fisher_vector_product(const GaussianPolicy& policy,
                                      const GaussianPolicy::Cache& cache,
                                      const Eigen::VectorXd& v, double damping) {
    const Eigen::Index b = cache.x.back().cols();
    const double var = policy.std_dev() * policy.std_dev();
    const Eigen::VectorXd jv = policy.jvp(cache, v);
    Eigen::VectorXd out = policy.vjp(cache, jv) / (var * static_cast<double>(b));
    out(out.size() - 1) = 2.0 * v(v.size() - 1);
    return out + damping * v;
}

UpdateStats trust_region_update(GaussianPolicy& policy, const TrajectoryBatch& batch,
                                const Eigen::VectorXd& advantages, const Hyperparams& hp) {
    UpdateStats stats;
    const Eigen::VectorXd grad = surrogate_gradient(policy, batch, advantages);
    if (!grad.allFinite())
        throw std::runtime_error("trust_region_update: non-finite policy gradient");
    if (grad.lpNorm<Eigen::Infinity>() == 0.0) return stats;  // nothing to climb

    GaussianPolicy::Cache cache;
    const Eigen::VectorXd old_means = policy.mean(batch.obs, &cache);
    const double old_log_std = policy.log_std;

    // conjugate gradient on (F + damping I) x = grad
    Eigen::VectorXd x = Eigen::VectorXd::Zero(grad.size());
    Eigen::VectorXd r = grad, p = grad;
    double rs = r.squaredNorm();
    for (int it = 0; it < hp.cg_iterations && rs > 1e-20; ++it) {
        const Eigen::VectorXd fp = fisher_vector_product(policy, cache, p, hp.cg_damping);
        const double alpha = rs / p.dot(fp);
        if (!std::isfinite(alpha)) break;
        x += alpha * p;
        r -= alpha * fp;
        const double rs_next = r.squaredNorm();
        p = r + (rs_next / rs) * p;
        rs = rs_next;
    }

    const double shs = x.dot(fisher_vector_product(policy, cache, x, hp.cg_damping));
    if (!(shs > 0.0) || !std::isfinite(shs)) return stats;
    const Eigen::VectorXd full_step = std::sqrt(2.0 * hp.delta / shs) * x;
    const Eigen::VectorXd theta_old = policy.flatten();

    double scale = 1.0;
    for (int k = 0; k < hp.backtrack_limit; ++k, scale *= 0.5) {
        policy.set_flat(theta_old + scale * full_step);
        const Eigen::VectorXd new_means = policy.mean(batch.obs);
        if (!new_means.allFinite()) continue;
        const double kl =
            GaussianPolicy::mean_kl(old_means, new_means, old_log_std, policy.log_std);
        const double surr = surrogate_value(policy, batch, advantages);
        if (std::isfinite(kl) && std::isfinite(surr) && kl <= hp.delta && surr > 0.0) {
            stats.accepted = true;
            stats.mean_kl = kl;
            stats.surrogate = surr;
            stats.backtracks = k;
            return stats;
        }
    }
    policy.set_flat(theta_old);  // line search failed: keep the old policy
    return stats;
}

EnvBatchFactory gbm_batch_factory(const EnvConfig& config, const GbmParams& params,
                                  std::uint64_t seed, int batch_episodes) {
    auto table = std::make_shared<const PricingTable>(config.index, config.option, config.grid);
    return [config, params, seed, batch_episodes, table](int iteration) {
        const auto paths = simulate_gbm(params, config.grid,
                                        mix_seed(seed, static_cast<std::uint64_t>(iteration), 5),
                                        batch_episodes);
        std::vector<HedgingEnv> envs;
        envs.reserve(paths.size());
        for (const auto& p : paths) envs.emplace_back(config, p.spreads, table);
        return envs;
    };
}

TrajectoryBatch collect_batch(const GaussianPolicy& policy, std::vector<HedgingEnv>& envs,
                              std::uint64_t batch_seed, int threads) {
    if (envs.empty()) throw std::invalid_argument("collect_batch: no environments");

    struct EpisodeBuffer {
        std::vector<Eigen::Vector4d> obs;
        std::vector<double> actions, rewards, logp;
        double premium = 0.0;
    };
    std::vector<EpisodeBuffer> buffers(envs.size());

    parallel_for(envs.size(), threads, [&](std::size_t m) {
        HedgingEnv& env = envs[m];
        EpisodeBuffer& buf = buffers[m];
        NormalSampler rng(mix_seed(batch_seed, m, 2));
        EnvState s = env.reset();
        buf.premium = s.pay_eur;
        const std::size_t n = env.n_steps();
        buf.obs.reserve(n);
        buf.actions.reserve(n);
        buf.rewards.reserve(n);
        buf.logp.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const Eigen::Vector4d o = policy_observation(s, buf.premium);
            const double mu = policy.mean(o)(0);
            double lp = 0.0;
            const double a = policy.sample(mu, rng, &lp);
            const StepResult r = env.step(s, a);
            buf.obs.push_back(o);
            buf.actions.push_back(a);
            buf.rewards.push_back(r.reward_eur);
            buf.logp.push_back(lp);
            s = r.next;
        }
    });

    TrajectoryBatch batch;
    std::size_t total = 0;
    batch.offsets.reserve(buffers.size() + 1);
    for (const auto& b : buffers) {
        batch.offsets.push_back(total);
        total += b.actions.size();
        batch.premium_eur.push_back(b.premium);
    }
    batch.offsets.push_back(total);
    batch.obs.resize(4, static_cast<Eigen::Index>(total));
    batch.actions.resize(static_cast<Eigen::Index>(total));
    batch.rewards_eur.resize(static_cast<Eigen::Index>(total));
    batch.logp_old.resize(static_cast<Eigen::Index>(total));
    Eigen::Index i = 0;
    for (const auto& b : buffers) {
        for (std::size_t k = 0; k < b.actions.size(); ++k, ++i) {
            batch.obs.col(i) = b.obs[k];
            batch.actions(i) = b.actions[k];
            batch.rewards_eur(i) = b.rewards[k];
            batch.logp_old(i) = b.logp[k];
        }
    }
    return batch;
}

TrainResult train(const EnvBatchFactory& factory, const Hyperparams& hp) {
    if (hp.lambda_user < 0.0) throw std::invalid_argument("train: negative lambda");
    if (hp.gamma <= 0.0 || hp.gamma > 1.0) throw std::invalid_argument("train: gamma out of range");
    if (hp.delta <= 0.0) throw std::invalid_argument("train: KL bound must be positive");
    if (hp.batch_episodes < 1 || hp.iterations < 1)
        throw std::invalid_argument("train: batch and iteration counts must be positive");

    TrainResult result{GaussianPolicy(hp.hidden, 4, hp.seed), {}, false};
    double premium_ref = 0.0;
    long long episodes_seen = 0;

    for (int k = 0; k < hp.iterations; ++k) {
        auto envs = factory(k);
        TrajectoryBatch batch =
            collect_batch(result.policy, envs, mix_seed(hp.seed, static_cast<std::uint64_t>(k), 4),
                          hp.threads);
        if (k == 0) premium_ref = batch.premium_eur.front();

        const double j = estimate_j(batch, hp.gamma);
        const double nu2 = reward_volatility(batch, hp.gamma, j);
        const double eta = j - hp.lambda_internal() * nu2;
        episodes_seen += static_cast<long long>(batch.n_episodes());

        if (!std::isfinite(j) || std::abs(j) > 100.0 * std::abs(premium_ref)) {
            result.diverged = true;
            result.log.push_back({k, j, nu2, eta, 0.0, episodes_seen});
            break;
        }

        const Eigen::VectorXd transformed = transform_rewards(batch, j, hp.lambda_internal());
        const Eigen::VectorXd adv = compute_advantages(batch, transformed, hp.gamma);
        const UpdateStats stats = trust_region_update(result.policy, batch, adv, hp);
        result.log.push_back({k, j, nu2, eta, stats.mean_kl, episodes_seen});
    }
    return result;
}

void write_training_log_csv(const std::string& file, const std::vector<IterationLog>& log) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("write_training_log_csv: cannot open " + file);
    std::fprintf(f, "iteration,J,nu2,eta,mean_kl,episodes_seen\n");
    for (const auto& row : log)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%lld\n", row.iteration, row.j, row.nu2,
                     row.eta, row.mean_kl, row.episodes_seen);
    std::fclose(f);
}

}  // namespace cdxhedge
