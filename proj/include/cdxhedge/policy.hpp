#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cdxhedge/market_sim.hpp"

namespace cdxhedge {

/// Gaussian policy: tanh MLP for the action mean plus one state-independent
/// log standard deviation. The output layer starts at zero weights with bias
/// 0.5, so the untrained policy holds half the index regardless of the state.
class GaussianPolicy {
public:
    static constexpr double kLogStdMin = -6.0;
    static constexpr double kLogStdMax = 1.0;

    /// hidden = units per hidden layer; init_seed drives the deterministic
    /// hidden-weight initialization.
    GaussianPolicy(std::vector<int> hidden, int obs_dim = 4, std::uint64_t init_seed = 0);

    /// Activations kept for the backward/forward-derivative passes.
    struct Cache {
        std::vector<Eigen::MatrixXd> x;  ///< x[0] = scaled input, x.back() = means (1 x B)
    };

    /// Batched mean: obs is obs_dim x B of raw features (spread decimal,
    /// price in premium units, delta, previous action); scaling is internal.
    Eigen::VectorXd mean(const Eigen::MatrixXd& obs, Cache* cache = nullptr) const;

    /// sum_i g_i * d(mean_i)/d(params), flat layout; the log-std slot is 0.
    Eigen::VectorXd vjp(const Cache& cache, const Eigen::VectorXd& g) const;
    /// per-sample directional derivative of the means along flat direction v
    Eigen::VectorXd jvp(const Cache& cache, const Eigen::VectorXd& v) const;

    /// draw action = mean + std * z and report the pre-clip Gaussian log-density
    double sample(double mean_value, NormalSampler& rng, double* log_prob) const;
    double log_prob(double action, double mean_value) const { return log_prob(action, mean_value, log_std); }
    static double log_prob(double action, double mean_value, double log_std_value);

    /// mean KL(old || new) of two diagonal Gaussians over paired means
    static double mean_kl(const Eigen::VectorXd& mean_old, const Eigen::VectorXd& mean_new,
                          double log_std_old, double log_std_new);

    std::size_t n_params() const;
    Eigen::VectorXd flatten() const;
    void set_flat(const Eigen::VectorXd& p);  ///< clamps log_std to its bounds
    double std_dev() const { return std::exp(log_std); }

    /// text checkpoint, format-versioned, written atomically (tmp + rename)
    void save(const std::string& file) const;
    static GaussianPolicy load(const std::string& file);

    std::vector<int> sizes;            ///< {obs_dim, hidden..., 1}
    std::vector<Eigen::MatrixXd> w;    ///< w[l] is sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd obs_scale;         ///< default {100, 1, 1, 1}
    double log_std = 0.0;
};

}  // namespace cdxhedge
