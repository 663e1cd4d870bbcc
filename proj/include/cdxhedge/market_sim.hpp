#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cdxhedge/calendar.hpp"

namespace cdxhedge {

struct GbmParams {
    double s0 = 0.01;    ///< initial spread, decimal
    double mu = 0.0;     ///< drift per annum
    double sigma = 0.60; ///< annualized volatility
};

struct HestonParams {
    double s0 = 0.01;
    double nu0 = 0.36;   ///< initial variance (60%^2)
    double kappa = 2.0;  ///< mean reversion rate
    double theta = 0.36; ///< long-run variance
    double xi = 0.9;     ///< vol of vol
    double rho = 0.0;    ///< spread/variance shock correlation
};

/// Spread path on a grid; variance present for stochastic-vol models.
struct MarketPath {
    std::vector<double> spreads;
    std::vector<double> variance;  ///< empty for GBM

    bool has_variance() const { return !variance.empty(); }
};

/// Deterministic substream derivation: one independent stream per
/// (seed, path, stream) triple, stable across platforms.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream);

/// Standard normal draws via Box-Muller over mt19937_64. The transform is
/// hand-rolled because std::normal_distribution output is implementation
/// defined, which would break the bit-reproducibility contract.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double next();

private:
    double uniform01();  ///< in (0, 1]
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Exact log-normal stepping over the grid's elapsed-hour gaps,
/// dt = hours / 8760 (one year = 365 days).
std::vector<MarketPath> simulate_gbm(const GbmParams& params, const TradingGrid& grid,
                                     std::uint64_t seed, int n_paths, int threads = 1);

/// Full-truncation Euler for the variance, log-normal spread step with the
/// truncated variance. With xi = 0, nu0 = theta and rho = 0 the spread path is
/// bit-identical to simulate_gbm at sigma = sqrt(theta) and mu = 0.
std::vector<MarketPath> simulate_heston(const HestonParams& params, const TradingGrid& grid,
                                        std::uint64_t seed, int n_paths, int threads = 1);

/// CSV dump: `path_id,step,timestamp,spread[,variance]`.
void write_paths_csv(const std::string& file, const std::vector<MarketPath>& paths,
                     const TradingGrid& grid);

}  // namespace cdxhedge
