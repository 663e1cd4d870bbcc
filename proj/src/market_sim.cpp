#include "cdxhedge/market_sim.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "cdxhedge/parallel.hpp"

namespace cdxhedge {

namespace {

constexpr double kHoursPerYear = 24.0 * 365.0;

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
    std::uint64_t x = seed;
    (void)splitmix64(x);
    x ^= 0xA0761D6478BD642FULL * (path + 1);
    (void)splitmix64(x);
    x ^= 0xE7037ED1A0B428DBULL * (stream + 1);
    return splitmix64(x);
}

double NormalSampler::uniform01() {
    // 53-bit mantissa, shifted into (0, 1]
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalSampler::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::vector<MarketPath> simulate_gbm(const GbmParams& params, const TradingGrid& grid,
                                     std::uint64_t seed, int n_paths, int threads) {
    if (n_paths < 1)
        throw std::invalid_argument("simulate_gbm: n_paths must be >= 1");
    if (params.s0 <= 0.0 || params.sigma < 0.0)
        throw std::invalid_argument("simulate_gbm: invalid parameters");

    std::vector<MarketPath> paths(static_cast<std::size_t>(n_paths));
    parallel_for(paths.size(), threads, [&](std::size_t p) {
        NormalSampler z(mix_seed(seed, p, 0));
        auto& s = paths[p].spreads;
        s.resize(grid.size());
        s[0] = params.s0;
        const double var = params.sigma * params.sigma;
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double dt = grid.step_hours[k] / kHoursPerYear;
            const double sdt = std::sqrt(dt);
            s[k + 1] = s[k] * std::exp((params.mu - 0.5 * var) * dt + params.sigma * sdt * z.next());
        }
    });
    return paths;
}

std::vector<MarketPath> simulate_heston(const HestonParams& params, const TradingGrid& grid,
                                        std::uint64_t seed, int n_paths, int threads) {
    if (n_paths < 1)
        throw std::invalid_argument("simulate_heston: n_paths must be >= 1");
    if (params.s0 <= 0.0 || params.nu0 < 0.0 || params.kappa < 0.0 || params.theta < 0.0 ||
        params.xi < 0.0 || std::abs(params.rho) > 1.0)
        throw std::invalid_argument("simulate_heston: invalid parameters");

    std::vector<MarketPath> paths(static_cast<std::size_t>(n_paths));
    const double rho_bar = std::sqrt(1.0 - params.rho * params.rho);
    parallel_for(paths.size(), threads, [&](std::size_t p) {
        NormalSampler zs(mix_seed(seed, p, 0));  // same stream as the GBM spread shocks
        NormalSampler zv(mix_seed(seed, p, 1));
        auto& s = paths[p].spreads;
        auto& v = paths[p].variance;
        s.resize(grid.size());
        v.resize(grid.size());
        s[0] = params.s0;
        double nu = params.nu0;
        v[0] = std::max(nu, 0.0);
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double dt = grid.step_hours[k] / kHoursPerYear;
            const double sdt = std::sqrt(dt);
            const double var = std::max(nu, 0.0);  // full truncation
            const double sigma = std::sqrt(var);
            const double z1 = zs.next();
            const double z2 = params.rho * z1 + rho_bar * zv.next();
            s[k + 1] = s[k] * std::exp((0.0 - 0.5 * var) * dt + sigma * sdt * z1);
            nu = nu + params.kappa * (params.theta - var) * dt + params.xi * sigma * sdt * z2;
            v[k + 1] = std::max(nu, 0.0);
        }
    });
    return paths;
}

void write_paths_csv(const std::string& file, const std::vector<MarketPath>& paths,
                     const TradingGrid& grid) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f)
        throw std::runtime_error("write_paths_csv: cannot open " + file);
    const bool with_var = !paths.empty() && paths.front().has_variance();
    std::fprintf(f, with_var ? "path_id,step,timestamp,spread,variance\n"
                             : "path_id,step,timestamp,spread\n");
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (with_var)
                std::fprintf(f, "%zu,%zu,%s,%.17g,%.17g\n", p, k, to_iso(grid.points[k]).c_str(),
                             paths[p].spreads[k], paths[p].variance[k]);
            else
                std::fprintf(f, "%zu,%zu,%s,%.17g\n", p, k, to_iso(grid.points[k]).c_str(),
                             paths[p].spreads[k]);
        }
    }
    std::fclose(f);
}

}  // namespace cdxhedge
