#include "cdxhedge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "cdxhedge/parallel.hpp"
#include "cdxhedge/trvo.hpp"

namespace cdxhedge {

namespace {

std::vector<std::vector<double>> extract_spreads(const std::vector<MarketPath>& paths) {
    std::vector<std::vector<double>> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(p.spreads);
    return out;
}

void fnv1a(std::uint64_t& h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
    }
}

double population_std(const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / xs.size());
}

}  // namespace

TestSet gbm_test_set(const EnvConfig& config, const GbmParams& params, std::uint64_t seed,
                     int episodes) {
    TestSet set;
    set.config = config;
    set.paths = extract_spreads(simulate_gbm(params, config.grid, seed, episodes));
    set.table = std::make_shared<PricingTable>(config.index, config.option, config.grid);
    return set;
}

TestSet heston_test_set(const EnvConfig& config, const HestonParams& params,
                        std::uint64_t seed, int episodes) {
    TestSet set;
    set.config = config;
    set.paths = extract_spreads(simulate_heston(params, config.grid, seed, episodes));
    set.table = std::make_shared<PricingTable>(config.index, config.option, config.grid);
    return set;
}

std::uint64_t test_set_checksum(const TestSet& set) {
    std::uint64_t h = 14695981039346656037ull;
    fnv1a(h, static_cast<double>(set.paths.size()));
    for (const auto& path : set.paths)
        for (double s : path) fnv1a(h, s);
    fnv1a(h, set.config.cost.constant_bidask_bp);
    for (double b : set.config.cost.bidask_bp) fnv1a(h, b);
    return h;
}

PolicyFactory mean_policy(const GaussianPolicy& policy) {
    return [&policy](const EnvState& first) -> PolicyFn {
        const double premium = first.pay_eur;
        return [&policy, premium](const EnvState& s) {
            const Eigen::Vector4d obs = policy_observation(s, premium);
            return policy.mean(obs)(0);
        };
    };
}

PolicyFactory delta_hedge_factory() {
    return [](const EnvState&) -> PolicyFn { return delta_hedge_policy; };
}

double path_volatility(const EpisodeRecord& rec) {
    if (rec.rewards_eur.size() < 2)
        throw std::invalid_argument("path_volatility: need at least 2 steps");
    return population_std(rec.rewards_eur);
}

EvalReport evaluate(const PolicyFactory& policy, const TestSet& set, int threads) {
    if (set.paths.empty()) throw std::invalid_argument("evaluate: empty test set");
    auto table = set.table
                     ? set.table
                     : std::make_shared<const PricingTable>(set.config.index, set.config.option,
                                                            set.config.grid);
    const std::size_t n = set.paths.size();
    EvalReport rep;
    rep.episodes = n;
    rep.checksum = test_set_checksum(set);
    rep.pl_eur.resize(n);
    rep.baseline_pl_eur.resize(n);
    rep.path_vols_eur.resize(n);
    std::vector<double> costs(n), action_change(n);

    parallel_for(n, threads, [&](std::size_t i) {
        HedgingEnv probe(set.config, set.paths[i], table);
        const PolicyFn fn = policy(probe.reset());
        const EpisodeRecord rec = run_policy(fn, set.config, set.paths[i], table);
        const EpisodeRecord base =
            run_policy(delta_hedge_policy, set.config, set.paths[i], table);

        rep.pl_eur[i] = rec.total_pnl_eur();
        rep.baseline_pl_eur[i] = base.total_pnl_eur();
        rep.path_vols_eur[i] = path_volatility(rec);
        costs[i] = std::accumulate(rec.costs_eur.begin(), rec.costs_eur.end(), 0.0);
        double turn = 0.0, prev = 0.0;
        for (double a : rec.actions) {
            turn += std::abs(a - prev);
            prev = a;
        }
        action_change[i] = turn / static_cast<double>(rec.actions.size());
    });

    for (std::size_t i = 0; i < n; ++i) {
        rep.mean_pl_eur += rep.pl_eur[i];
        rep.delta_pl_eur += rep.pl_eur[i] - rep.baseline_pl_eur[i];
        rep.path_vol_eur += rep.path_vols_eur[i];
        rep.mean_cost_eur += costs[i];
        rep.mean_action_change += action_change[i];
    }
    const double dn = static_cast<double>(n);
    rep.mean_pl_eur /= dn;
    rep.delta_pl_eur /= dn;
    rep.path_vol_eur /= dn;
    rep.mean_cost_eur /= dn;
    rep.mean_action_change /= dn;
    rep.pl_vol_eur = population_std(rep.pl_eur);
    return rep;
}

std::vector<FrontierPoint> build_frontier(const std::vector<FrontierAgent>& agents,
                                          const TestSet& set, int threads) {
    std::vector<FrontierPoint> points;
    points.reserve(agents.size());
    for (const auto& agent : agents) {
        TestSet at_ba = set;
        at_ba.config.cost = CostModel{};
        at_ba.config.cost.constant_bidask_bp = agent.ba_bp;
        const EvalReport rep = evaluate(mean_policy(agent.policy), at_ba, threads);
        FrontierPoint p;
        p.lambda = agent.lambda;
        p.ba_bp = agent.ba_bp;
        p.delta_pl_eur = rep.delta_pl_eur;
        p.pl_vol_eur = rep.pl_vol_eur;
        p.baseline_vol_eur = population_std(rep.baseline_pl_eur);
        p.beats_pl = p.delta_pl_eur > 0.0;
        p.beats_vol = p.pl_vol_eur < p.baseline_vol_eur;
        points.push_back(p);
    }
    return points;
}

void write_frontier_csv(const std::string& file, const std::vector<FrontierPoint>& points) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("write_frontier_csv: cannot open " + file);
    std::fprintf(f, "lambda,ba_bp,delta_pl_eur,pl_vol_eur\n");
    for (const auto& p : points)
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", p.lambda, p.ba_bp, p.delta_pl_eur,
                     p.pl_vol_eur);
    std::fclose(f);
}

void write_dominance_report(const std::string& file, const std::vector<FrontierPoint>& points) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("write_dominance_report: cannot open " + file);
    std::size_t pl = 0, vol = 0;
    for (const auto& p : points) {
        std::fprintf(f,
                     "lambda=%g ba_bp=%g: beats delta-hedge p&l: %s; "
                     "beats its volatility: %s (agent vol %.0f EUR vs %.0f EUR)\n",
                     p.lambda, p.ba_bp, p.beats_pl ? "yes" : "no", p.beats_vol ? "yes" : "no",
                     p.pl_vol_eur, p.baseline_vol_eur);
        pl += p.beats_pl;
        vol += p.beats_vol;
    }
    std::fprintf(f, "%zu/%zu points beat the delta hedge on mean p&l; %zu/%zu also on volatility\n",
                 pl, points.size(), vol, points.size());
    std::fclose(f);
}

std::size_t Histogram::total() const {
    std::size_t t = 0;
    for (std::size_t c : counts) t += c;
    return t;
}

Histogram pl_distribution(const EvalReport& report, double bin_width_eur) {
    if (!(bin_width_eur > 0.0))
        throw std::invalid_argument("pl_distribution: bin width must be positive");
    if (report.pl_eur.empty() || report.pl_eur.size() != report.baseline_pl_eur.size())
        throw std::invalid_argument("pl_distribution: report lacks paired episode p&l");

    std::vector<double> diff(report.pl_eur.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = report.pl_eur[i] - report.baseline_pl_eur[i];
    const auto [lo, hi] = std::minmax_element(diff.begin(), diff.end());

    Histogram h;
    h.bin_width = bin_width_eur;
    h.origin = std::floor(*lo / bin_width_eur) * bin_width_eur;
    const std::size_t bins =
        static_cast<std::size_t>(std::floor((*hi - h.origin) / bin_width_eur)) + 1;
    h.counts.assign(bins, 0);
    for (double d : diff) {
        auto idx = static_cast<std::size_t>(std::floor((d - h.origin) / bin_width_eur));
        ++h.counts[std::min(idx, bins - 1)];
    }
    return h;
}

void write_histogram_csv(const std::string& file, const Histogram& hist) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("write_histogram_csv: cannot open " + file);
    std::fprintf(f, "bin_left,bin_right,count\n");
    for (std::size_t i = 0; i < hist.counts.size(); ++i)
        std::fprintf(f, "%.17g,%.17g,%zu\n", hist.left(i), hist.left(i + 1), hist.counts[i]);
    std::fclose(f);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cxy = 0.0, cxx = 0.0, cyy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cxy += (rx[i] - mx) * (ry[i] - my);
        cxx += (rx[i] - mx) * (rx[i] - mx);
        cyy += (ry[i] - my) * (ry[i] - my);
    }
    if (cxx == 0.0 || cyy == 0.0) return 0.0;  // a flat rank vector carries no trend
    return cxy / std::sqrt(cxx * cyy);
}

void write_scenario_table_csv(const std::string& file, const std::vector<ScenarioRow>& rows) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("write_scenario_table_csv: cannot open " + file);
    std::fprintf(f, "scenario,lambda,pl_keur,path_vol_keur\n");
    for (const auto& r : rows)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g\n", r.scenario, r.lambda, r.pl_keur,
                     r.path_vol_keur);
    std::fclose(f);
}

}  // namespace cdxhedge
