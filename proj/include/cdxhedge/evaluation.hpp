#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cdxhedge/hedging_env.hpp"
#include "cdxhedge/market_sim.hpp"
#include "cdxhedge/policy.hpp"

namespace cdxhedge {

/// A fixed set of test episodes sharing one config. Agent and baseline always
/// run on the same set, so their p&l difference is a paired statistic.
struct TestSet {
    EnvConfig config;
    std::vector<std::vector<double>> paths;  ///< decimal spread marks per episode
    std::shared_ptr<const PricingTable> table;  ///< built on first use when null
};

TestSet gbm_test_set(const EnvConfig& config, const GbmParams& params, std::uint64_t seed,
                     int episodes);
TestSet heston_test_set(const EnvConfig& config, const HestonParams& params,
                        std::uint64_t seed, int episodes);

/// FNV-1a over the bit patterns of every spread mark plus the cost series.
/// Carried in each report so paired comparisons can assert they saw the
/// same data.
std::uint64_t test_set_checksum(const TestSet& set);

/// Called once per episode with the first state, so wrappers can capture
/// episode-level normalizers before the step loop starts.
using PolicyFactory = std::function<PolicyFn(const EnvState& first)>;

/// Deterministic evaluation mode: action = Gaussian mean, no sampling. The
/// policy reference must outlive the returned factory.
PolicyFactory mean_policy(const GaussianPolicy& policy);

/// The delta-hedge baseline in factory form.
PolicyFactory delta_hedge_factory();

struct EvalReport {
    double mean_pl_eur = 0.0;   ///< mean terminal p&l of the evaluated policy
    double delta_pl_eur = 0.0;  ///< mean paired (policy - delta hedge)
    double pl_vol_eur = 0.0;    ///< population std of terminal p&l
    double path_vol_eur = 0.0;  ///< mean within-episode std of step rewards
    double mean_cost_eur = 0.0; ///< mean total transaction cost per episode
    double mean_action_change = 0.0;  ///< mean |a_t - a_{t-1}| per rebalance
    std::size_t episodes = 0;
    std::uint64_t checksum = 0;

    std::vector<double> pl_eur;           ///< per-episode terminal p&l
    std::vector<double> baseline_pl_eur;  ///< paired delta-hedge terminal p&l
    std::vector<double> path_vols_eur;    ///< per-episode path volatility
};

/// Runs the policy and the delta-hedge baseline over every episode of the
/// set (same paths, same costs) and aggregates. Episodes run in parallel;
/// aggregation is single-threaded and independent of the thread count.
EvalReport evaluate(const PolicyFactory& policy, const TestSet& set, int threads = 1);

/// Population std of the per-step rewards within one episode.
double path_volatility(const EpisodeRecord& rec);

struct FrontierPoint {
    double lambda = 0.0;
    double ba_bp = 0.0;
    double delta_pl_eur = 0.0;       ///< mean p&l pickup over the delta hedge
    double pl_vol_eur = 0.0;         ///< agent terminal p&l volatility
    double baseline_vol_eur = 0.0;   ///< delta-hedge volatility at the same ba
    bool beats_pl = false;
    bool beats_vol = false;
};

struct FrontierAgent {
    double lambda = 0.0;
    double ba_bp = 0.0;
    GaussianPolicy policy;
};

/// One point per agent, evaluated at the agent's own ba (the set's cost model
/// is overridden); the delta-hedge reference is computed once per distinct ba.
std::vector<FrontierPoint> build_frontier(const std::vector<FrontierAgent>& agents,
                                          const TestSet& set, int threads = 1);

/// CSV `lambda,ba_bp,delta_pl_eur,pl_vol_eur`, one row per point.
void write_frontier_csv(const std::string& file, const std::vector<FrontierPoint>& points);

/// Plain-text dominance summary: which points beat the delta hedge on mean
/// p&l, and which also beat it on volatility.
void write_dominance_report(const std::string& file, const std::vector<FrontierPoint>& points);

/// Fixed-width histogram anchored on integer multiples of the bin width.
struct Histogram {
    double bin_width = 0.0;
    double origin = 0.0;  ///< left edge of counts[0]
    std::vector<std::size_t> counts;

    double left(std::size_t i) const { return origin + bin_width * static_cast<double>(i); }
    std::size_t total() const;
};

/// Histogram of per-episode (agent p&l - baseline p&l) from a paired report.
Histogram pl_distribution(const EvalReport& report, double bin_width_eur);

/// CSV `bin_left,bin_right,count`.
void write_histogram_csv(const std::string& file, const Histogram& hist);

/// Spearman rank correlation (average ranks on ties); the frontier tests use
/// it for the soft lambda-vs-volatility monotonicity check.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// One row of the per-scenario results table; lambda = -1 marks the
/// delta-hedge baseline rows.
struct ScenarioRow {
    int scenario = 0;
    double lambda = 0.0;
    double pl_keur = 0.0;
    double path_vol_keur = 0.0;
};

/// CSV `scenario,lambda,pl_keur,path_vol_keur`.
void write_scenario_table_csv(const std::string& file, const std::vector<ScenarioRow>& rows);

}  // namespace cdxhedge
