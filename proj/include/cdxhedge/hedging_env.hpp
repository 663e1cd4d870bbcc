#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cdxhedge/calendar.hpp"
#include "cdxhedge/market_data.hpp"
#include "cdxhedge/market_sim.hpp"
#include "cdxhedge/pricing.hpp"

namespace cdxhedge {

/// Per-grid-point coupon coefficients precomputed once per episode shape, so
/// stepping does not rebuild schedules. Evaluates bit-identically to the
/// pricing module (same expressions, same operation order).
class PricingTable {
public:
    PricingTable(const IndexSpec& index, const OptionSpec& option, const TradingGrid& grid);

    double upfront(std::size_t k, double spread) const;
    double pay(std::size_t k, double spread) const;  ///< option value, EUR
    double hedge_ratio(std::size_t k, double spread) const;
    /// cost of trading `notional` of protection against a bid/ask width
    double trade_cost(std::size_t k, double spread, double notional, double bidask_bp,
                      Side side) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Period {
        double tau;       ///< accrual fraction of the (clamped) period
        double yf_start;  ///< eval time -> clamped period start, ACT/360
        double yf_pay;    ///< eval time -> period pay date, ACT/360
    };
    struct Point {
        std::vector<Period> coupons;  ///< measured from t_k, for the upfront
        double accr;                  ///< coupon accrual term at t_k
        double tau365;                ///< t_k -> expiry, ACT/365
        double yf_fwd;                ///< t_k -> expiry, ACT/360
    };

    double annuity_of(const std::vector<Period>& periods, double spread) const;

    IndexSpec index_;
    OptionSpec option_;
    std::vector<Period> expiry_coupons_;  ///< measured from expiry (Black annuity)
    std::vector<Point> points_;
};

enum class PositionSign { short_option, long_option };

/// Bid/ask width in basis points, either flat or one value per grid point.
struct CostModel {
    double constant_bidask_bp = 0.0;
    std::vector<double> bidask_bp;  ///< when non-empty, overrides the constant

    double at(std::size_t k) const {
        return bidask_bp.empty() ? constant_bidask_bp : bidask_bp[k];
    }
};

struct EnvConfig {
    IndexSpec index;
    OptionSpec option;  ///< expiry must equal the last grid point
    CostModel cost;
    TradingGrid grid;
    PositionSign position_sign = PositionSign::short_option;
};

/// The 4-tuple the agent observes: spread, option value, delta, last action.
struct EnvState {
    double spread = 0.0;
    double pay_eur = 0.0;
    double n_h = 0.0;
    double a_prev = 0.0;
};

struct StepResult {
    EnvState next;
    double reward_eur = 0.0;
    double option_pnl_eur = 0.0;
    double hedge_pnl_eur = 0.0;
    double cost_eur = 0.0;
    bool done = false;
};

/// One hedging episode over a fixed spread path. Value object: copies are
/// independent and stepping is deterministic in (state, action, path, costs).
class HedgingEnv {
public:
    HedgingEnv(EnvConfig config, std::vector<double> spreads,
               std::shared_ptr<const PricingTable> table = nullptr);

    EnvState reset();
    /// Advances the internal clock; `reward = option_pnl - hedge_pnl - cost`
    /// holds at bit level.
    StepResult step(const EnvState& state, double action);
    /// Pure transition from grid point k; `step` is `step_from(cursor, ...)`.
    StepResult step_from(std::size_t k, const EnvState& state, double action) const;

    std::size_t cursor() const { return cursor_; }
    std::size_t n_steps() const { return config_.grid.size() - 1; }
    const EnvConfig& config() const { return config_; }
    const PricingTable& table() const { return *table_; }

private:
    EnvConfig config_;
    std::vector<double> spreads_;
    std::shared_ptr<const PricingTable> table_;
    std::size_t cursor_ = 0;
};

using PolicyFn = std::function<double(const EnvState&)>;

struct EpisodeRecord {
    std::vector<EnvState> states;   ///< grid-point states, size n
    std::vector<double> actions;    ///< size n-1
    std::vector<double> rewards_eur;
    std::vector<double> costs_eur;
    std::vector<double> option_pnl_eur;
    std::vector<double> hedge_pnl_eur;

    double total_pnl_eur() const;
};

EpisodeRecord run_policy(const PolicyFn& policy, const EnvConfig& config,
                         const std::vector<double>& spreads,
                         std::shared_ptr<const PricingTable> table = nullptr);

/// The benchmark strategy: hold the current delta, clipped to [0, 1].
double delta_hedge_policy(const EnvState& state);

/// CSV export `step,timestamp,spread_bp,action,reward_eur,cost_eur`.
void write_episode_csv(const std::string& file, const EpisodeRecord& rec, const TradingGrid& grid);

}  // namespace cdxhedge
