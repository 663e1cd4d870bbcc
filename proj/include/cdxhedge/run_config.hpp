#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cdxhedge/hedging_env.hpp"
#include "cdxhedge/market_sim.hpp"
#include "cdxhedge/trvo.hpp"

namespace cdxhedge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every tunable of the toolchain, defaulted to the standard book setup
/// (100 mln 5y index, ATM payer, 40-day episode at 17 marks/day). Values are
/// kept in config units (bp, strings) and converted by the typed views below.
struct RunConfig {
    // [run]
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out = "out";

    // [index]
    std::string index_maturity = "2030-06-20";
    double index_coupon_bp = 100.0;
    double index_lgd = 0.60;
    double index_notional = 100e6;

    // [option]
    std::string option_kind = "payer";  ///< payer | receiver
    double option_strike_bp = 100.0;
    double option_sigma = 0.60;
    double option_notional = 100e6;

    // [grid]
    std::string grid_start = "2025-06-23T09:30";
    int grid_days = 40;
    int grid_steps_per_day = 17;

    // [sim]
    std::string sim_model = "gbm";  ///< gbm | heston
    double sim_s0_bp = 100.0;
    double sim_mu = 0.0;
    double sim_sigma = 0.60;
    double sim_nu0 = 0.36;
    double sim_kappa = 2.0;
    double sim_theta = 0.36;
    double sim_xi = 0.9;
    double sim_rho = 0.0;
    int sim_episodes = 100;

    // [cost]
    double cost_ba_bp = 0.0;

    // [train]
    double train_lambda = 4.0;
    double train_gamma = 0.999;
    double train_delta = 0.01;
    int train_batch_episodes = 64;
    int train_iterations = 63;
    std::string train_hidden = "64,64";

    // [eval]
    int eval_episodes = 2000;
    std::string eval_checkpoint;      ///< empty: delta-hedge baseline only
    std::string eval_series;          ///< cleaned series CSV: real-data mode
    double eval_bin_width_keur = 10.0;

    // [frontier]
    std::string frontier_lambdas = "1,2,4,10,25";
    std::string frontier_bas_bp = "0.5,1,1.5,2";

    // [data]
    std::string data_quotes;
    bool data_median = false;
};

/// Parse `[section]` / `key = value` text; `#` lines are comments. Unknown
/// keys and malformed values throw ConfigError naming the offender.
RunConfig load_config(const std::string& path);

/// Set one `section.key` from its string form (the flag-override path).
void set_key(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

/// Canonical serialization; load_config(serialize) round-trips every field.
std::string resolved_config(const RunConfig& cfg);
void write_resolved_config(const std::string& file, const RunConfig& cfg);

/// Cross-field sanity: positive sizes and notionals, known enum strings,
/// maturity after the grid, parsable lists. Throws ConfigError.
void validate(const RunConfig& cfg);

// typed views, each validating just what it touches
TradingGrid config_grid(const RunConfig& cfg);
EnvConfig config_env(const RunConfig& cfg);
GbmParams config_gbm(const RunConfig& cfg);
HestonParams config_heston(const RunConfig& cfg);
Hyperparams config_hyperparams(const RunConfig& cfg);

std::vector<double> parse_double_list(const std::string& text, const std::string& key);
std::vector<int> parse_int_list(const std::string& text, const std::string& key);

}  // namespace cdxhedge
