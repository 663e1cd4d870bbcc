#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cdxhedge/calendar.hpp"
#include "cdxhedge/pricing.hpp"

namespace cdxhedge {

struct Quote {
    std::string dealer_id;
    double bid_bp = 0.0;
    double ask_bp = 0.0;
};

struct QuoteSnapshot {
    Timestamp timestamp;
    std::vector<Quote> quotes;
};

enum class CleanMode {
    mean_two_sigma,  ///< discard quotes more than 2 population sigma from the side mean
    median           ///< median of the unfiltered quotes, no discards
};

struct CleanSnapshot {
    double applicable_bid_bp = 0.0;
    double applicable_ask_bp = 0.0;
    double mid_bp = 0.0;
    double bidask_bp = 0.0;
    int discarded_bid = 0;
    int discarded_ask = 0;
};

CleanSnapshot clean_snapshot(const QuoteSnapshot& snap, CleanMode mode = CleanMode::mean_two_sigma);

struct CleanSeries {
    std::vector<Timestamp> timestamps;
    std::vector<double> mid_bp;
    std::vector<double> bidask_bp;

    std::size_t size() const { return timestamps.size(); }
};

struct CleanSummary {
    int discarded_bid = 0;
    int discarded_ask = 0;
    int crossed_snapshots = 0;  ///< applicable bid above applicable ask, reported not fixed
};

CleanSeries clean_series(const std::vector<QuoteSnapshot>& snaps, CleanMode mode,
                         CleanSummary* summary = nullptr);

struct LoadedQuotes {
    std::vector<QuoteSnapshot> snapshots;  ///< sorted by timestamp
    std::vector<std::string> malformed;    ///< "line N: why" diagnostics for skipped rows
};

/// CSV with header `timestamp,dealer_id,bid_bp,ask_bp`. Throws if the file is
/// missing or the header is wrong; individual bad rows are reported, not fatal.
LoadedQuotes load_quotes(const std::string& path);

void write_quotes_csv(const std::string& path, const std::vector<QuoteSnapshot>& snaps);

/// CSV with header `timestamp,mid_bp,bidask_bp`.
void write_clean_series_csv(const std::string& path, const CleanSeries& series);
CleanSeries load_clean_series_csv(const std::string& path);

struct EpisodeSlice {
    TradingGrid grid;
    std::vector<double> spreads;    ///< decimal
    std::vector<double> bidask_bp;  ///< quote width per grid point
};

struct SliceReport {
    int episodes = 0;
    int filled_points = 0;      ///< grid slots forward-filled from an earlier mark
    int skipped_windows = 0;    ///< windows dropped for an unfillable leading slot
    int dropped_trailing_days = 0;
};

/// Cut the series into consecutive windows of n_days trading days with
/// steps_per_day marks per day (standard 09:30-17:30 slots). Missing marks are
/// forward-filled from the latest earlier value and counted; a window whose
/// leading slots precede any data is skipped. Throws when no complete episode
/// results.
std::vector<EpisodeSlice> slice_episodes(const CleanSeries& series, int n_days, int steps_per_day,
                                         SliceReport* report = nullptr);

enum class Side { buy_protection, sell_protection };

/// Eq-style trading cost: notional times the upfront move across half the
/// quoted width, on the side of the trade. ba in bp.
double transaction_cost(double notional, double spread, Timestamp t, double ba_bp, Side side,
                        const IndexSpec& spec);

}  // namespace cdxhedge
