#include "cdxhedge/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cdxhedge {

namespace {

struct SideClean {
    double applicable = 0.0;
    int discarded = 0;
};

SideClean clean_side(std::vector<double> q, CleanMode mode) {
    if (q.empty())
        throw std::invalid_argument("clean_snapshot: empty quote side");

    if (mode == CleanMode::median) {
        std::sort(q.begin(), q.end());
        const std::size_t n = q.size();
        const double med = n % 2 ? q[n / 2] : 0.5 * (q[n / 2 - 1] + q[n / 2]);
        return {med, 0};
    }

    // sigma is meaningless below 3 quotes: average directly
    if (q.size() < 3) {
        double s = 0.0;
        for (double v : q) s += v;
        return {s / static_cast<double>(q.size()), 0};
    }

    const double n = static_cast<double>(q.size());
    double mean = 0.0;
    for (double v : q) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : q) var += (v - mean) * (v - mean);
    var /= n;  // population
    const double threshold = 2.0 * std::sqrt(var);

    double sum = 0.0;
    int kept = 0, dropped = 0;
    for (double v : q) {
        if (std::abs(v - mean) > threshold) {
            ++dropped;
        } else {
            sum += v;
            ++kept;
        }
    }
    // kept >= 1 always: a value at the mean can never exceed the threshold
    return {sum / kept, dropped};
}

}  // namespace

CleanSnapshot clean_snapshot(const QuoteSnapshot& snap, CleanMode mode) {
    std::vector<double> bids, asks;
    bids.reserve(snap.quotes.size());
    asks.reserve(snap.quotes.size());
    for (const auto& q : snap.quotes) {
        bids.push_back(q.bid_bp);
        asks.push_back(q.ask_bp);
    }
    const auto b = clean_side(std::move(bids), mode);
    const auto a = clean_side(std::move(asks), mode);
    CleanSnapshot out;
    out.applicable_bid_bp = b.applicable;
    out.applicable_ask_bp = a.applicable;
    out.mid_bp = 0.5 * (b.applicable + a.applicable);
    out.bidask_bp = a.applicable - b.applicable;
    out.discarded_bid = b.discarded;
    out.discarded_ask = a.discarded;
    return out;
}

CleanSeries clean_series(const std::vector<QuoteSnapshot>& snaps, CleanMode mode,
                         CleanSummary* summary) {
    CleanSeries out;
    CleanSummary sum;
    out.timestamps.reserve(snaps.size());
    for (const auto& s : snaps) {
        const auto c = clean_snapshot(s, mode);
        out.timestamps.push_back(s.timestamp);
        out.mid_bp.push_back(c.mid_bp);
        out.bidask_bp.push_back(c.bidask_bp);
        sum.discarded_bid += c.discarded_bid;
        sum.discarded_ask += c.discarded_ask;
        if (c.bidask_bp < 0.0) ++sum.crossed_snapshots;
    }
    if (summary) *summary = sum;
    return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

LoadedQuotes load_quotes(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_quotes: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        return {};
    if (strip_cr(line) != "timestamp,dealer_id,bid_bp,ask_bp")
        throw std::runtime_error("load_quotes: unexpected header in " + path + ": '" + line + "'");

    // preserve first-seen order per timestamp while sorting timestamps
    std::map<Timestamp, std::vector<Quote>> by_ts;
    LoadedQuotes out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 4) {
            out.malformed.push_back("line " + std::to_string(line_no) + ": expected 4 fields");
            continue;
        }
        try {
            const Timestamp ts = parse_iso(f[0]);
            std::size_t pb = 0, pa = 0;
            const double bid = std::stod(f[2], &pb);
            const double ask = std::stod(f[3], &pa);
            if (pb != f[2].size() || pa != f[3].size())
                throw std::invalid_argument("trailing characters");
            if (bid <= 0.0 || ask <= 0.0)
                throw std::invalid_argument("non-positive quote");
            by_ts[ts].push_back({f[1], bid, ask});
        } catch (const std::exception& e) {
            out.malformed.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    out.snapshots.reserve(by_ts.size());
    for (auto& [ts, quotes] : by_ts) out.snapshots.push_back({ts, std::move(quotes)});
    return out;
}

void write_quotes_csv(const std::string& path, const std::vector<QuoteSnapshot>& snaps) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
        throw std::runtime_error("write_quotes_csv: cannot open " + path);
    std::fprintf(f, "timestamp,dealer_id,bid_bp,ask_bp\n");
    for (const auto& s : snaps)
        for (const auto& q : s.quotes)
            std::fprintf(f, "%s,%s,%.17g,%.17g\n", to_iso(s.timestamp).c_str(), q.dealer_id.c_str(),
                         q.bid_bp, q.ask_bp);
    std::fclose(f);
}

void write_clean_series_csv(const std::string& path, const CleanSeries& series) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f)
        throw std::runtime_error("write_clean_series_csv: cannot open " + path);
    std::fprintf(f, "timestamp,mid_bp,bidask_bp\n");
    for (std::size_t i = 0; i < series.size(); ++i)
        std::fprintf(f, "%s,%.17g,%.17g\n", to_iso(series.timestamps[i]).c_str(), series.mid_bp[i],
                     series.bidask_bp[i]);
    std::fclose(f);
}

CleanSeries load_clean_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_clean_series_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "timestamp,mid_bp,bidask_bp")
        throw std::runtime_error("load_clean_series_csv: unexpected header in " + path);
    CleanSeries out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 3)
            throw std::runtime_error("load_clean_series_csv: bad row at line " +
                                     std::to_string(line_no));
        const Timestamp ts = parse_iso(f[0]);
        if (!out.timestamps.empty() && ts <= out.timestamps.back())
            throw std::runtime_error("load_clean_series_csv: timestamps not increasing at line " +
                                     std::to_string(line_no));
        out.timestamps.push_back(ts);
        out.mid_bp.push_back(std::stod(f[1]));
        out.bidask_bp.push_back(std::stod(f[2]));
    }
    return out;
}

namespace {

std::vector<int> slot_offsets(int steps_per_day) {
    std::vector<int> out(static_cast<std::size_t>(steps_per_day));
    for (int k = 0; k < steps_per_day; ++k)
        out[static_cast<std::size_t>(k)] =
            static_cast<int>(std::lround(480.0 * k / (steps_per_day - 1)));
    return out;
}

}  // namespace

std::vector<EpisodeSlice> slice_episodes(const CleanSeries& series, int n_days, int steps_per_day,
                                         SliceReport* report) {
    if (n_days < 1 || steps_per_day < 2)
        throw std::invalid_argument("slice_episodes: bad window shape");
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series.timestamps[i] <= series.timestamps[i - 1])
            throw std::invalid_argument("slice_episodes: series timestamps not increasing");

    std::vector<std::chrono::sys_days> days;
    for (const auto& ts : series.timestamps) {
        const auto d = ts.date();
        if (days.empty() || d != days.back()) days.push_back(d);
    }

    const auto offsets = slot_offsets(steps_per_day);
    SliceReport rep;
    std::vector<EpisodeSlice> out;

    const std::size_t n_windows = days.size() / static_cast<std::size_t>(n_days);
    rep.dropped_trailing_days = static_cast<int>(days.size() % static_cast<std::size_t>(n_days));

    for (std::size_t w = 0; w < n_windows; ++w) {
        EpisodeSlice ep;
        std::vector<Timestamp> slots;
        slots.reserve(static_cast<std::size_t>(n_days) * offsets.size());
        for (int d = 0; d < n_days; ++d) {
            const Timestamp open =
                Timestamp::from_date(days[w * static_cast<std::size_t>(n_days) +
                                          static_cast<std::size_t>(d)], 9, 30);
            for (int off : offsets) slots.push_back(open.plus_minutes(off));
        }

        bool ok = true;
        int fills = 0;
        std::size_t cursor = 0;  // index of first series point > slot
        for (const auto& slot : slots) {
            while (cursor < series.size() && series.timestamps[cursor] <= slot) ++cursor;
            if (cursor == 0) {
                ok = false;  // slot precedes all data: nothing to fill from
                break;
            }
            const std::size_t src = cursor - 1;
            if (series.timestamps[src] != slot) ++fills;
            ep.spreads.push_back(series.mid_bp[src] * 1e-4);
            ep.bidask_bp.push_back(series.bidask_bp[src]);
        }
        if (!ok) {
            ++rep.skipped_windows;
            continue;
        }
        ep.grid = grid_from_timestamps(slots, steps_per_day);
        rep.filled_points += fills;
        out.push_back(std::move(ep));
    }

    rep.episodes = static_cast<int>(out.size());
    if (report) *report = rep;
    if (out.empty())
        throw std::runtime_error("slice_episodes: series too short for a complete episode");
    return out;
}

double transaction_cost(double notional, double spread, Timestamp t, double ba_bp, Side side,
                        const IndexSpec& spec) {
    if (notional < 0.0)
        throw std::invalid_argument("transaction_cost: negative notional");
    if (ba_bp < 0.0)
        throw std::invalid_argument("transaction_cost: negative bid-ask");
    if (notional == 0.0 || ba_bp == 0.0) return 0.0;
    const double half = 0.5 * ba_bp * 1e-4;
    const double bumped = side == Side::buy_protection ? spread + half : spread - half;
    return notional * std::abs(upfront(bumped, t, spec) - upfront(spread, t, spec));
}

}  // namespace cdxhedge
