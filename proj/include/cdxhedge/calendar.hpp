#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cdxhedge {

/// Minute-resolution point in time. All times are wall-clock CET; there is no
/// time-zone handling anywhere in the library.
class Timestamp {
public:
    Timestamp() = default;

    static Timestamp from_ymd_hm(int year, unsigned month, unsigned day,
                                 int hour = 0, int minute = 0);
    static Timestamp from_date(std::chrono::sys_days d, int hour = 0, int minute = 0);

    std::chrono::sys_days date() const;
    int hour() const;
    int minute() const;
    int minute_of_day() const;
    std::chrono::weekday weekday() const;
    bool is_weekend() const;

    std::int64_t minutes_since_epoch() const { return minutes_; }

    Timestamp plus_minutes(std::int64_t m) const { return Timestamp(minutes_ + m); }
    Timestamp plus_days(int d) const { return Timestamp(minutes_ + 1440LL * d); }

    auto operator<=>(const Timestamp&) const = default;

private:
    explicit Timestamp(std::int64_t minutes) : minutes_(minutes) {}
    std::int64_t minutes_ = 0;
};

/// Whole calendar days from the date of `a` to the date of `b` (time of day ignored).
int days_between(Timestamp a, Timestamp b);

/// Elapsed wall-clock hours from `a` to `b`.
double hours_between(Timestamp a, Timestamp b);

enum class DayCount { act360, act365 };

/// Elapsed time between two instants as a year fraction, at minute resolution.
/// Rejects d1 > d2.
double year_fraction(Timestamp d1, Timestamp d2, DayCount convention);

/// "YYYY-MM-DDTHH:MM"
std::string to_iso(Timestamp t);
Timestamp parse_iso(const std::string& s);

/// Decision grid of one hedging episode: `steps_per_day` points per trading
/// day inside the 09:30-17:30 window, weekends skipped. At 17 steps per day
/// the intraday gap is exactly 30 minutes and the overnight gap is 16 + 24n
/// hours across n skipped non-trading days.
struct TradingGrid {
    std::vector<Timestamp> points;
    std::vector<double> step_hours;  ///< elapsed hours per transition, size() - 1 entries
    std::vector<int> day_index;      ///< trading-day ordinal of each point
    int steps_per_day = 0;

    std::size_t size() const { return points.size(); }
    Timestamp front() const { return points.front(); }
    Timestamp back() const { return points.back(); }
};

TradingGrid build_episode_grid(Timestamp start_date, int n_days, int steps_per_day);

/// Grid over explicitly given timestamps (real-data episodes). Validates strict
/// ordering and fills in elapsed hours and day indices.
TradingGrid grid_from_timestamps(std::span<const Timestamp> points, int steps_per_day);

/// One premium-leg period: coupon pays on `pay`, accrues from `accrual_start`
/// (the preceding coupon date, which may lie before the evaluation time).
struct CouponPeriod {
    Timestamp accrual_start;
    Timestamp pay;
};

/// Coupon dates remaining in (t + 1 day, t_n]. Payment dates fall on the 20th
/// of Mar/Jun/Sep/Dec or the weekday immediately thereafter; the maturity date
/// itself is never adjusted.
struct CouponSchedule {
    std::vector<CouponPeriod> periods;
    Timestamp maturity;

    bool empty() const { return periods.empty(); }
};

CouponSchedule coupon_schedule(Timestamp t, Timestamp maturity);

/// Latest adjusted coupon date on or before t (accrual anchor of the upfront).
Timestamp previous_coupon_date(Timestamp t);

}  // namespace cdxhedge
