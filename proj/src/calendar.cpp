#include "cdxhedge/calendar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cdxhedge {

namespace {

constexpr std::int64_t kMinutesPerDay = 1440;

std::int64_t minutes_of(std::chrono::sys_days d, int hour, int minute) {
    return static_cast<std::int64_t>(d.time_since_epoch().count()) * kMinutesPerDay +
           hour * 60 + minute;
}

}  // namespace

Timestamp Timestamp::from_ymd_hm(int year, unsigned month, unsigned day, int hour, int minute) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok())
        throw std::invalid_argument("invalid calendar date");
    if (hour < 0 || hour > 23 || minute < 0 || minute > 59)
        throw std::invalid_argument("invalid time of day");
    return Timestamp(minutes_of(sys_days{ymd}, hour, minute));
}

Timestamp Timestamp::from_date(std::chrono::sys_days d, int hour, int minute) {
    return Timestamp(minutes_of(d, hour, minute));
}

std::chrono::sys_days Timestamp::date() const {
    // floor division handles pre-epoch minutes too
    std::int64_t days = minutes_ / kMinutesPerDay;
    if (minutes_ % kMinutesPerDay < 0) --days;
    return std::chrono::sys_days{std::chrono::days{days}};
}

int Timestamp::minute_of_day() const {
    std::int64_t m = minutes_ % kMinutesPerDay;
    if (m < 0) m += kMinutesPerDay;
    return static_cast<int>(m);
}

int Timestamp::hour() const { return minute_of_day() / 60; }
int Timestamp::minute() const { return minute_of_day() % 60; }

std::chrono::weekday Timestamp::weekday() const { return std::chrono::weekday{date()}; }

bool Timestamp::is_weekend() const {
    auto wd = weekday();
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

int days_between(Timestamp a, Timestamp b) {
    return static_cast<int>((b.date() - a.date()).count());
}

double hours_between(Timestamp a, Timestamp b) {
    return static_cast<double>(b.minutes_since_epoch() - a.minutes_since_epoch()) / 60.0;
}

double year_fraction(Timestamp d1, Timestamp d2, DayCount convention) {
    if (d1 > d2)
        throw std::invalid_argument("year_fraction: d1 > d2");
    const double denom = convention == DayCount::act360 ? 360.0 : 365.0;
    const double days =
        static_cast<double>(d2.minutes_since_epoch() - d1.minutes_since_epoch()) / 1440.0;
    return days / denom;
}

std::string to_iso(Timestamp t) {
    using namespace std::chrono;
    year_month_day ymd{t.date()};
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), t.hour(),
                  t.minute());
    return buf;
}

Timestamp parse_iso(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    char sep = 0;
    int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d", &y, &mo, &d, &sep, &h, &mi);
    if (n == 3)
        return Timestamp::from_ymd_hm(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
    if (n == 6 && (sep == 'T' || sep == ' '))
        return Timestamp::from_ymd_hm(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi);
    throw std::invalid_argument("unparsable timestamp: '" + s + "'");
}

namespace {

// Intraday offsets in minutes from 09:30 across the 480-minute trading window,
// endpoints pinned at 09:30 and 17:30.
std::vector<int> intraday_offsets(int steps_per_day) {
    std::vector<int> out(static_cast<std::size_t>(steps_per_day));
    for (int k = 0; k < steps_per_day; ++k)
        out[static_cast<std::size_t>(k)] =
            static_cast<int>(std::lround(480.0 * k / (steps_per_day - 1)));
    return out;
}

void finish_grid(TradingGrid& g) {
    g.step_hours.resize(g.points.size() > 0 ? g.points.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < g.points.size(); ++i)
        g.step_hours[i] = hours_between(g.points[i], g.points[i + 1]);
}

}  // namespace

TradingGrid build_episode_grid(Timestamp start_date, int n_days, int steps_per_day) {
    if (n_days < 1)
        throw std::invalid_argument("build_episode_grid: n_days must be >= 1");
    if (steps_per_day < 2)
        throw std::invalid_argument("build_episode_grid: steps_per_day must be >= 2");
    if (start_date.is_weekend())
        throw std::invalid_argument("build_episode_grid: start_date falls on a weekend");

    const auto offsets = intraday_offsets(steps_per_day);
    TradingGrid g;
    g.steps_per_day = steps_per_day;
    g.points.reserve(static_cast<std::size_t>(n_days) * offsets.size());
    g.day_index.reserve(g.points.capacity());

    Timestamp day = Timestamp::from_date(start_date.date(), 9, 30);
    for (int d = 0; d < n_days; ++d) {
        while (day.is_weekend()) day = day.plus_days(1);
        for (int off : offsets) {
            g.points.push_back(day.plus_minutes(off));
            g.day_index.push_back(d);
        }
        day = day.plus_days(1);
    }
    finish_grid(g);
    return g;
}

TradingGrid grid_from_timestamps(std::span<const Timestamp> points, int steps_per_day) {
    if (points.empty())
        throw std::invalid_argument("grid_from_timestamps: empty point set");
    TradingGrid g;
    g.steps_per_day = steps_per_day;
    g.points.assign(points.begin(), points.end());
    g.day_index.resize(g.points.size());
    int day = 0;
    for (std::size_t i = 0; i < g.points.size(); ++i) {
        if (i > 0) {
            if (g.points[i] <= g.points[i - 1])
                throw std::invalid_argument("grid_from_timestamps: timestamps not increasing");
            if (g.points[i].date() != g.points[i - 1].date()) ++day;
        }
        g.day_index[i] = day;
    }
    finish_grid(g);
    return g;
}

namespace {

// 20th of the month, rolled to Monday when it falls on a weekend.
std::chrono::sys_days adjusted_imm(int year, unsigned month) {
    using namespace std::chrono;
    sys_days d{year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{20}}};
    weekday wd{d};
    if (wd == Saturday) return d + days{2};
    if (wd == Sunday) return d + days{1};
    return d;
}

bool is_imm_month(unsigned m) { return m == 3 || m == 6 || m == 9 || m == 12; }

// Unadjusted IMM anchor (year, month) strictly before the given one.
void previous_anchor(int& year, unsigned& month) {
    if (month == 3) {
        month = 12;
        --year;
    } else {
        month -= 3;
    }
}

void next_anchor(int& year, unsigned& month) {
    if (month == 12) {
        month = 3;
        ++year;
    } else {
        month += 3;
    }
}

// Latest unadjusted anchor whose 20th is <= the date of t.
void anchor_at_or_before(Timestamp t, int& year, unsigned& month) {
    using namespace std::chrono;
    year_month_day ymd{t.date()};
    year = static_cast<int>(ymd.year());
    unsigned m = static_cast<unsigned>(ymd.month());
    month = (m / 3) * 3;  // nearest IMM month at or below m
    if (month == 0) {
        month = 12;
        --year;
    }
    if (static_cast<unsigned>(ymd.month()) == month && static_cast<unsigned>(ymd.day()) < 20)
        previous_anchor(year, month);
}

}  // namespace

CouponSchedule coupon_schedule(Timestamp t, Timestamp maturity) {
    if (t >= maturity)
        throw std::invalid_argument("coupon_schedule: evaluation time at or past maturity");
    {
        using namespace std::chrono;
        year_month_day m{maturity.date()};
        if (static_cast<unsigned>(m.day()) != 20 || !is_imm_month(static_cast<unsigned>(m.month())))
            throw std::invalid_argument("coupon_schedule: maturity is not an IMM date");
    }

    // Walk the quarterly anchors from just before t up to maturity. Intermediate
    // dates are weekend-adjusted; the maturity date is taken as-is.
    int year;
    unsigned month;
    anchor_at_or_before(t, year, month);
    previous_anchor(year, month);  // one extra so the first period start is available

    const Timestamp t_plus = t.plus_days(1);
    CouponSchedule sched;
    sched.maturity = Timestamp::from_date(maturity.date());

    const auto maturity_date = maturity.date();
    Timestamp prev = Timestamp::from_date(adjusted_imm(year, month));
    for (;;) {
        next_anchor(year, month);
        const std::chrono::sys_days anchor{std::chrono::year_month_day{
            std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{20}}};
        const bool final_coupon = anchor == maturity_date;
        Timestamp pay =
            final_coupon ? Timestamp::from_date(maturity_date) : Timestamp::from_date(adjusted_imm(year, month));
        if (pay.date() > maturity_date) break;
        if (pay > t_plus)
            sched.periods.push_back({prev, pay});
        prev = pay;
        if (final_coupon) break;
    }
    return sched;
}

Timestamp previous_coupon_date(Timestamp t) {
    int year;
    unsigned month;
    anchor_at_or_before(t, year, month);
    Timestamp day_of_t = Timestamp::from_date(t.date());
    // The adjusted date may roll past t (e.g. a Saturday 20th seen on the 21st):
    // step back until the adjusted coupon date is truly on or before t.
    for (;;) {
        Timestamp adj = Timestamp::from_date(adjusted_imm(year, month));
        if (adj <= day_of_t) return adj;
        previous_anchor(year, month);
    }
}

}  // namespace cdxhedge
