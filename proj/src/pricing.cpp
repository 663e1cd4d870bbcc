#include "cdxhedge/pricing.hpp"

#include <cmath>
#include <stdexcept>

namespace cdxhedge {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double survival_probability(double spread, Timestamp t, Timestamp theta, double lgd) {
    if (lgd <= 0.0)
        throw std::invalid_argument("survival_probability: LGD must be positive");
    if (theta < t)
        throw std::invalid_argument("survival_probability: horizon before evaluation time");
    if (spread < 0.0)
        throw std::invalid_argument("survival_probability: negative spread");
    return std::exp(-spread * year_fraction(t, theta, DayCount::act360) / lgd);
}

double annuity(double spread, Timestamp t, const CouponSchedule& schedule, double lgd) {
    if (schedule.empty())
        throw std::invalid_argument("annuity: empty coupon schedule");
    double a = 0.0;
    for (const auto& p : schedule.periods) {
        const Timestamp start = std::max(p.accrual_start, t);
        const double tau = year_fraction(start, p.pay, DayCount::act360);
        const double ps = survival_probability(spread, t, start, lgd);
        const double pe = survival_probability(spread, t, p.pay, lgd);
        a += tau * 0.5 * (ps + pe);
    }
    return a;
}

namespace {

double accrual_term(Timestamp t) {
    const Timestamp t_acc = previous_coupon_date(t);
    const int days = days_between(t_acc, t);
    if (days == 0) return 0.0;
    return (days + 1) / 360.0;  // accrual counts an extra day
}

}  // namespace

double upfront(double spread, Timestamp t, const IndexSpec& spec) {
    if (t >= spec.maturity)
        throw std::invalid_argument("upfront: evaluation time at or past maturity");
    const auto sched = coupon_schedule(t, spec.maturity);
    const double a = annuity(spread, t, sched, spec.lgd);
    return (spec.coupon - spread) * a + spec.coupon * accrual_term(t);
}

double adjusted_forward(double spread, Timestamp t, Timestamp expiry, const IndexSpec& spec) {
    if (t >= expiry)
        throw std::invalid_argument("adjusted_forward: expiry not after evaluation time");
    if (expiry > spec.maturity)
        throw std::invalid_argument("adjusted_forward: expiry past index maturity");
    const auto sched = coupon_schedule(expiry, spec.maturity);  // throws at expiry == maturity
    const double a = annuity(spread, expiry, sched, spec.lgd);
    const double p = survival_probability(spread, t, expiry, spec.lgd);
    return spread + spec.lgd * (1.0 - p) / a;
}

double option_price(OptionKind kind, const MarketState& mkt, const OptionSpec& opt,
                    const IndexSpec& spec) {
    if (mkt.t > opt.expiry)
        throw std::invalid_argument("option_price: evaluation time past expiry");
    if (opt.strike <= 0.0 || opt.sigma <= 0.0)
        throw std::invalid_argument("option_price: strike and sigma must be positive");
    const auto sched = coupon_schedule(opt.expiry, spec.maturity);
    const double a = annuity(mkt.spread, opt.expiry, sched, spec.lgd);
    const double tau = year_fraction(mkt.t, opt.expiry, DayCount::act365);

    if (tau <= 0.0) {
        const double intrinsic = kind == OptionKind::payer
                                     ? std::max(mkt.spread - opt.strike, 0.0)
                                     : std::max(opt.strike - mkt.spread, 0.0);
        return intrinsic * a * opt.notional;
    }

    const double f = adjusted_forward(mkt.spread, mkt.t, opt.expiry, spec);
    const double sq = opt.sigma * std::sqrt(tau);
    const double d = (std::log(f / opt.strike) + 0.5 * opt.sigma * opt.sigma * tau) / sq;
    const double e = d - sq;
    const double unit = kind == OptionKind::payer
                            ? norm_cdf(d) * f - norm_cdf(e) * opt.strike
                            : norm_cdf(-e) * opt.strike - norm_cdf(-d) * f;
    return unit * a * opt.notional;
}

double hedge_ratio(const MarketState& mkt, const OptionSpec& opt, const IndexSpec& spec) {
    const double up = option_price(opt.kind, {mkt.t, mkt.spread + kSpreadBump}, opt, spec);
    const double dn = option_price(opt.kind, {mkt.t, mkt.spread - kSpreadBump}, opt, spec);
    // protection-buyer position value is -upfront, so the denominator flips sign
    const double vup = -upfront(mkt.spread + kSpreadBump, mkt.t, spec);
    const double vdn = -upfront(mkt.spread - kSpreadBump, mkt.t, spec);
    const double denom = vup - vdn;
    if (std::abs(denom) < 1e-12 * 2.0 * kSpreadBump)
        throw std::runtime_error("hedge_ratio: degenerate upfront sensitivity");
    return (up - dn) / (denom * opt.notional);
}

}  // namespace cdxhedge
