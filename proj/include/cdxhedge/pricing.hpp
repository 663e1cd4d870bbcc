#pragma once

#include "cdxhedge/calendar.hpp"

namespace cdxhedge {

/// Static contract terms of the CDS index.
struct IndexSpec {
    Timestamp maturity;      ///< IMM maturity date (20 Jun / 20 Dec), taken at midnight
    double coupon = 0.01;    ///< standardized running coupon, per annum
    double lgd = 0.60;       ///< loss given default
    double notional = 100e6; ///< EUR
};

enum class OptionKind { payer, receiver };

struct OptionSpec {
    OptionKind kind = OptionKind::payer;
    double strike = 0.01;   ///< spread, decimal (0.01 = 100 bp)
    Timestamp expiry;
    double sigma = 0.60;    ///< annualized lognormal volatility
    double notional = 100e6;
};

struct MarketState {
    Timestamp t;
    double spread = 0.01;   ///< decimal
};

/// Standard normal CDF via erfc, good to ~1e-16.
double norm_cdf(double x);

/// P_S(t, theta) = exp(-S tau(t,theta)/LGD), tau in ACT/360.
double survival_probability(double spread, Timestamp t, Timestamp theta, double lgd);

/// Risky annuity over the schedule's coupon periods, evaluated at time t:
/// sum of tau(max(start, t), pay) * (P(t, max(start,t)) + P(t, pay)) / 2.
double annuity(double spread, Timestamp t, const CouponSchedule& schedule, double lgd);

/// Index upfront as a fraction of notional, received by the protection buyer:
/// (c - S) A_S(t) + c * accrual, accrual using whole days + 1 extra, ACT/360.
double upfront(double spread, Timestamp t, const IndexSpec& spec);

/// Forward spread adjusted for protection running from trade time (front
/// protection add-on over the annuity of the delivered index).
double adjusted_forward(double spread, Timestamp t, Timestamp expiry, const IndexSpec& spec);

/// Black price in EUR of a payer/receiver option on the adjusted forward.
/// At zero time to expiry returns the intrinsic value.
double option_price(OptionKind kind, const MarketState& mkt, const OptionSpec& opt,
                    const IndexSpec& spec);

/// Finite-difference bump used for all spread sensitivities: 0.01 bp.
inline constexpr double kSpreadBump = 1e-6;

/// Delta hedge: notional fraction of the index offsetting the option's spread
/// sensitivity. Computed as the ratio of central finite differences of the
/// option price and of the protection-buyer position value (-upfront), so a
/// payer maps into [0, 1]. Throws when the upfront sensitivity is degenerate.
double hedge_ratio(const MarketState& mkt, const OptionSpec& opt, const IndexSpec& spec);

}  // namespace cdxhedge
