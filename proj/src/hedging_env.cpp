#include "cdxhedge/hedging_env.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace cdxhedge {

namespace {

double accrual_term(Timestamp t) {
    const Timestamp t_acc = previous_coupon_date(t);
    const int days = days_between(t_acc, t);
    if (days == 0) return 0.0;
    return (days + 1) / 360.0;  // accrual counts an extra day
}

}  // namespace

PricingTable::PricingTable(const IndexSpec& index, const OptionSpec& option,
                           const TradingGrid& grid)
    : index_(index), option_(option) {
    if (grid.size() == 0) throw std::invalid_argument("PricingTable: empty grid");
    if (option.expiry != grid.points.back())
        throw std::invalid_argument("PricingTable: option expiry must be the last grid point");
    if (option.expiry >= index.maturity)
        throw std::invalid_argument("PricingTable: expiry at or past index maturity");

    const auto sched_t = [&](Timestamp t) {
        const auto sched = coupon_schedule(t, index.maturity);
        std::vector<Period> out;
        out.reserve(sched.periods.size());
        for (const auto& p : sched.periods) {
            const Timestamp start = std::max(p.accrual_start, t);
            out.push_back({year_fraction(start, p.pay, DayCount::act360),
                           year_fraction(t, start, DayCount::act360),
                           year_fraction(t, p.pay, DayCount::act360)});
        }
        return out;
    };

    expiry_coupons_ = sched_t(option.expiry);
    points_.reserve(grid.size());
    for (const Timestamp t : grid.points) {
        Point pt;
        pt.coupons = sched_t(t);
        pt.accr = accrual_term(t);
        pt.tau365 = year_fraction(t, option.expiry, DayCount::act365);
        pt.yf_fwd = year_fraction(t, option.expiry, DayCount::act360);
        points_.push_back(std::move(pt));
    }
}

double PricingTable::annuity_of(const std::vector<Period>& periods, double spread) const {
    // same expression order as pricing::annuity so values match bitwise
    double a = 0.0;
    for (const auto& p : periods) {
        const double ps = std::exp(-spread * p.yf_start / index_.lgd);
        const double pe = std::exp(-spread * p.yf_pay / index_.lgd);
        a += p.tau * 0.5 * (ps + pe);
    }
    return a;
}

double PricingTable::upfront(std::size_t k, double spread) const {
    const Point& pt = points_[k];
    const double a = annuity_of(pt.coupons, spread);
    return (index_.coupon - spread) * a + index_.coupon * pt.accr;
}

double PricingTable::pay(std::size_t k, double spread) const {
    const Point& pt = points_[k];
    const double a = annuity_of(expiry_coupons_, spread);
    const double tau = pt.tau365;

    if (tau <= 0.0) return std::max(spread - option_.strike, 0.0) * a * option_.notional;

    const double p = std::exp(-spread * pt.yf_fwd / index_.lgd);
    const double f = spread + index_.lgd * (1.0 - p) / a;
    const double sq = option_.sigma * std::sqrt(tau);
    const double d = (std::log(f / option_.strike) + 0.5 * option_.sigma * option_.sigma * tau) / sq;
    const double e = d - sq;
    return (norm_cdf(d) * f - norm_cdf(e) * option_.strike) * a * option_.notional;
}

double PricingTable::hedge_ratio(std::size_t k, double spread) const {
    const double up = pay(k, spread + kSpreadBump);
    const double dn = pay(k, spread - kSpreadBump);
    const double vup = -upfront(k, spread + kSpreadBump);
    const double vdn = -upfront(k, spread - kSpreadBump);
    const double denom = vup - vdn;
    if (std::abs(denom) < 1e-12 * 2.0 * kSpreadBump)
        throw std::runtime_error("hedge_ratio: degenerate upfront sensitivity");
    return (up - dn) / (denom * option_.notional);
}

double PricingTable::trade_cost(std::size_t k, double spread, double notional, double bidask_bp,
                                Side side) const {
    if (notional < 0.0) throw std::invalid_argument("trade_cost: negative notional");
    if (bidask_bp < 0.0) throw std::invalid_argument("trade_cost: negative bid/ask width");
    if (notional == 0.0 || bidask_bp == 0.0) return 0.0;
    const double half = 0.5 * bidask_bp * 1e-4;
    const double traded = side == Side::buy_protection ? spread + half : spread - half;
    return notional * std::abs(upfront(k, traded) - upfront(k, spread));
}

HedgingEnv::HedgingEnv(EnvConfig config, std::vector<double> spreads,
                       std::shared_ptr<const PricingTable> table)
    : config_(std::move(config)), spreads_(std::move(spreads)), table_(std::move(table)) {
    if (spreads_.size() != config_.grid.size())
        throw std::invalid_argument("HedgingEnv: path length does not match the grid");
    if (config_.grid.size() < 2)
        throw std::invalid_argument("HedgingEnv: need at least two grid points");
    if (!config_.cost.bidask_bp.empty() && config_.cost.bidask_bp.size() != config_.grid.size())
        throw std::invalid_argument("HedgingEnv: bid/ask series length does not match the grid");
    if (!table_)
        table_ = std::make_shared<PricingTable>(config_.index, config_.option, config_.grid);
}

EnvState HedgingEnv::reset() {
    cursor_ = 0;
    EnvState s;
    s.spread = spreads_[0];
    s.pay_eur = table_->pay(0, s.spread);
    s.n_h = table_->hedge_ratio(0, s.spread);
    s.a_prev = 0.0;  // flat start
    return s;
}

StepResult HedgingEnv::step(const EnvState& state, double action) {
    StepResult r = step_from(cursor_, state, action);
    ++cursor_;
    return r;
}

StepResult HedgingEnv::step_from(std::size_t k, const EnvState& state, double action) const {
    if (k + 1 >= config_.grid.size()) throw std::logic_error("HedgingEnv: episode is done");
    if (std::isnan(action)) throw std::invalid_argument("HedgingEnv: action is NaN");

    const double a = std::min(std::max(action, 0.0), 1.0);
    const double sign = config_.position_sign == PositionSign::short_option ? -1.0 : 1.0;
    const double n_index = config_.index.notional;
    const bool terminal = k + 2 == config_.grid.size();

    // rebalance at the decision point, against this point's bid/ask
    double cost = 0.0;
    const double delta_a = a - state.a_prev;
    if (delta_a != 0.0) {
        // for a short option the hedge is bought protection, so increasing the
        // position buys; the long convention sells protection instead
        const bool up = (delta_a > 0.0) == (sign < 0.0);
        cost += table_->trade_cost(k, state.spread, std::abs(delta_a) * n_index,
                                   config_.cost.at(k),
                                   up ? Side::buy_protection : Side::sell_protection);
    }

    const double s_next = spreads_[k + 1];
    const double pay_next = table_->pay(k + 1, s_next);  // intrinsic at expiry
    const double upf_now = table_->upfront(k, state.spread);
    const double upf_next = table_->upfront(k + 1, s_next);

    if (terminal && a != 0.0) {
        // unwind the hedge at the final point's quote
        const bool held_long_protection = sign < 0.0;
        cost += table_->trade_cost(k + 1, s_next, a * n_index, config_.cost.at(k + 1),
                                   held_long_protection ? Side::sell_protection
                                                        : Side::buy_protection);
    }

    StepResult r;
    r.option_pnl_eur = sign * (pay_next - state.pay_eur);
    r.hedge_pnl_eur = -sign * a * n_index * (upf_next - upf_now);
    r.cost_eur = cost;
    r.reward_eur = r.option_pnl_eur - r.hedge_pnl_eur - r.cost_eur;
    r.done = terminal;
    r.next.spread = s_next;
    r.next.pay_eur = pay_next;
    r.next.n_h = table_->hedge_ratio(k + 1, s_next);
    r.next.a_prev = a;
    return r;
}

double EpisodeRecord::total_pnl_eur() const {
    double s = 0.0;
    for (double r : rewards_eur) s += r;
    return s;
}

EpisodeRecord run_policy(const PolicyFn& policy, const EnvConfig& config,
                         const std::vector<double>& spreads,
                         std::shared_ptr<const PricingTable> table) {
    HedgingEnv env(config, spreads, std::move(table));
    EpisodeRecord rec;
    const std::size_t n = env.n_steps();
    rec.states.reserve(n + 1);
    rec.actions.reserve(n);
    rec.rewards_eur.reserve(n);
    rec.costs_eur.reserve(n);
    rec.option_pnl_eur.reserve(n);
    rec.hedge_pnl_eur.reserve(n);

    EnvState s = env.reset();
    rec.states.push_back(s);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = policy(s);
        const StepResult r = env.step(s, a);
        rec.actions.push_back(std::min(std::max(a, 0.0), 1.0));
        rec.rewards_eur.push_back(r.reward_eur);
        rec.costs_eur.push_back(r.cost_eur);
        rec.option_pnl_eur.push_back(r.option_pnl_eur);
        rec.hedge_pnl_eur.push_back(r.hedge_pnl_eur);
        s = r.next;
        rec.states.push_back(s);
    }
    return rec;
}

double delta_hedge_policy(const EnvState& state) {
    return std::min(std::max(state.n_h, 0.0), 1.0);
}

void write_episode_csv(const std::string& file, const EpisodeRecord& rec,
                       const TradingGrid& grid) {
    if (rec.states.size() != grid.size() || rec.actions.size() + 1 != rec.states.size())
        throw std::invalid_argument("write_episode_csv: record does not match the grid");
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("write_episode_csv: cannot open " + file);
    std::fprintf(f, "step,timestamp,spread_bp,action,reward_eur,cost_eur\n");
    for (std::size_t k = 0; k < rec.actions.size(); ++k) {
        std::fprintf(f, "%zu,%s,%.17g,%.17g,%.17g,%.17g\n", k, to_iso(grid.points[k]).c_str(),
                     rec.states[k].spread * 1e4, rec.actions[k], rec.rewards_eur[k],
                     rec.costs_eur[k]);
    }
    std::fclose(f);
}

}  // namespace cdxhedge
