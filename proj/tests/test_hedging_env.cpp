#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "cdxhedge/hedging_env.hpp"

using namespace cdxhedge;

namespace {

const Timestamp kStart = Timestamp::from_ymd_hm(2025, 6, 23, 9, 30);
const Timestamp kMaturity = Timestamp::from_ymd_hm(2030, 6, 20);

EnvConfig paper_config(int n_days = 40, int spd = 17, double bidask_bp = 0.0,
                       PositionSign ps = PositionSign::short_option) {
    EnvConfig cfg;
    cfg.grid = build_episode_grid(kStart, n_days, spd);
    cfg.index = IndexSpec{kMaturity, 0.01, 0.60, 100e6};
    cfg.option = OptionSpec{OptionKind::payer, 0.01, cfg.grid.points.back(), 0.60, 100e6};
    cfg.cost.constant_bidask_bp = bidask_bp;
    cfg.position_sign = ps;
    return cfg;
}

std::vector<double> gbm_path(const TradingGrid& grid, std::uint64_t seed, std::uint64_t path_id) {
    GbmParams p;
    auto paths = simulate_gbm(p, grid, seed, static_cast<int>(path_id) + 1);
    return paths[path_id].spreads;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("pricing table reproduces the pricing module bitwise") {
    auto cfg = paper_config(5, 5);
    PricingTable table(cfg.index, cfg.option, cfg.grid);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.002, 0.05);
    for (std::size_t k = 0; k < cfg.grid.size(); k += 7) {
        const Timestamp t = cfg.grid.points[k];
        for (int i = 0; i < 40; ++i) {
            const double s = u(rng);
            CHECK(table.upfront(k, s) == upfront(s, t, cfg.index));
            CHECK(table.pay(k, s) == option_price(OptionKind::payer, {t, s}, cfg.option, cfg.index));
            CHECK(table.hedge_ratio(k, s) == hedge_ratio({t, s}, cfg.option, cfg.index));
            CHECK(table.trade_cost(k, s, 10e6, 1.0, Side::buy_protection) ==
                  transaction_cost(10e6, s, t, 1.0, Side::buy_protection, cfg.index));
        }
    }
}

TEST_CASE("reset produces the paper's initial option value and a flat book") {
    auto cfg = paper_config();
    HedgingEnv env(cfg, std::vector<double>(cfg.grid.size(), 0.01));
    auto s0 = env.reset();
    CHECK(s0.spread == 0.01);
    CHECK(s0.pay_eur == doctest::Approx(515492.9624949644).epsilon(1e-12));
    CHECK(s0.pay_eur ==
          option_price(OptionKind::payer, {kStart, 0.01}, cfg.option, cfg.index));
    CHECK(s0.n_h == doctest::Approx(0.596293644919378).epsilon(1e-12));
    CHECK(s0.n_h > 0.0);
    CHECK(s0.n_h < 1.0);
    CHECK(s0.a_prev == 0.0);
}

TEST_CASE("constructor validation") {
    auto cfg = paper_config();
    CHECK_THROWS(HedgingEnv(cfg, std::vector<double>(cfg.grid.size() - 1, 0.01)));
    auto bad = cfg;
    bad.cost.bidask_bp.assign(cfg.grid.size() + 3, 1.0);
    CHECK_THROWS(HedgingEnv(bad, std::vector<double>(cfg.grid.size(), 0.01)));
    auto wrong_expiry = cfg;
    wrong_expiry.option.expiry = cfg.grid.points[cfg.grid.size() - 2];
    CHECK_THROWS(HedgingEnv(wrong_expiry, std::vector<double>(cfg.grid.size(), 0.01)));
}

TEST_CASE("zero policy accrues the unhedged accounting identity") {
    auto cfg = paper_config();
    auto spreads = gbm_path(cfg.grid, 11, 0);
    auto rec = run_policy([](const EnvState&) { return 0.0; }, cfg, spreads);

    const double premium = rec.states.front().pay_eur;
    const double intrinsic = rec.states.back().pay_eur;
    CHECK(rec.total_pnl_eur() ==
          doctest::Approx(premium - intrinsic).epsilon(1e-9));  // short convention
    for (double c : rec.costs_eur) CHECK(c == 0.0);

    auto long_cfg = paper_config(40, 17, 0.0, PositionSign::long_option);
    auto rec_long = run_policy([](const EnvState&) { return 0.0; }, long_cfg, spreads);
    CHECK(rec_long.total_pnl_eur() == doctest::Approx(-rec.total_pnl_eur()).epsilon(1e-9));
}

TEST_CASE("no-move no-trade step leaves only time decay") {
    auto cfg = paper_config();
    std::vector<double> flat(cfg.grid.size(), 0.01);
    HedgingEnv env(cfg, flat);
    auto s0 = env.reset();
    auto r = env.step(s0, 0.0);
    CHECK(r.cost_eur == 0.0);
    CHECK(r.hedge_pnl_eur == 0.0);
    CHECK(r.reward_eur == r.option_pnl_eur);
    CHECK(r.reward_eur != 0.0);  // theta survives
    CHECK(r.reward_eur > 0.0);   // short option collects decay
}

TEST_CASE("rebalance cost matches the quote-displacement oracle") {
    auto cfg = paper_config(40, 17, 1.0);
    std::vector<double> flat(cfg.grid.size(), 0.01);
    HedgingEnv env(cfg, flat);
    auto s0 = env.reset();
    // buying 0.10 of the index from a flat book costs the 10 mln displacement
    auto r = env.step(s0, 0.10);
    const Timestamp t0 = cfg.grid.points[0];
    CHECK(r.cost_eur == transaction_cost(10e6, 0.01, t0, 1.0, Side::buy_protection, cfg.index));
    CHECK(r.cost_eur > 0.0);

    // trimming the book sells protection back
    auto r2 = env.step(r.next, 0.04);
    const Timestamp t1 = cfg.grid.points[1];
    CHECK(r2.cost_eur == transaction_cost(std::abs(0.04 - 0.10) * 100e6, 0.01, t1, 1.0,
                                          Side::sell_protection, cfg.index));
}

TEST_CASE("per-step accounting identity is exact") {
    auto cfg = paper_config(10, 5, 2.0);
    auto spreads = gbm_path(cfg.grid, 13, 0);
    HedgingEnv env(cfg, spreads);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto s = env.reset();
    double sum_r = 0.0, sum_h = 0.0, sum_c = 0.0;
    const double pay0 = s.pay_eur;
    for (std::size_t k = 0; k < env.n_steps(); ++k) {
        auto r = env.step(s, u(rng));
        CHECK(r.reward_eur == r.option_pnl_eur - r.hedge_pnl_eur - r.cost_eur);  // bit-level
        sum_r += r.reward_eur;
        sum_h += r.hedge_pnl_eur;
        sum_c += r.cost_eur;
        s = r.next;
    }
    const double sign = -1.0;  // short_option
    CHECK(sum_r ==
          doctest::Approx(sign * (s.pay_eur - pay0) - sum_h - sum_c).epsilon(1e-10));
}

TEST_CASE("costs are nonnegative and vanish without trading or spread width") {
    auto cfg = paper_config(10, 5, 1.0);
    auto spreads = gbm_path(cfg.grid, 17, 0);

    auto rec = run_policy(delta_hedge_policy, cfg, spreads);
    double total_cost = 0.0;
    for (double c : rec.costs_eur) {
        CHECK(c >= 0.0);
        total_cost += c;
    }
    CHECK(total_cost > 0.0);

    auto free_cfg = paper_config(10, 5, 0.0);
    auto rec_free = run_policy(delta_hedge_policy, free_cfg, spreads);
    for (double c : rec_free.costs_eur) CHECK(c == 0.0);

    auto rec_flat = run_policy([](const EnvState&) { return 0.0; }, cfg, spreads);
    for (double c : rec_flat.costs_eur) CHECK(c == 0.0);
}

TEST_CASE("terminal step settles at intrinsic and unwinds the book") {
    auto cfg = paper_config(2, 5, 1.0);
    auto spreads = gbm_path(cfg.grid, 19, 0);
    HedgingEnv env(cfg, spreads);
    auto table = PricingTable(cfg.index, cfg.option, cfg.grid);

    auto s = env.reset();
    StepResult last;
    for (std::size_t k = 0; k < env.n_steps(); ++k) {
        last = env.step(s, 0.5);
        s = last.next;
    }
    CHECK(last.done);
    const std::size_t n = cfg.grid.size();
    const double s_T = spreads.back();
    // final option mark is the intrinsic payoff
    CHECK(s.pay_eur == std::max(s_T - cfg.option.strike, 0.0) *
                           annuity(s_T, cfg.option.expiry,
                                   coupon_schedule(cfg.option.expiry, cfg.index.maturity),
                                   cfg.index.lgd) *
                           cfg.option.notional);
    // last cost = no rebalance (held 0.5) + unwind of half the index notional
    CHECK(last.cost_eur ==
          table.trade_cost(n - 1, s_T, 0.5 * 100e6, 1.0, Side::sell_protection));

    CHECK_THROWS(env.step(s, 0.5));  // stepping a finished episode
}

TEST_CASE("actions are clipped and NaN is rejected") {
    auto cfg = paper_config(2, 5, 0.0);
    std::vector<double> flat(cfg.grid.size(), 0.01);
    HedgingEnv a(cfg, flat), b(cfg, flat);
    auto sa = a.reset();
    auto sb = b.reset();
    auto ra = a.step(sa, 1.7);
    auto rb = b.step(sb, 1.0);
    CHECK(ra.reward_eur == rb.reward_eur);
    CHECK(ra.next.a_prev == 1.0);
    auto rneg = a.step(ra.next, -0.4);
    CHECK(rneg.next.a_prev == 0.0);
    CHECK_THROWS(b.step(rb.next, std::nan("")));
}

TEST_CASE("stepping is pure and replayable") {
    auto cfg = paper_config(5, 5, 1.5);
    auto spreads = gbm_path(cfg.grid, 23, 0);
    HedgingEnv env(cfg, spreads);
    auto s0 = env.reset();
    auto once = env.step_from(0, s0, 0.37);
    auto again = env.step_from(0, s0, 0.37);
    CHECK(once.reward_eur == again.reward_eur);
    CHECK(once.next.n_h == again.next.n_h);
    CHECK(once.cost_eur == again.cost_eur);

    auto rec1 = run_policy(delta_hedge_policy, cfg, spreads);
    auto rec2 = run_policy(delta_hedge_policy, cfg, spreads);
    CHECK(rec1.rewards_eur == rec2.rewards_eur);
    CHECK(rec1.actions == rec2.actions);
}

TEST_CASE("frictionless delta hedge is unbiased and tighter with finer grids") {
    GbmParams gp;
    std::vector<double> stds;
    double mean17 = 0.0, se17 = 0.0;
    for (int spd : {4, 17, 68}) {
        auto cfg = paper_config(40, spd, 0.0);
        auto table =
            std::make_shared<const PricingTable>(cfg.index, cfg.option, cfg.grid);
        auto paths = simulate_gbm(gp, cfg.grid, 101, 100);
        std::vector<double> pl;
        pl.reserve(paths.size());
        for (const auto& p : paths)
            pl.push_back(run_policy(delta_hedge_policy, cfg, p.spreads, table).total_pnl_eur());
        stds.push_back(std_of(pl));
        if (spd == 17) {
            mean17 = mean_of(pl);
            se17 = std_of(pl) / std::sqrt(static_cast<double>(pl.size()));
        }
    }
    CHECK(stds[0] > stds[1]);
    CHECK(stds[1] > stds[2]);
    CHECK(std::abs(mean17) < 4.0 * se17);
}

TEST_CASE("bid/ask width drags the delta hedge as the paper reports") {
    auto cfg = paper_config(40, 17, 1.0);
    auto table = std::make_shared<const PricingTable>(cfg.index, cfg.option, cfg.grid);
    auto paths = simulate_gbm(GbmParams{}, cfg.grid, 202, 100);
    std::vector<double> pl;
    for (const auto& p : paths)
        pl.push_back(run_policy(delta_hedge_policy, cfg, p.spreads, table).total_pnl_eur());
    const double m = mean_of(pl);
    CHECK(m < -80e3);
    CHECK(m > -200e3);
}

TEST_CASE("per-point bid/ask series is honored") {
    auto cfg = paper_config(2, 5, 0.0);
    cfg.cost.bidask_bp.assign(cfg.grid.size(), 0.0);
    cfg.cost.bidask_bp[1] = 2.0;  // width only at the second mark
    std::vector<double> flat(cfg.grid.size(), 0.01);
    HedgingEnv env(cfg, flat);
    auto s = env.reset();
    auto r0 = env.step(s, 0.5);   // trades at point 0, zero width
    CHECK(r0.cost_eur == 0.0);
    auto r1 = env.step(r0.next, 1.0);  // trades at point 1, 2 bp width
    CHECK(r1.cost_eur > 0.0);
}

TEST_CASE("episode csv export") {
    auto cfg = paper_config(2, 5, 1.0);
    auto spreads = gbm_path(cfg.grid, 29, 0);
    auto rec = run_policy(delta_hedge_policy, cfg, spreads);
    const char* file = "test_episode_tmp.csv";
    write_episode_csv(file, rec, cfg.grid);

    std::FILE* f = std::fopen(file, "r");
    REQUIRE(f);
    char line[512];
    REQUIRE(std::fgets(line, sizeof line, f));
    CHECK(std::string(line) == "step,timestamp,spread_bp,action,reward_eur,cost_eur\n");
    int rows = 0;
    while (std::fgets(line, sizeof line, f)) ++rows;
    std::fclose(f);
    CHECK(rows == static_cast<int>(cfg.grid.size()) - 1);
    std::remove(file);
}
