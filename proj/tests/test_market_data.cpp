#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "cdxhedge/market_data.hpp"

using namespace cdxhedge;

namespace {

QuoteSnapshot snap_at(Timestamp ts, std::vector<std::pair<double, double>> bid_ask) {
    QuoteSnapshot s{ts, {}};
    int i = 0;
    for (auto [b, a] : bid_ask) s.quotes.push_back({"D" + std::to_string(i++), b, a});
    return s;
}

const Timestamp kTs = Timestamp::from_ymd_hm(2025, 6, 23, 9, 30);

CleanSeries regular_series(Timestamp first_day, int n_days, int spd) {
    auto grid = build_episode_grid(first_day, n_days, spd);
    CleanSeries s;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        s.timestamps.push_back(grid.points[i]);
        s.mid_bp.push_back(60.0 + 0.01 * static_cast<double>(i));
        s.bidask_bp.push_back(1.0);
    }
    return s;
}

}  // namespace

TEST_CASE("clean snapshot: worked two-sigma example") {
    // bids {10,10,10,10,10,100}: mean 25, population sigma sqrt(1125)=33.54,
    // threshold 67.08; |100-25|=75 exceeds it, survivor mean 10
    auto s = snap_at(kTs, {{10, 11}, {10, 11}, {10, 11}, {10, 11}, {10, 11}, {100, 11}});
    auto c = clean_snapshot(s);
    CHECK(c.applicable_bid_bp == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(c.discarded_bid == 1);
    CHECK(c.discarded_ask == 0);
    CHECK(c.applicable_ask_bp == doctest::Approx(11.0));
}

TEST_CASE("clean snapshot: zero dispersion keeps everything") {
    auto s = snap_at(kTs, {{60, 61}, {60, 61}, {60, 61}, {60, 61}});
    auto c = clean_snapshot(s);
    CHECK(c.applicable_bid_bp == 60.0);
    CHECK(c.discarded_bid == 0);
    CHECK(c.mid_bp == doctest::Approx(60.5));
    CHECK(c.bidask_bp == doctest::Approx(1.0));
}

TEST_CASE("clean snapshot: mid and width arithmetic") {
    auto s = snap_at(kTs, {{59.5, 60.5}, {59.5, 60.5}, {59.5, 60.5}});
    auto c = clean_snapshot(s);
    CHECK(c.mid_bp == doctest::Approx(60.0));
    CHECK(c.bidask_bp == doctest::Approx(1.0));
}

TEST_CASE("cleaning is idempotent on the survivor set") {
    auto s = snap_at(kTs, {{10, 12}, {10, 12}, {10, 12}, {10, 12}, {10, 12}, {100, 12}});
    auto once = clean_snapshot(s);
    // survivors of the bid side are five 10s; cleaning them again discards nothing
    auto survivors = snap_at(kTs, {{10, 12}, {10, 12}, {10, 12}, {10, 12}, {10, 12}});
    auto twice = clean_snapshot(survivors);
    CHECK(twice.discarded_bid == 0);
    CHECK(twice.applicable_bid_bp == once.applicable_bid_bp);
}

TEST_CASE("fewer than three quotes on a side skips the filter") {
    auto s = snap_at(kTs, {{10, 11}, {100, 11}});
    auto c = clean_snapshot(s);
    CHECK(c.applicable_bid_bp == doctest::Approx(55.0));
    CHECK(c.discarded_bid == 0);
}

TEST_CASE("median mode uses unfiltered medians") {
    auto s = snap_at(kTs, {{10, 11}, {10, 12}, {10, 13}, {10, 14}, {10, 15}, {100, 16}});
    auto c = clean_snapshot(s, CleanMode::median);
    CHECK(c.applicable_bid_bp == doctest::Approx(10.0));
    CHECK(c.applicable_ask_bp == doctest::Approx(13.5));
    CHECK(c.discarded_bid == 0);
}

TEST_CASE("clean snapshot rejects an empty side") {
    QuoteSnapshot s{kTs, {}};
    CHECK_THROWS(clean_snapshot(s));
}

TEST_CASE("clean series aggregates and reports crossed snapshots") {
    std::vector<QuoteSnapshot> snaps = {
        snap_at(kTs, {{60, 61}, {60, 61}, {60, 61}}),
        snap_at(kTs.plus_minutes(30), {{62, 61}, {62, 61}, {62, 61}}),  // crossed
    };
    CleanSummary sum;
    auto series = clean_series(snaps, CleanMode::mean_two_sigma, &sum);
    CHECK(series.size() == 2);
    CHECK(sum.crossed_snapshots == 1);
    CHECK(series.bidask_bp[1] == doctest::Approx(-1.0));  // reported, not fixed
}

TEST_CASE("quotes csv: load, diagnostics, round trip") {
    const char* file = "test_quotes_tmp.csv";
    {
        std::FILE* f = std::fopen(file, "w");
        std::fprintf(f, "timestamp,dealer_id,bid_bp,ask_bp\n");
        std::fprintf(f, "2025-06-23T10:00,B1,60.5,61.5\n");
        std::fprintf(f, "2025-06-23T09:30,A1,60,61\n");
        std::fprintf(f, "2025-06-23T09:30,A2,60.25,61.25\n");
        std::fprintf(f, "garbage row\n");
        std::fprintf(f, "2025-06-23T10:00,B2,not_a_number,61\n");
        std::fclose(f);
    }
    auto loaded = load_quotes(file);
    REQUIRE(loaded.snapshots.size() == 2);
    CHECK(loaded.snapshots[0].timestamp == Timestamp::from_ymd_hm(2025, 6, 23, 9, 30));
    CHECK(loaded.snapshots[0].quotes.size() == 2);
    CHECK(loaded.snapshots[1].quotes.size() == 1);
    REQUIRE(loaded.malformed.size() == 2);
    CHECK(loaded.malformed[0].find("line 5") != std::string::npos);
    CHECK(loaded.malformed[1].find("line 6") != std::string::npos);

    write_quotes_csv(file, loaded.snapshots);
    auto again = load_quotes(file);
    CHECK(again.malformed.empty());
    REQUIRE(again.snapshots.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(again.snapshots[i].timestamp == loaded.snapshots[i].timestamp);
        REQUIRE(again.snapshots[i].quotes.size() == loaded.snapshots[i].quotes.size());
        for (std::size_t j = 0; j < again.snapshots[i].quotes.size(); ++j) {
            CHECK(again.snapshots[i].quotes[j].bid_bp == loaded.snapshots[i].quotes[j].bid_bp);
            CHECK(again.snapshots[i].quotes[j].ask_bp == loaded.snapshots[i].quotes[j].ask_bp);
        }
    }
    std::remove(file);

    CHECK_THROWS(load_quotes("does_not_exist.csv"));
}

TEST_CASE("empty quote file loads to an empty sequence") {
    const char* file = "test_quotes_empty_tmp.csv";
    {
        std::FILE* f = std::fopen(file, "w");
        std::fprintf(f, "timestamp,dealer_id,bid_bp,ask_bp\n");
        std::fclose(f);
    }
    auto loaded = load_quotes(file);
    CHECK(loaded.snapshots.empty());
    CHECK(loaded.malformed.empty());
    std::remove(file);
}

TEST_CASE("clean series csv round trip") {
    const char* file = "test_series_tmp.csv";
    CleanSeries s = regular_series(Timestamp::from_ymd_hm(2025, 6, 23), 2, 5);
    write_clean_series_csv(file, s);
    auto r = load_clean_series_csv(file);
    CHECK(r.timestamps == s.timestamps);
    CHECK(r.mid_bp == s.mid_bp);
    CHECK(r.bidask_bp == s.bidask_bp);
    std::remove(file);
}

TEST_CASE("slice episodes: complete windows, trailing remainder dropped") {
    // 85 trading days of 17 marks: two 40-day episodes, 5 days dropped
    auto s = regular_series(Timestamp::from_ymd_hm(2025, 1, 6), 85, 17);
    SliceReport rep;
    auto eps = slice_episodes(s, 40, 17, &rep);
    REQUIRE(eps.size() == 2);
    CHECK(rep.episodes == 2);
    CHECK(rep.filled_points == 0);
    CHECK(rep.dropped_trailing_days == 5);
    CHECK(eps[0].grid.size() == 680);
    CHECK(eps[0].spreads.size() == 680);
    CHECK(eps[0].bidask_bp.size() == 680);
    CHECK(eps[0].spreads[0] == doctest::Approx(60.0 * 1e-4));
    // second episode starts where day 40 starts
    CHECK(eps[1].grid.front().date() == s.timestamps[40 * 17].date());
}

TEST_CASE("slice episodes: interior hole forward-fills and is counted") {
    auto s = regular_series(Timestamp::from_ymd_hm(2025, 1, 6), 40, 17);
    // remove one interior mark (day 20, slot 5)
    const std::size_t gone = 20 * 17 + 5;
    const double prev_mid = s.mid_bp[gone - 1];
    s.timestamps.erase(s.timestamps.begin() + static_cast<long>(gone));
    s.mid_bp.erase(s.mid_bp.begin() + static_cast<long>(gone));
    s.bidask_bp.erase(s.bidask_bp.begin() + static_cast<long>(gone));

    SliceReport rep;
    auto eps = slice_episodes(s, 40, 17, &rep);
    REQUIRE(eps.size() == 1);
    CHECK(rep.filled_points == 1);
    CHECK(eps[0].spreads[gone] == doctest::Approx(prev_mid * 1e-4));
    CHECK(eps[0].grid.size() == 680);
}

TEST_CASE("slice episodes: 679 points with the first mark missing yields no episode") {
    auto s = regular_series(Timestamp::from_ymd_hm(2025, 1, 6), 40, 17);
    s.timestamps.erase(s.timestamps.begin());
    s.mid_bp.erase(s.mid_bp.begin());
    s.bidask_bp.erase(s.bidask_bp.begin());
    REQUIRE(s.size() == 679);
    CHECK_THROWS(slice_episodes(s, 40, 17));
}

TEST_CASE("slice episodes: series shorter than a window is an error") {
    auto s = regular_series(Timestamp::from_ymd_hm(2025, 1, 6), 10, 17);
    CHECK_THROWS(slice_episodes(s, 40, 17));
}

TEST_CASE("transaction cost") {
    IndexSpec spec{Timestamp::from_ymd_hm(2030, 6, 20), 0.01, 0.60, 100e6};
    const Timestamp t = kTs;

    CHECK(transaction_cost(0.0, 0.01, t, 1.0, Side::buy_protection, spec) == 0.0);
    CHECK(transaction_cost(100e6, 0.01, t, 0.0, Side::buy_protection, spec) == 0.0);

    // ~ N * (ba/2) * annuity ~ 2.4e4 for 100 mln at 1 bp width
    const double c = transaction_cost(100e6, 0.01, t, 1.0, Side::buy_protection, spec);
    CHECK(c > 1.5e4);
    CHECK(c < 3.5e4);

    // equals the upfront displacement on the traded side
    const double up0 = upfront(0.01, t, spec);
    const double upb = upfront(0.01 + 0.5e-4, t, spec);
    CHECK(c == doctest::Approx(100e6 * std::abs(upb - up0)).epsilon(1e-14));
    const double cs = transaction_cost(100e6, 0.01, t, 1.0, Side::sell_protection, spec);
    const double ups = upfront(0.01 - 0.5e-4, t, spec);
    CHECK(cs == doctest::Approx(100e6 * std::abs(ups - up0)).epsilon(1e-14));

    // exact linearity in notional
    const double c10 = transaction_cost(10e6, 0.01, t, 1.0, Side::buy_protection, spec);
    CHECK(c10 * 10.0 == doctest::Approx(c).epsilon(1e-15));
    CHECK(c >= 0.0);
    CHECK(cs >= 0.0);
}
