#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "cdxhedge/trvo.hpp"

using namespace cdxhedge;

namespace {

const Timestamp kStart = Timestamp::from_ymd_hm(2025, 6, 23, 9, 30);
const Timestamp kMaturity = Timestamp::from_ymd_hm(2030, 6, 20);

EnvConfig toy_config(double bidask_bp = 0.0, double option_notional = 100e6) {
    EnvConfig cfg;
    cfg.grid = build_episode_grid(kStart, 2, 2);  // 4 marks, 3 transitions
    cfg.index = IndexSpec{kMaturity, 0.01, 0.60, 100e6};
    cfg.option = OptionSpec{OptionKind::payer, 0.01, cfg.grid.points.back(), 0.60,
                            option_notional};
    cfg.cost.constant_bidask_bp = bidask_bp;
    return cfg;
}

/// hand-assembled batch: episode rewards laid out back to back, unit premium
TrajectoryBatch manual_batch(const std::vector<std::vector<double>>& episodes) {
    TrajectoryBatch b;
    std::size_t total = 0;
    for (const auto& e : episodes) {
        b.offsets.push_back(total);
        total += e.size();
        b.premium_eur.push_back(1.0);
    }
    b.offsets.push_back(total);
    b.obs = Eigen::MatrixXd::Zero(4, static_cast<Eigen::Index>(total));
    b.actions = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
    b.logp_old = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
    b.rewards_eur.resize(static_cast<Eigen::Index>(total));
    Eigen::Index i = 0;
    for (const auto& e : episodes)
        for (double r : e) b.rewards_eur(i++) = r;
    return b;
}

}  // namespace

TEST_CASE("J estimator: constant, two-step closed form, gamma=1 mean") {
    auto constant = manual_batch({{4.2, 4.2, 4.2}, {4.2, 4.2}});
    CHECK(estimate_j(constant, 0.97) == doctest::Approx(4.2).epsilon(1e-14));

    auto two_step = manual_batch({{3.0, 5.0}});
    CHECK(estimate_j(two_step, 0.9) ==
          doctest::Approx((3.0 + 0.9 * 5.0) / 1.9).epsilon(1e-15));
    CHECK(estimate_j(two_step, 1.0) == doctest::Approx(4.0).epsilon(1e-15));

    CHECK_THROWS(estimate_j(TrajectoryBatch{}, 0.999));
}

TEST_CASE("reward transformation") {
    auto b = manual_batch({{0.0, 2.0}});
    const double j = estimate_j(b, 1.0);
    CHECK(j == doctest::Approx(1.0).epsilon(1e-15));
    Eigen::VectorXd t = transform_rewards(b, 1.0, 1.0);
    CHECK(t(0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(t(1) == doctest::Approx(1.0).epsilon(1e-15));

    // lambda = 0 leaves the rewards bit-identical (risk-neutral code path)
    Eigen::VectorXd id = transform_rewards(b, 1.0, 0.0);
    CHECK(id == b.rewards_eur);

    // constant rewards are a fixed point for any lambda
    auto c = manual_batch({{7.0, 7.0, 7.0}});
    Eigen::VectorXd tc = transform_rewards(c, estimate_j(c, 0.9), 25.0);
    for (Eigen::Index i = 0; i < tc.size(); ++i)
        CHECK(tc(i) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("J and nu2 are translation covariant") {
    std::mt19937 rng(5);
    std::normal_distribution<double> n(0.0, 2.0);
    std::vector<std::vector<double>> eps(6, std::vector<double>(9));
    for (auto& e : eps)
        for (auto& r : e) r = n(rng);
    auto b = manual_batch(eps);
    for (auto& e : eps)
        for (auto& r : e) r += 100.0;
    auto shifted = manual_batch(eps);

    const double gamma = 0.99;
    const double j = estimate_j(b, gamma);
    const double js = estimate_j(shifted, gamma);
    CHECK(js == doctest::Approx(j + 100.0).epsilon(1e-12));
    CHECK(reward_volatility(shifted, gamma, js) ==
          doctest::Approx(reward_volatility(b, gamma, j)).epsilon(1e-9));
}

TEST_CASE("advantages: identical episodes collapse to zero") {
    auto b = manual_batch({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}});
    Eigen::VectorXd adv = compute_advantages(b, b.rewards_eur, 0.999);
    for (Eigen::Index i = 0; i < adv.size(); ++i) CHECK(adv(i) == 0.0);
}

TEST_CASE("advantages: single-step episodes reduce to centered rewards") {
    auto b = manual_batch({{1.0}, {3.0}, {8.0}});
    Eigen::VectorXd adv = compute_advantages(b, b.rewards_eur, 1.0);
    const double mean = 4.0;
    const double sd = std::sqrt((9.0 + 1.0 + 16.0) / 3.0);
    for (Eigen::Index i = 0; i < 3; ++i)
        CHECK(adv(i) == doctest::Approx((b.rewards_eur(i) - mean) / sd).epsilon(1e-14));
}

TEST_CASE("advantages equal the enumerated toy-MDP Q values") {
    // two-state, two-action chain: first-step reward = action (0 or 1),
    // second step always pays 0.5; gamma = 1
    auto b = manual_batch({{0.0, 0.5}, {1.0, 0.5}, {0.0, 0.5}, {1.0, 0.5}});
    Eigen::VectorXd adv = compute_advantages(b, b.rewards_eur, 1.0);
    // enumeration: Q(s0,a) = a + 0.5, V(s0) = 1.0, so raw advantages are
    // -0.5/+0.5 at t=0 and 0 at t=1; normalization scales by sqrt(0.125)
    const double unit = 0.5 / std::sqrt(0.125);
    CHECK(adv(0) == doctest::Approx(-unit).epsilon(1e-13));
    CHECK(adv(1) == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(adv(2) == doctest::Approx(unit).epsilon(1e-13));
    CHECK(adv(6) == doctest::Approx(unit).epsilon(1e-13));

    // Monte Carlo agreement of the reward-to-go with the enumerated Q
    std::mt19937 rng(11);
    std::normal_distribution<double> noise(0.0, 0.1);
    const int n = 2000;
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    int cnt[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
        const int a = i % 2;
        const double g = a + noise(rng) + 1.0 * (0.5 + noise(rng));
        sum[a] += g;
        sq[a] += g * g;
        ++cnt[a];
    }
    for (int a = 0; a < 2; ++a) {
        const double mean = sum[a] / cnt[a];
        const double var = sq[a] / cnt[a] - mean * mean;
        const double se = std::sqrt(var / cnt[a]);
        CHECK(std::abs(mean - (a + 0.5)) < 3.0 * se);
    }
}

TEST_CASE("surrogate gradient matches central finite differences") {
    auto cfg = toy_config();
    auto factory = gbm_batch_factory(cfg, GbmParams{}, 31, 12);
    auto envs = factory(0);
    GaussianPolicy policy({4}, 4, 7);  // 26 parameters
    REQUIRE(policy.n_params() <= 50);
    auto batch = collect_batch(policy, envs, 99, 1);

    Hyperparams hp;
    hp.lambda_user = 4.0;
    const double j = estimate_j(batch, hp.gamma);
    const Eigen::VectorXd adv =
        compute_advantages(batch, transform_rewards(batch, j, hp.lambda_internal()), hp.gamma);

    auto check_gradient = [&](GaussianPolicy& p) {
        const Eigen::VectorXd analytic = surrogate_gradient(p, batch, adv);
        const Eigen::VectorXd theta = p.flatten();
        Eigen::VectorXd fd(theta.size());
        const double h = 1e-6;
        GaussianPolicy probe = p;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(i) += h;
            tm(i) -= h;
            probe.set_flat(tp);
            const double up = surrogate_value(probe, batch, adv);
            probe.set_flat(tm);
            const double dn = surrogate_value(probe, batch, adv);
            fd(i) = (up - dn) / (2.0 * h);
        }
        const double scale = fd.lpNorm<Eigen::Infinity>();
        REQUIRE(scale > 1e-4);
        CHECK((analytic - fd).lpNorm<Eigen::Infinity>() / scale < 1e-5);
    };

    check_gradient(policy);  // at the sampling policy, importance weights = 1

    // and away from it, where the importance weights bite
    GaussianPolicy moved = policy;
    Eigen::VectorXd theta = moved.flatten();
    std::mt19937 rng(17);
    std::normal_distribution<double> n(0.0, 0.05);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += n(rng);
    moved.set_flat(theta);
    check_gradient(moved);
}

TEST_CASE("fisher-vector product is symmetric and positive") {
    auto cfg = toy_config();
    auto factory = gbm_batch_factory(cfg, GbmParams{}, 37, 8);
    auto envs = factory(0);
    GaussianPolicy policy({4}, 4, 3);
    auto batch = collect_batch(policy, envs, 5, 1);
    GaussianPolicy::Cache cache;
    policy.mean(batch.obs, &cache);

    std::mt19937 rng(41);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd u(static_cast<Eigen::Index>(policy.n_params()));
    Eigen::VectorXd v(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u(i) = n(rng);
        v(i) = n(rng);
    }
    const double damping = 1e-2;
    const Eigen::VectorXd fu = fisher_vector_product(policy, cache, u, damping);
    const Eigen::VectorXd fv = fisher_vector_product(policy, cache, v, damping);
    CHECK(u.dot(fv) == doctest::Approx(v.dot(fu)).epsilon(1e-10));
    CHECK(u.dot(fu) > 0.0);
    CHECK(v.dot(fv) > 0.0);
}

TEST_CASE("zero advantages leave the policy untouched") {
    auto cfg = toy_config();
    auto factory = gbm_batch_factory(cfg, GbmParams{}, 43, 6);
    auto envs = factory(0);
    GaussianPolicy policy({4}, 4, 11);
    auto batch = collect_batch(policy, envs, 21, 1);

    const Eigen::VectorXd before = policy.flatten();
    Hyperparams hp;
    auto stats = trust_region_update(policy, batch,
                                     Eigen::VectorXd::Zero(batch.actions.size()), hp);
    CHECK_FALSE(stats.accepted);
    CHECK(policy.flatten() == before);
}

TEST_CASE("accepted updates respect the KL budget over 100 iterations") {
    auto cfg = toy_config(1.0);
    Hyperparams hp;
    hp.lambda_user = 2.0;
    hp.batch_episodes = 8;
    hp.iterations = 100;
    hp.hidden = {6};
    hp.seed = 3;
    auto result = train(gbm_batch_factory(cfg, GbmParams{}, hp.seed, hp.batch_episodes), hp);
    REQUIRE(result.log.size() == 100);
    CHECK_FALSE(result.diverged);
    int accepted = 0;
    for (const auto& row : result.log) {
        CHECK(row.mean_kl <= hp.delta + 1e-12);
        if (row.mean_kl > 0.0) ++accepted;
    }
    CHECK(accepted > 20);

    // eta ties out with its components at every iteration
    for (const auto& row : result.log)
        CHECK(row.eta ==
              doctest::Approx(row.j - hp.lambda_internal() * row.nu2).epsilon(1e-12));
    CHECK(result.log.back().episodes_seen == 800);
}

TEST_CASE("training is reproducible from the seed") {
    auto cfg = toy_config(0.5);
    Hyperparams hp;
    hp.batch_episodes = 6;
    hp.iterations = 8;
    hp.hidden = {5};
    hp.seed = 77;
    auto factory = gbm_batch_factory(cfg, GbmParams{}, hp.seed, hp.batch_episodes);
    auto a = train(factory, hp);
    auto b = train(factory, hp);
    CHECK(a.policy.flatten() == b.policy.flatten());
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].j == b.log[i].j);
        CHECK(a.log[i].mean_kl == b.log[i].mean_kl);
    }
}

TEST_CASE("rollout collection does not depend on the thread count") {
    auto cfg = toy_config(1.0);
    auto factory = gbm_batch_factory(cfg, GbmParams{}, 53, 10);
    GaussianPolicy policy({6}, 4, 5);
    auto envs1 = factory(0);
    auto envs4 = factory(0);
    auto b1 = collect_batch(policy, envs1, 321, 1);
    auto b4 = collect_batch(policy, envs4, 321, 4);
    CHECK(b1.obs == b4.obs);
    CHECK(b1.actions == b4.actions);
    CHECK(b1.rewards_eur == b4.rewards_eur);
    CHECK(b1.logp_old == b4.logp_old);
}

TEST_CASE("runaway objectives trip the divergence detector") {
    // a 1 EUR option against a 100 mln hedge book: costs dwarf the premium
    auto cfg = toy_config(10.0, 1.0);
    Hyperparams hp;
    hp.batch_episodes = 4;
    hp.iterations = 5;
    hp.hidden = {4};
    auto result = train(gbm_batch_factory(cfg, GbmParams{}, 1, hp.batch_episodes), hp);
    CHECK(result.diverged);
    CHECK(result.log.size() == 1);
}

TEST_CASE("training log round trips through csv") {
    std::vector<IterationLog> log = {{0, -1.5, 2.25, -1.6, 0.004, 64},
                                     {1, -1.2, 2.0, -1.3, 0.008, 128}};
    const char* file = "test_trvo_log_tmp.csv";
    write_training_log_csv(file, log);
    std::FILE* f = std::fopen(file, "r");
    REQUIRE(f);
    char line[256];
    REQUIRE(std::fgets(line, sizeof line, f));
    CHECK(std::string(line) == "iteration,J,nu2,eta,mean_kl,episodes_seen\n");
    int it = -1;
    double j, nu2, eta, kl;
    long long seen;
    REQUIRE(std::fgets(line, sizeof line, f));
    REQUIRE(std::sscanf(line, "%d,%lg,%lg,%lg,%lg,%lld", &it, &j, &nu2, &eta, &kl, &seen) == 6);
    CHECK(it == 0);
    CHECK(j == -1.5);
    CHECK(seen == 64);
    std::fclose(f);
    std::remove(file);
}
