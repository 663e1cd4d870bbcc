#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdxhedge/evaluation.hpp"
#include "cdxhedge/market_data.hpp"
#include "cdxhedge/run_config.hpp"

namespace fs = std::filesystem;
using namespace cdxhedge;

namespace {

struct Flags {
    std::string config, seed, out, threads;
    std::string model, episodes, lambda, ba, iterations;
    std::string in, checkpoint, series;
    bool median = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "config file ([section] / key = value)");
    cmd->add_option("--seed", f.seed, "master seed (overrides run.seed)");
    cmd->add_option("--out", f.out, "output directory (overrides run.out)");
    cmd->add_option("--threads", f.threads, "worker threads (overrides run.threads)");
}

using Override = std::pair<const char*, const std::string*>;

RunConfig make_config(const Flags& f, const std::vector<Override>& extra) {
    RunConfig cfg;
    if (!f.config.empty()) cfg = load_config(f.config);
    if (!f.seed.empty()) set_key(cfg, "run.seed", f.seed);
    if (!f.out.empty()) set_key(cfg, "run.out", f.out);
    if (!f.threads.empty()) set_key(cfg, "run.threads", f.threads);
    for (const auto& [key, value] : extra)
        if (!value->empty()) set_key(cfg, key, *value);
    return cfg;
}

fs::path prepare_out(const RunConfig& cfg) {
    const fs::path out(cfg.out);
    fs::create_directories(out / "paths");
    fs::create_directories(out / "checkpoints");
    fs::create_directories(out / "reports");
    write_resolved_config((out / "resolved-config").string(), cfg);
    return out;
}

void write_eval_csv(const std::string& file, const EvalReport& rep) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + file);
    std::fprintf(f,
                 "mean_pl_eur,delta_pl_eur,pl_vol_eur,path_vol_eur,"
                 "mean_cost_eur,mean_action_change,episodes,checksum\n");
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%llu\n", rep.mean_pl_eur,
                 rep.delta_pl_eur, rep.pl_vol_eur, rep.path_vol_eur, rep.mean_cost_eur,
                 rep.mean_action_change, rep.episodes,
                 static_cast<unsigned long long>(rep.checksum));
    std::fclose(f);
}

int cmd_simulate(const RunConfig& cfg) {
    if (cfg.sim_episodes < 1) throw ConfigError("sim.episodes: need at least 1 to simulate");
    const TradingGrid grid = config_grid(cfg);
    const std::vector<MarketPath> paths =
        cfg.sim_model == "heston"
            ? simulate_heston(config_heston(cfg), grid, cfg.seed, cfg.sim_episodes, cfg.threads)
            : simulate_gbm(config_gbm(cfg), grid, cfg.seed, cfg.sim_episodes, cfg.threads);
    const fs::path out = prepare_out(cfg);
    const fs::path file = out / "paths" / "paths.csv";
    write_paths_csv(file.string(), paths, grid);
    std::printf("wrote %zu %s paths of %zu marks to %s\n", paths.size(), cfg.sim_model.c_str(),
                grid.size(), file.string().c_str());
    return 0;
}

int cmd_clean(const RunConfig& cfg) {
    if (cfg.data_quotes.empty()) throw ConfigError("data.quotes: no input quotes file");
    const LoadedQuotes loaded = load_quotes(cfg.data_quotes);
    CleanSummary summary;
    const CleanSeries series = clean_series(
        loaded.snapshots, cfg.data_median ? CleanMode::median : CleanMode::mean_two_sigma,
        &summary);
    const fs::path out = prepare_out(cfg);
    write_clean_series_csv((out / "reports" / "series.csv").string(), series);

    char report[256];
    std::snprintf(report, sizeof report,
                  "snapshots=%zu malformed_rows=%zu discarded_bid=%d discarded_ask=%d "
                  "crossed=%d\n",
                  loaded.snapshots.size(), loaded.malformed.size(), summary.discarded_bid,
                  summary.discarded_ask, summary.crossed_snapshots);
    std::fputs(report, stdout);
    std::FILE* f = std::fopen((out / "reports" / "clean_summary.txt").string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot write clean summary");
    std::fputs(report, f);
    for (const auto& m : loaded.malformed) std::fprintf(f, "%s\n", m.c_str());
    std::fclose(f);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.sim_model != "gbm")
        throw ConfigError("train: only sim.model = gbm is supported for training");
    const EnvConfig env = config_env(cfg);
    const Hyperparams hp = config_hyperparams(cfg);
    const fs::path out = prepare_out(cfg);
    const TrainResult res =
        train(gbm_batch_factory(env, config_gbm(cfg), cfg.seed, hp.batch_episodes), hp);
    res.policy.save((out / "checkpoints" / "policy.ckpt").string());
    write_training_log_csv((out / "reports" / "training_log.csv").string(), res.log);
    if (res.diverged) {
        std::fprintf(stderr, "training diverged at iteration %d (|J| ran away); aborting\n",
                     res.log.back().iteration);
        return 2;
    }
    std::printf("trained lambda=%g ba=%gbp for %d iterations (%lld episodes), eta %g -> %g\n",
                hp.lambda_user, cfg.cost_ba_bp, hp.iterations, res.log.back().episodes_seen,
                res.log.front().eta, res.log.back().eta);
    return 0;
}

EnvConfig env_for_slice(const RunConfig& cfg, const EpisodeSlice& slice) {
    EnvConfig env = config_env(cfg);
    env.grid = slice.grid;
    env.option.expiry = slice.grid.points.back();
    env.cost.bidask_bp = slice.bidask_bp;  // quoted widths override the constant
    return env;
}

int cmd_evaluate(const RunConfig& cfg) {
    std::optional<GaussianPolicy> agent;
    if (!cfg.eval_checkpoint.empty()) agent.emplace(GaussianPolicy::load(cfg.eval_checkpoint));
    const fs::path out = prepare_out(cfg);

    if (!cfg.eval_series.empty()) {
        // real-data mode: consecutive windows cut from a cleaned series
        const CleanSeries series = load_clean_series_csv(cfg.eval_series);
        SliceReport slicing;
        const std::vector<EpisodeSlice> slices =
            slice_episodes(series, cfg.grid_days, cfg.grid_steps_per_day, &slicing);
        std::vector<ScenarioRow> rows;
        EvalReport agg;
        for (std::size_t i = 0; i < slices.size(); ++i) {
            TestSet set;
            set.config = env_for_slice(cfg, slices[i]);
            set.paths = {slices[i].spreads};
            const EvalReport base = evaluate(delta_hedge_factory(), set, 1);
            rows.push_back({static_cast<int>(i) + 1, -1.0, base.mean_pl_eur / 1e3,
                            base.path_vol_eur / 1e3});
            const EvalReport rep = agent ? evaluate(mean_policy(*agent), set, 1) : base;
            if (agent)
                rows.push_back({static_cast<int>(i) + 1, cfg.train_lambda,
                                rep.mean_pl_eur / 1e3, rep.path_vol_eur / 1e3});
            agg.pl_eur.push_back(rep.pl_eur[0]);
            agg.baseline_pl_eur.push_back(rep.baseline_pl_eur[0]);
            agg.path_vols_eur.push_back(rep.path_vols_eur[0]);
            agg.mean_cost_eur += rep.mean_cost_eur;
            agg.mean_action_change += rep.mean_action_change;
            agg.checksum ^= rep.checksum;
        }
        const double n = static_cast<double>(slices.size());
        agg.episodes = slices.size();
        for (std::size_t i = 0; i < agg.pl_eur.size(); ++i) {
            agg.mean_pl_eur += agg.pl_eur[i] / n;
            agg.delta_pl_eur += (agg.pl_eur[i] - agg.baseline_pl_eur[i]) / n;
            agg.path_vol_eur += agg.path_vols_eur[i] / n;
        }
        agg.mean_cost_eur /= n;
        agg.mean_action_change /= n;
        double ss = 0.0;
        for (double p : agg.pl_eur) ss += (p - agg.mean_pl_eur) * (p - agg.mean_pl_eur);
        agg.pl_vol_eur = std::sqrt(ss / n);
        write_scenario_table_csv((out / "reports" / "scenario_table.csv").string(), rows);
        write_eval_csv((out / "reports" / "evaluation.csv").string(), agg);
        std::printf("evaluated %zu scenario(s) from %s (filled %d, skipped %d windows)\n",
                    slices.size(), cfg.eval_series.c_str(), slicing.filled_points,
                    slicing.skipped_windows);
        return 0;
    }

    const EnvConfig env = config_env(cfg);
    const TestSet set =
        cfg.sim_model == "heston"
            ? heston_test_set(env, config_heston(cfg), cfg.seed, cfg.eval_episodes)
            : gbm_test_set(env, config_gbm(cfg), cfg.seed, cfg.eval_episodes);
    const EvalReport rep =
        evaluate(agent ? mean_policy(*agent) : delta_hedge_factory(), set, cfg.threads);
    write_eval_csv((out / "reports" / "evaluation.csv").string(), rep);
    if (agent)
        write_histogram_csv((out / "reports" / "pl_distribution.csv").string(),
                            pl_distribution(rep, cfg.eval_bin_width_keur * 1e3));
    std::printf("%s over %zu %s episodes: mean p&l %.0f EUR, pickup vs delta hedge %.0f EUR, "
                "p&l vol %.0f EUR\n",
                agent ? "agent" : "delta hedge", rep.episodes, cfg.sim_model.c_str(),
                rep.mean_pl_eur, rep.delta_pl_eur, rep.pl_vol_eur);
    return 0;
}

int cmd_frontier(const RunConfig& cfg) {
    const std::vector<double> lambdas = parse_double_list(cfg.frontier_lambdas, "frontier.lambdas");
    const std::vector<double> bas = parse_double_list(cfg.frontier_bas_bp, "frontier.bas_bp");
    const EnvConfig env = config_env(cfg);
    const fs::path out = prepare_out(cfg);
    const TestSet set =
        gbm_test_set(env, config_gbm(cfg), mix_seed(cfg.seed, 0, 7), cfg.eval_episodes);

    std::vector<FrontierAgent> agents;
    std::uint64_t cell = 0;
    for (double ba : bas) {
        for (double lambda : lambdas) {
            Hyperparams hp = config_hyperparams(cfg);
            hp.lambda_user = lambda;
            hp.seed = mix_seed(cfg.seed, cell, 6);
            EnvConfig cell_env = env;
            cell_env.cost.constant_bidask_bp = ba;
            const TrainResult res = train(
                gbm_batch_factory(cell_env, config_gbm(cfg), hp.seed, hp.batch_episodes), hp);
            if (res.diverged)
                throw std::runtime_error("frontier training diverged at lambda=" +
                                         std::to_string(lambda));
            char name[64];
            std::snprintf(name, sizeof name, "policy_lambda%g_ba%g.ckpt", lambda, ba);
            res.policy.save((out / "checkpoints" / name).string());
            agents.push_back({lambda, ba, res.policy});
            std::printf("trained cell %llu/%zu: lambda=%g ba=%gbp, eta=%g\n",
                        static_cast<unsigned long long>(cell) + 1, lambdas.size() * bas.size(),
                        lambda, ba, res.log.back().eta);
            std::fflush(stdout);
            ++cell;
        }
    }
    const std::vector<FrontierPoint> points = build_frontier(agents, set, cfg.threads);
    write_frontier_csv((out / "reports" / "frontier.csv").string(), points);
    write_dominance_report((out / "reports" / "dominance.txt").string(), points);
    std::printf("frontier: %zu points over %zu lambda x %zu ba cells\n", points.size(),
                lambdas.size(), bas.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"credit-index option hedging: simulate spreads, clean quotes, train and "
                 "evaluate hedging agents"};
    app.require_subcommand(1);
    Flags f;

    CLI::App* sim = app.add_subcommand("simulate", "write simulated spread paths as CSV");
    add_common(sim, f);
    sim->add_option("--model", f.model, "gbm or heston");
    sim->add_option("--episodes", f.episodes, "number of paths");

    CLI::App* clean = app.add_subcommand("clean", "clean dealer quotes into a mid/width series");
    add_common(clean, f);
    clean->add_option("--in", f.in, "raw quotes CSV (timestamp,dealer_id,bid_bp,ask_bp)");
    clean->add_flag("--median", f.median, "median of unfiltered quotes instead of the 2-sigma mean");

    CLI::App* tr = app.add_subcommand("train", "train one hedging agent");
    add_common(tr, f);
    tr->add_option("--lambda", f.lambda, "risk aversion (user scale)");
    tr->add_option("--ba", f.ba, "bid/ask width in bp");
    tr->add_option("--iterations", f.iterations, "training iterations");

    CLI::App* ev = app.add_subcommand("evaluate", "evaluate a checkpoint against the delta hedge");
    add_common(ev, f);
    ev->add_option("--checkpoint", f.checkpoint, "policy checkpoint (omit: baseline only)");
    ev->add_option("--series", f.series, "cleaned series CSV for real-data scenarios");
    ev->add_option("--episodes", f.episodes, "test episodes");
    ev->add_option("--ba", f.ba, "bid/ask width in bp");
    ev->add_option("--model", f.model, "test-set model: gbm or heston");

    CLI::App* fr = app.add_subcommand("frontier", "train a lambda x ba grid and sweep the frontier");
    add_common(fr, f);
    fr->add_option("--episodes", f.episodes, "test episodes per ba");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }

    try {
        if (app.got_subcommand(sim)) {
            RunConfig cfg = make_config(f, {{"sim.model", &f.model}, {"sim.episodes", &f.episodes}});
            validate(cfg);
            return cmd_simulate(cfg);
        }
        if (app.got_subcommand(clean)) {
            RunConfig cfg = make_config(f, {{"data.quotes", &f.in}});
            if (f.median) set_key(cfg, "data.median", "true");
            validate(cfg);
            return cmd_clean(cfg);
        }
        if (app.got_subcommand(tr)) {
            RunConfig cfg = make_config(f, {{"train.lambda", &f.lambda},
                                            {"cost.ba_bp", &f.ba},
                                            {"train.iterations", &f.iterations}});
            validate(cfg);
            return cmd_train(cfg);
        }
        if (app.got_subcommand(ev)) {
            RunConfig cfg = make_config(f, {{"eval.checkpoint", &f.checkpoint},
                                            {"eval.series", &f.series},
                                            {"eval.episodes", &f.episodes},
                                            {"cost.ba_bp", &f.ba},
                                            {"sim.model", &f.model}});
            validate(cfg);
            return cmd_evaluate(cfg);
        }
        RunConfig cfg = make_config(f, {{"eval.episodes", &f.episodes}});
        validate(cfg);
        return cmd_frontier(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
