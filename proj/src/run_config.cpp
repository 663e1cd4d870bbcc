#include "cdxhedge/run_config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cdxhedge {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double to_double(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    double x;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a number: '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(key + ": trailing junk in '" + v + "'");
    return x;
}

int to_int(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    int x;
    try {
        x = std::stoi(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(key + ": not an integer: '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(key + ": trailing junk in '" + v + "'");
    return x;
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    unsigned long long x;
    try {
        x = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError(key + ": trailing junk in '" + v + "'");
    return x;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct KeyDef {
    const char* name;  // "section.key"
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = [] {
        std::vector<KeyDef> t;
        auto add_d = [&t](const char* name, double RunConfig::* f) {
            t.push_back({name,
                         [f, name](RunConfig& c, const std::string& v) { c.*f = to_double(v, name); },
                         [f](const RunConfig& c) { return fmt_double(c.*f); }});
        };
        auto add_i = [&t](const char* name, int RunConfig::* f) {
            t.push_back({name,
                         [f, name](RunConfig& c, const std::string& v) { c.*f = to_int(v, name); },
                         [f](const RunConfig& c) { return std::to_string(c.*f); }});
        };
        auto add_s = [&t](const char* name, std::string RunConfig::* f) {
            t.push_back({name, [f](RunConfig& c, const std::string& v) { c.*f = v; },
                         [f](const RunConfig& c) { return c.*f; }});
        };
        add_i("run.threads", &RunConfig::threads);
        t.push_back({"run.seed",
                     [](RunConfig& c, const std::string& v) { c.seed = to_u64(v, "run.seed"); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }});
        add_s("run.out", &RunConfig::out);

        add_s("index.maturity", &RunConfig::index_maturity);
        add_d("index.coupon_bp", &RunConfig::index_coupon_bp);
        add_d("index.lgd", &RunConfig::index_lgd);
        add_d("index.notional", &RunConfig::index_notional);

        add_s("option.kind", &RunConfig::option_kind);
        add_d("option.strike_bp", &RunConfig::option_strike_bp);
        add_d("option.sigma", &RunConfig::option_sigma);
        add_d("option.notional", &RunConfig::option_notional);

        add_s("grid.start", &RunConfig::grid_start);
        add_i("grid.days", &RunConfig::grid_days);
        add_i("grid.steps_per_day", &RunConfig::grid_steps_per_day);

        add_s("sim.model", &RunConfig::sim_model);
        add_d("sim.s0_bp", &RunConfig::sim_s0_bp);
        add_d("sim.mu", &RunConfig::sim_mu);
        add_d("sim.sigma", &RunConfig::sim_sigma);
        add_d("sim.nu0", &RunConfig::sim_nu0);
        add_d("sim.kappa", &RunConfig::sim_kappa);
        add_d("sim.theta", &RunConfig::sim_theta);
        add_d("sim.xi", &RunConfig::sim_xi);
        add_d("sim.rho", &RunConfig::sim_rho);
        add_i("sim.episodes", &RunConfig::sim_episodes);

        add_d("cost.ba_bp", &RunConfig::cost_ba_bp);

        add_d("train.lambda", &RunConfig::train_lambda);
        add_d("train.gamma", &RunConfig::train_gamma);
        add_d("train.delta", &RunConfig::train_delta);
        add_i("train.batch_episodes", &RunConfig::train_batch_episodes);
        add_i("train.iterations", &RunConfig::train_iterations);
        add_s("train.hidden", &RunConfig::train_hidden);

        add_i("eval.episodes", &RunConfig::eval_episodes);
        add_s("eval.checkpoint", &RunConfig::eval_checkpoint);
        add_s("eval.series", &RunConfig::eval_series);
        add_d("eval.bin_width_keur", &RunConfig::eval_bin_width_keur);

        add_s("frontier.lambdas", &RunConfig::frontier_lambdas);
        add_s("frontier.bas_bp", &RunConfig::frontier_bas_bp);

        add_s("data.quotes", &RunConfig::data_quotes);
        t.push_back({"data.median",
                     [](RunConfig& c, const std::string& v) { c.data_median = to_bool(v, "data.median"); },
                     [](const RunConfig& c) { return std::string(c.data_median ? "true" : "false"); }});
        return t;
    }();
    return table;
}

Timestamp parse_time_key(const std::string& v, const std::string& key) {
    try {
        return parse_iso(v.find('T') == std::string::npos ? v + "T00:00" : v);
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
    for (const auto& def : key_table()) {
        if (dotted_key == def.name) {
            def.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown key: " + dotted_key);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        set_key(cfg, section.empty() ? "run." + key : section + "." + key, value);
    }
    return cfg;
}

std::string resolved_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& def : key_table()) {
        const std::string name = def.name;
        const auto dot = name.find('.');
        const std::string sec = name.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << "\n";
            out << "[" << sec << "]\n";
            section = sec;
        }
        out << name.substr(dot + 1) << " = " << def.get(cfg) << "\n";
    }
    return out.str();
}

void write_resolved_config(const std::string& file, const RunConfig& cfg) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write resolved config: " + file);
    const std::string text = resolved_config(cfg);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

std::vector<double> parse_double_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const std::string v = trim(item);
        if (v.empty()) throw ConfigError(key + ": empty list entry");
        out.push_back(to_double(v, key));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    for (double v : parse_double_list(text, key)) {
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) throw ConfigError(key + ": expected integers");
        out.push_back(i);
    }
    return out;
}

TradingGrid config_grid(const RunConfig& cfg) {
    if (cfg.grid_days < 1) throw ConfigError("grid.days: must be >= 1");
    if (cfg.grid_steps_per_day < 1) throw ConfigError("grid.steps_per_day: must be >= 1");
    return build_episode_grid(parse_time_key(cfg.grid_start, "grid.start"), cfg.grid_days,
                              cfg.grid_steps_per_day);
}

EnvConfig config_env(const RunConfig& cfg) {
    EnvConfig env;
    env.grid = config_grid(cfg);
    env.index.maturity = parse_time_key(cfg.index_maturity, "index.maturity");
    env.index.coupon = cfg.index_coupon_bp * 1e-4;
    env.index.lgd = cfg.index_lgd;
    env.index.notional = cfg.index_notional;
    if (cfg.option_kind == "payer")
        env.option.kind = OptionKind::payer;
    else if (cfg.option_kind == "receiver")
        env.option.kind = OptionKind::receiver;
    else
        throw ConfigError("option.kind: expected payer or receiver, got '" + cfg.option_kind + "'");
    env.option.strike = cfg.option_strike_bp * 1e-4;
    env.option.expiry = env.grid.points.back();  // option expires on the last mark
    env.option.sigma = cfg.option_sigma;
    env.option.notional = cfg.option_notional;
    env.cost.constant_bidask_bp = cfg.cost_ba_bp;
    return env;
}

GbmParams config_gbm(const RunConfig& cfg) {
    GbmParams p;
    p.s0 = cfg.sim_s0_bp * 1e-4;
    p.mu = cfg.sim_mu;
    p.sigma = cfg.sim_sigma;
    return p;
}

HestonParams config_heston(const RunConfig& cfg) {
    HestonParams p;
    p.s0 = cfg.sim_s0_bp * 1e-4;
    p.nu0 = cfg.sim_nu0;
    p.kappa = cfg.sim_kappa;
    p.theta = cfg.sim_theta;
    p.xi = cfg.sim_xi;
    p.rho = cfg.sim_rho;
    return p;
}

Hyperparams config_hyperparams(const RunConfig& cfg) {
    Hyperparams hp;
    hp.lambda_user = cfg.train_lambda;
    hp.gamma = cfg.train_gamma;
    hp.delta = cfg.train_delta;
    hp.batch_episodes = cfg.train_batch_episodes;
    hp.iterations = cfg.train_iterations;
    hp.seed = cfg.seed;
    hp.threads = cfg.threads;
    hp.hidden = parse_int_list(cfg.train_hidden, "train.hidden");
    return hp;
}

void validate(const RunConfig& cfg) {
    if (cfg.threads < 1) throw ConfigError("run.threads: must be >= 1");
    if (cfg.index_lgd <= 0.0 || cfg.index_lgd > 1.0)
        throw ConfigError("index.lgd: must be in (0, 1]");
    if (cfg.index_notional <= 0.0) throw ConfigError("index.notional: must be positive");
    if (cfg.option_notional <= 0.0) throw ConfigError("option.notional: must be positive");
    if (cfg.option_strike_bp <= 0.0) throw ConfigError("option.strike_bp: must be positive");
    if (cfg.option_sigma <= 0.0) throw ConfigError("option.sigma: must be positive");
    if (cfg.sim_model != "gbm" && cfg.sim_model != "heston")
        throw ConfigError("sim.model: expected gbm or heston, got '" + cfg.sim_model + "'");
    if (cfg.sim_s0_bp <= 0.0) throw ConfigError("sim.s0_bp: must be positive");
    if (cfg.sim_episodes < 0) throw ConfigError("sim.episodes: must be >= 0");
    if (cfg.cost_ba_bp < 0.0) throw ConfigError("cost.ba_bp: must be >= 0");
    if (cfg.train_lambda < 0.0) throw ConfigError("train.lambda: must be >= 0");
    if (cfg.train_gamma <= 0.0 || cfg.train_gamma > 1.0)
        throw ConfigError("train.gamma: must be in (0, 1]");
    if (cfg.train_delta <= 0.0) throw ConfigError("train.delta: must be positive");
    if (cfg.train_batch_episodes < 1) throw ConfigError("train.batch_episodes: must be >= 1");
    if (cfg.train_iterations < 1) throw ConfigError("train.iterations: must be >= 1");
    if (cfg.eval_episodes < 1) throw ConfigError("eval.episodes: must be >= 1");
    if (cfg.eval_bin_width_keur <= 0.0)
        throw ConfigError("eval.bin_width_keur: must be positive");
    for (int h : parse_int_list(cfg.train_hidden, "train.hidden"))
        if (h < 1) throw ConfigError("train.hidden: layer widths must be >= 1");
    parse_double_list(cfg.frontier_lambdas, "frontier.lambdas");
    parse_double_list(cfg.frontier_bas_bp, "frontier.bas_bp");

    const TradingGrid grid = config_grid(cfg);
    if (parse_time_key(cfg.index_maturity, "index.maturity") <= grid.points.back())
        throw ConfigError("index.maturity: must lie after the last grid point");
}

}  // namespace cdxhedge
