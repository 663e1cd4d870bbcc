#include "cdxhedge/policy.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cdxhedge {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274;  // 0.5 * log(2*pi)

double clamp_log_std(double v) {
    return std::min(std::max(v, GaussianPolicy::kLogStdMin), GaussianPolicy::kLogStdMax);
}

}  // namespace

GaussianPolicy::GaussianPolicy(std::vector<int> hidden, int obs_dim, std::uint64_t init_seed) {
    if (obs_dim < 1) throw std::invalid_argument("GaussianPolicy: bad observation dim");
    sizes.push_back(obs_dim);
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("GaussianPolicy: bad hidden size");
        sizes.push_back(h);
    }
    sizes.push_back(1);

    NormalSampler init(mix_seed(init_seed, 0, 3));
    const std::size_t n_layers = sizes.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd wl(sizes[l + 1], sizes[l]);
        Eigen::VectorXd bl = Eigen::VectorXd::Zero(sizes[l + 1]);
        const bool output_layer = l + 1 == n_layers;
        if (output_layer) {
            wl.setZero();          // zero-initialized head: the first updates move
            bl.setConstant(0.5);   // it off a constant half-index holding
        } else {
            const double scale = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
            for (Eigen::Index j = 0; j < wl.cols(); ++j)
                for (Eigen::Index i = 0; i < wl.rows(); ++i) wl(i, j) = scale * init.next();
        }
        w.push_back(std::move(wl));
        b.push_back(std::move(bl));
    }
    obs_scale = Eigen::VectorXd::Ones(obs_dim);
    if (obs_dim >= 1) obs_scale(0) = 100.0;  // spread decimal -> bp/100
    log_std = std::log(0.25);
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::MatrixXd& obs, Cache* cache) const {
    if (obs.rows() != sizes.front())
        throw std::invalid_argument("GaussianPolicy: observation dim mismatch");
    Eigen::MatrixXd x = obs_scale.asDiagonal() * obs;
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x.clear();
    c.x.push_back(x);
    const std::size_t n_layers = w.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = (w[l] * c.x.back()).colwise() + b[l];
        if (l + 1 < n_layers) z = z.array().tanh();
        c.x.push_back(std::move(z));
    }
    return c.x.back().row(0).transpose();
}

Eigen::VectorXd GaussianPolicy::vjp(const Cache& cache, const Eigen::VectorXd& g) const {
    const std::size_t n_layers = w.size();
    if (cache.x.size() != n_layers + 1)
        throw std::invalid_argument("GaussianPolicy::vjp: stale cache");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params()));

    // cotangent on the (pre-activation) output row; log-std slot stays 0
    Eigen::MatrixXd grad = g.transpose();  // 1 x B
    std::vector<Eigen::MatrixXd> gw(n_layers);
    std::vector<Eigen::VectorXd> gb(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        gw[l] = grad * cache.x[l].transpose();
        gb[l] = grad.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = w[l].transpose() * grad;
            grad = back.array() * (1.0 - cache.x[l].array().square());
        }
    }
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        out.segment(offset, gw[l].size()) =
            Eigen::Map<const Eigen::VectorXd>(gw[l].data(), gw[l].size());
        offset += gw[l].size();
        out.segment(offset, gb[l].size()) = gb[l];
        offset += gb[l].size();
    }
    return out;
}

Eigen::VectorXd GaussianPolicy::jvp(const Cache& cache, const Eigen::VectorXd& v) const {
    const std::size_t n_layers = w.size();
    if (cache.x.size() != n_layers + 1)
        throw std::invalid_argument("GaussianPolicy::jvp: stale cache");
    if (v.size() != static_cast<Eigen::Index>(n_params()))
        throw std::invalid_argument("GaussianPolicy::jvp: direction size mismatch");

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(cache.x[0].rows(), cache.x[0].cols());
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::Map<const Eigen::MatrixXd> dw(v.data() + offset, w[l].rows(), w[l].cols());
        offset += w[l].size();
        Eigen::Map<const Eigen::VectorXd> db(v.data() + offset, b[l].size());
        offset += b[l].size();
        Eigen::MatrixXd dz = (dw * cache.x[l] + w[l] * dx).colwise() + db;
        if (l + 1 < n_layers)
            dx = dz.array() * (1.0 - cache.x[l + 1].array().square());
        else
            dx = std::move(dz);
    }
    return dx.row(0).transpose();
}

double GaussianPolicy::sample(double mean_value, NormalSampler& rng, double* lp) const {
    if (!std::isfinite(mean_value))
        throw std::runtime_error("GaussianPolicy: non-finite network output");
    const double sd = std_dev();
    const double action = mean_value + sd * rng.next();
    if (lp) *lp = log_prob(action, mean_value, log_std);
    return action;
}

double GaussianPolicy::log_prob(double action, double mean_value, double log_std_value) {
    const double z = (action - mean_value) / std::exp(log_std_value);
    return -0.5 * z * z - log_std_value - kHalfLog2Pi;
}

double GaussianPolicy::mean_kl(const Eigen::VectorXd& mean_old, const Eigen::VectorXd& mean_new,
                               double log_std_old, double log_std_new) {
    if (mean_old.size() != mean_new.size())
        throw std::invalid_argument("mean_kl: size mismatch");
    const double var_old = std::exp(2.0 * log_std_old);
    const double var_new = std::exp(2.0 * log_std_new);
    const double base = log_std_new - log_std_old + 0.5 * var_old / var_new - 0.5;
    const double quad = (mean_old - mean_new).squaredNorm() /
                        (2.0 * var_new * static_cast<double>(mean_old.size()));
    return base + quad;
}

std::size_t GaussianPolicy::n_params() const {
    std::size_t n = 1;  // log_std
    for (std::size_t l = 0; l < w.size(); ++l) n += static_cast<std::size_t>(w[l].size() + b[l].size());
    return n;
}

Eigen::VectorXd GaussianPolicy::flatten() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_params()));
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        out.segment(offset, w[l].size()) =
            Eigen::Map<const Eigen::VectorXd>(w[l].data(), w[l].size());
        offset += w[l].size();
        out.segment(offset, b[l].size()) = b[l];
        offset += b[l].size();
    }
    out(offset) = log_std;
    return out;
}

void GaussianPolicy::set_flat(const Eigen::VectorXd& p) {
    if (p.size() != static_cast<Eigen::Index>(n_params()))
        throw std::invalid_argument("GaussianPolicy::set_flat: size mismatch");
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        Eigen::Map<const Eigen::MatrixXd> pw(p.data() + offset, w[l].rows(), w[l].cols());
        w[l] = pw;
        offset += w[l].size();
        b[l] = p.segment(offset, b[l].size());
        offset += b[l].size();
    }
    log_std = clamp_log_std(p(offset));
}

void GaussianPolicy::save(const std::string& file) const {
    const std::string tmp = file + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "w");
    if (!f) throw std::runtime_error("GaussianPolicy::save: cannot open " + tmp);
    std::fprintf(f, "cdxhedge-policy v1\n");
    std::fprintf(f, "sizes %zu", sizes.size());
    for (int s : sizes) std::fprintf(f, " %d", s);
    std::fprintf(f, "\nobs_scale");
    for (Eigen::Index i = 0; i < obs_scale.size(); ++i)
        std::fprintf(f, " %.17g", obs_scale(i));
    const Eigen::VectorXd p = flatten();
    std::fprintf(f, "\nparams %lld\n", static_cast<long long>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) std::fprintf(f, "%.17g\n", p(i));
    if (std::fclose(f) != 0) throw std::runtime_error("GaussianPolicy::save: write failed");
    if (std::rename(tmp.c_str(), file.c_str()) != 0)
        throw std::runtime_error("GaussianPolicy::save: rename failed for " + file);
}

GaussianPolicy GaussianPolicy::load(const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "r");
    if (!f) throw std::runtime_error("GaussianPolicy::load: cannot open " + file);
    char header[64] = {0};
    char version[32] = {0};
    if (std::fscanf(f, "%63s %31s", header, version) != 2 ||
        std::string(header) != "cdxhedge-policy" || std::string(version) != "v1") {
        std::fclose(f);
        throw std::runtime_error("GaussianPolicy::load: unrecognized checkpoint header");
    }
    char key[32] = {0};
    std::size_t n_sizes = 0;
    if (std::fscanf(f, "%31s %zu", key, &n_sizes) != 2 || std::string(key) != "sizes" ||
        n_sizes < 2 || n_sizes > 64) {
        std::fclose(f);
        throw std::runtime_error("GaussianPolicy::load: bad layer table");
    }
    std::vector<int> sz(n_sizes);
    for (auto& s : sz)
        if (std::fscanf(f, "%d", &s) != 1 || s < 1) {
            std::fclose(f);
            throw std::runtime_error("GaussianPolicy::load: bad layer size");
        }
    if (sz.back() != 1) {
        std::fclose(f);
        throw std::runtime_error("GaussianPolicy::load: output layer must be scalar");
    }

    GaussianPolicy policy(std::vector<int>(sz.begin() + 1, sz.end() - 1), sz.front());
    if (std::fscanf(f, "%31s", key) != 1 || std::string(key) != "obs_scale") {
        std::fclose(f);
        throw std::runtime_error("GaussianPolicy::load: missing obs_scale");
    }
    for (Eigen::Index i = 0; i < policy.obs_scale.size(); ++i)
        if (std::fscanf(f, "%lg", &policy.obs_scale(i)) != 1) {
            std::fclose(f);
            throw std::runtime_error("GaussianPolicy::load: bad obs_scale");
        }
    long long n = 0;
    if (std::fscanf(f, "%31s %lld", key, &n) != 2 || std::string(key) != "params" ||
        n != static_cast<long long>(policy.n_params())) {
        std::fclose(f);
        throw std::runtime_error("GaussianPolicy::load: parameter count mismatch");
    }
    Eigen::VectorXd p(n);
    for (long long i = 0; i < n; ++i)
        if (std::fscanf(f, "%lg", &p(i)) != 1) {
            std::fclose(f);
            throw std::runtime_error("GaussianPolicy::load: truncated parameter block");
        }
    std::fclose(f);
    policy.set_flat(p);
    return policy;
}

}  // namespace cdxhedge
