#include "heapsae/sampler.hpp"

#include "heapsae/numeric.hpp"
#include "heapsae/stats.hpp"
#include "heapsae/tables.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace heapsae {

namespace {

constexpr double kMaxDeltaH = 1000.0;

struct PhasePoint {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> grad;  // gradient of the log-density
    double lp = 0.0;
};

std::string dump_state(std::span<const double> q) {
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (std::size_t i = 0; i < q.size(); ++i) {
        os << (i ? ", " : "") << q[i];
    }
    os << "]";
    return os.str();
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

class Welford {
public:
    explicit Welford(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}

    void restart() {
        count_ = 0;
        std::fill(mean_.begin(), mean_.end(), 0.0);
        std::fill(m2_.begin(), m2_.end(), 0.0);
    }

    void add(const std::vector<double>& q) {
        ++count_;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double delta = q[i] - mean_[i];
            mean_[i] += delta / count_;
            m2_[i] += delta * (q[i] - mean_[i]);
        }
    }

    int count() const { return count_; }

    void variance(std::vector<double>& out) const {
        for (std::size_t i = 0; i < m2_.size(); ++i) {
            out[i] = m2_[i] / (count_ - 1.0);
        }
    }

private:
    int count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

class DualAveraging {
public:
    explicit DualAveraging(double delta) : delta_(delta) {}

    void set_mu(double mu) { mu_ = mu; }
    void restart() {
        counter_ = 0.0;
        s_bar_ = 0.0;
        x_bar_ = 0.0;
    }

    void learn(double& epsilon, double accept) {
        counter_ += 1.0;
        accept = std::min(1.0, accept);
        const double eta = 1.0 / (counter_ + kT0);
        s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept);
        const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
        const double x_eta = std::pow(counter_, -kKappa);
        x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
        epsilon = std::exp(x);
    }

    void complete(double& epsilon) const { epsilon = std::exp(x_bar_); }

private:
    static constexpr double kGamma = 0.05;
    static constexpr double kT0 = 10.0;
    static constexpr double kKappa = 0.75;
    double delta_;
    double mu_ = 0.0;
    double counter_ = 0.0;
    double s_bar_ = 0.0;
    double x_bar_ = 0.0;
};

class Windows {
public:
    Windows(int warmup, std::size_t dim) : warmup_(warmup), estimator_(dim) {
        if (warmup < 20) {
            active_ = false;
            return;
        }
        if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
            init_buffer_ = static_cast<int>(0.15 * warmup);
            term_buffer_ = static_cast<int>(0.1 * warmup);
            base_window_ = warmup - (init_buffer_ + term_buffer_);
        }
        window_size_ = base_window_;
        next_window_ = init_buffer_ + window_size_ - 1;
    }

    /// Returns true when a new metric was written to inv_metric.
    bool learn(std::vector<double>& inv_metric, const std::vector<double>& q) {
        if (!active_) {
            return false;
        }
        if (in_window()) {
            estimator_.add(q);
        }
        if (end_of_window()) {
            compute_next_window();
            estimator_.variance(inv_metric);
            const double n = estimator_.count();
            for (double& v : inv_metric) {
                v = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
            }
            estimator_.restart();
            ++counter_;
            return true;
        }
        ++counter_;
        return false;
    }

private:
    bool in_window() const {
        return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
    }
    bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }

    void compute_next_window() {
        if (next_window_ == warmup_ - term_buffer_ - 1) {
            return;
        }
        window_size_ *= 2;
        next_window_ = counter_ + window_size_;
        if (next_window_ != warmup_ - term_buffer_ - 1) {
            const int boundary = next_window_ + 2 * window_size_;
            if (boundary >= warmup_ - term_buffer_) {
                next_window_ = warmup_ - term_buffer_ - 1;
            }
        }
    }

    int warmup_;
    bool active_ = true;
    int init_buffer_ = 75;
    int term_buffer_ = 50;
    int base_window_ = 25;
    int counter_ = 0;
    int window_size_ = 0;
    int next_window_ = 0;
    Welford estimator_;
};

class Nuts {
public:
    Nuts(const LogDensity& target, std::uint64_t seed, std::uint64_t stream, int chain, int max_depth)
        : target_(target),
          rng_(seed, {stream, 0x6e757473ULL, static_cast<std::uint64_t>(chain)}),
          dim_(target.dim()),
          max_depth_(max_depth),
          inv_metric_(dim_, 1.0) {}

    Stream& rng() { return rng_; }
    std::vector<double>& inv_metric() { return inv_metric_; }
    double& stepsize() { return epsilon_; }
    const PhasePoint& state() const { return z_; }

    void set_position(const std::vector<double>& q) {
        z_.q = q;
        z_.p.assign(dim_, 0.0);
        z_.grad.assign(dim_, 0.0);
        z_.lp = evaluate(z_.q, z_.grad);
        if (!std::isfinite(z_.lp)) {
            throw NumericalError("non-finite log-density or gradient at the initial state " + dump_state(q));
        }
    }

    struct Transition {
        double accept = 0.0;
        int depth = 0;
        bool divergent = false;
    };

    Transition transition() {
        sample_momentum(z_);
        const double h0 = hamiltonian(z_);
        PhasePoint z_fwd = z_;
        PhasePoint z_bck = z_;
        PhasePoint z_sample = z_;
        PhasePoint z_propose = z_;

        std::vector<double> p_fwd_fwd = z_.p;
        std::vector<double> p_sharp_fwd_fwd = sharp(z_.p);
        std::vector<double> p_fwd_bck = z_.p;
        std::vector<double> p_sharp_fwd_bck = p_sharp_fwd_fwd;
        std::vector<double> p_bck_fwd = z_.p;
        std::vector<double> p_sharp_bck_fwd = p_sharp_fwd_fwd;
        std::vector<double> p_bck_bck = z_.p;
        std::vector<double> p_sharp_bck_bck = p_sharp_fwd_fwd;
        std::vector<double> rho = z_.p;

        double log_sum_weight = 0.0;
        int depth = 0;
        int n_leapfrog = 0;
        double sum_metro = 0.0;
        divergent_ = false;

        while (depth < max_depth_) {
            std::vector<double> rho_fwd(dim_, 0.0);
            std::vector<double> rho_bck(dim_, 0.0);
            bool valid = false;
            double lsw_subtree = kNegInf;
            if (rng_.uniform() > 0.5) {
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                p_sharp_bck_fwd = p_sharp_fwd_bck;
                PhasePoint& z = z_fwd;
                valid = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                   p_fwd_fwd, h0, 1.0, n_leapfrog, lsw_subtree, sum_metro);
            } else {
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                p_sharp_fwd_bck = p_sharp_bck_fwd;
                PhasePoint& z = z_bck;
                valid = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                   p_bck_bck, h0, -1.0, n_leapfrog, lsw_subtree, sum_metro);
            }
            if (!valid) {
                break;
            }
            ++depth;
            if (lsw_subtree > log_sum_weight) {
                z_sample = z_propose;
            } else if (rng_.uniform() < std::exp(lsw_subtree - log_sum_weight)) {
                z_sample = z_propose;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
            for (std::size_t i = 0; i < dim_; ++i) {
                rho[i] = rho_bck[i] + rho_fwd[i];
            }
            bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
            std::vector<double> rho_ext(dim_);
            for (std::size_t i = 0; i < dim_; ++i) {
                rho_ext[i] = rho_bck[i] + p_fwd_bck[i];
            }
            persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_ext);
            for (std::size_t i = 0; i < dim_; ++i) {
                rho_ext[i] = rho_fwd[i] + p_bck_fwd[i];
            }
            persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_ext);
            if (!persist) {
                break;
            }
        }
        z_ = z_sample;
        Transition t;
        t.accept = n_leapfrog > 0 ? sum_metro / n_leapfrog : 0.0;
        t.depth = depth;
        t.divergent = divergent_;
        return t;
    }

    /// Doubles or halves the step size until one leapfrog step crosses an
    /// acceptance of 0.8.
    void init_stepsize() {
        if (epsilon_ == 0.0 || epsilon_ > 1e7 || std::isnan(epsilon_)) {
            return;
        }
        const PhasePoint start = z_;
        sample_momentum(z_);
        double h0 = hamiltonian(z_);
        leapfrog(z_, epsilon_);
        double h = hamiltonian(z_);
        if (std::isnan(h)) {
            h = std::numeric_limits<double>::infinity();
        }
        double delta_h = h0 - h;
        const int direction = delta_h > std::log(0.8) ? 1 : -1;
        for (;;) {
            z_ = start;
            sample_momentum(z_);
            h0 = hamiltonian(z_);
            leapfrog(z_, epsilon_);
            h = hamiltonian(z_);
            if (std::isnan(h)) {
                h = std::numeric_limits<double>::infinity();
            }
            delta_h = h0 - h;
            if (direction == 1 && !(delta_h > std::log(0.8))) {
                break;
            }
            if (direction == -1 && !(delta_h < std::log(0.8))) {
                break;
            }
            epsilon_ = direction == 1 ? 2.0 * epsilon_ : 0.5 * epsilon_;
            if (epsilon_ > 1e7) {
                throw NumericalError("step size search diverged; the target may be improper");
            }
            if (epsilon_ == 0.0) {
                throw NumericalError("step size search collapsed to zero at state " + dump_state(start.q));
            }
        }
        z_ = start;
    }

private:
    // Points with a non-finite density or gradient are rejected like divergences.
    double evaluate(const std::vector<double>& q, std::vector<double>& grad) const {
        const double lp = target_.log_density(q, grad);
        if (!std::isfinite(lp)) {
            return kNegInf;
        }
        for (double g : grad) {
            if (!std::isfinite(g)) {
                return kNegInf;
            }
        }
        return lp;
    }

    void sample_momentum(PhasePoint& z) {
        z.p.resize(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            z.p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
        }
    }

    double hamiltonian(const PhasePoint& z) const {
        double t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            t += z.p[i] * z.p[i] * inv_metric_[i];
        }
        return -z.lp + 0.5 * t;
    }

    std::vector<double> sharp(const std::vector<double>& p) const {
        std::vector<double> out(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            out[i] = inv_metric_[i] * p[i];
        }
        return out;
    }

    static bool criterion(const std::vector<double>& p_sharp_minus, const std::vector<double>& p_sharp_plus,
                          const std::vector<double>& rho) {
        return dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0;
    }

    void leapfrog(PhasePoint& z, double eps) const {
        if (!std::isfinite(z.lp)) {
            return;
        }
        for (std::size_t i = 0; i < dim_; ++i) {
            z.p[i] += 0.5 * eps * z.grad[i];
        }
        for (std::size_t i = 0; i < dim_; ++i) {
            z.q[i] += eps * inv_metric_[i] * z.p[i];
        }
        z.lp = evaluate(z.q, z.grad);
        if (!std::isfinite(z.lp)) {
            return;
        }
        for (std::size_t i = 0; i < dim_; ++i) {
            z.p[i] += 0.5 * eps * z.grad[i];
        }
    }

    bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, std::vector<double>& p_sharp_beg,
                    std::vector<double>& p_sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
                    std::vector<double>& p_end, double h0, double sign, int& n_leapfrog, double& log_sum_weight,
                    double& sum_metro) {
        if (depth == 0) {
            leapfrog(z, sign * epsilon_);
            ++n_leapfrog;
            double h = std::isfinite(z.lp) ? hamiltonian(z) : std::numeric_limits<double>::infinity();
            if (std::isnan(h)) {
                h = std::numeric_limits<double>::infinity();
            }
            if (h - h0 > kMaxDeltaH) {
                divergent_ = true;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
            sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
            z_propose = z;
            p_sharp_beg = sharp(z.p);
            p_sharp_end = p_sharp_beg;
            for (std::size_t i = 0; i < dim_; ++i) {
                rho[i] += z.p[i];
            }
            p_beg = z.p;
            p_end = p_beg;
            return !divergent_;
        }

        double lsw_init = kNegInf;
        std::vector<double> p_init_end(dim_, 0.0);
        std::vector<double> p_sharp_init_end(dim_, 0.0);
        std::vector<double> rho_init(dim_, 0.0);
        if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0,
                        sign, n_leapfrog, lsw_init, sum_metro)) {
            return false;
        }

        PhasePoint z_propose_final = z;
        double lsw_final = kNegInf;
        std::vector<double> p_final_beg(dim_, 0.0);
        std::vector<double> p_sharp_final_beg(dim_, 0.0);
        std::vector<double> rho_final(dim_, 0.0);
        if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg,
                        p_end, h0, sign, n_leapfrog, lsw_final, sum_metro)) {
            return false;
        }

        const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
        if (lsw_final > lsw_subtree) {
            z_propose = z_propose_final;
        } else if (rng_.uniform() < std::exp(lsw_final - lsw_subtree)) {
            z_propose = z_propose_final;
        }

        std::vector<double> rho_subtree(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            rho_subtree[i] = rho_init[i] + rho_final[i];
            rho[i] += rho_subtree[i];
        }
        bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
        std::vector<double> rho_ext(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            rho_ext[i] = rho_init[i] + p_final_beg[i];
        }
        persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_ext);
        for (std::size_t i = 0; i < dim_; ++i) {
            rho_ext[i] = rho_final[i] + p_init_end[i];
        }
        persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_ext);
        return persist;
    }

    const LogDensity& target_;
    Stream rng_;
    std::size_t dim_;
    int max_depth_;
    std::vector<double> inv_metric_;
    double epsilon_ = 1.0;
    bool divergent_ = false;
    PhasePoint z_;
};

struct ChainResult {
    std::vector<std::vector<double>> rows;
    std::vector<double> lp;
    ChainInfo info;
};

ChainResult run_chain(const LogDensity& target, const ChainConfig& config, int chain) {
    Nuts nuts(target, config.seed, config.stream, chain, config.max_depth);
    Stream init_rng(config.seed, {config.stream, 0x696e6974ULL, static_cast<std::uint64_t>(chain)});
    bool ok = false;
    std::vector<double> q;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        q = target.initial_point(init_rng);
        std::vector<double> grad(target.dim());
        const double lp = target.log_density(q, grad);
        ok = std::isfinite(lp) && std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
    }
    if (!ok) {
        throw NumericalError("chain " + std::to_string(chain + 1) +
                             ": no finite initial point after 100 attempts; last state " + dump_state(q));
    }
    nuts.set_position(q);
    nuts.init_stepsize();

    DualAveraging adapt(config.target_acceptance);
    adapt.set_mu(std::log(10.0 * nuts.stepsize()));
    Windows windows(config.warmup, target.dim());

    ChainResult result;
    const int kept = config.iterations - config.warmup;
    result.rows.reserve(kept);
    double accept_sum = 0.0;
    for (int it = 0; it < config.iterations; ++it) {
        const bool warm = it < config.warmup;
        const Nuts::Transition t = nuts.transition();
        if (warm) {
            adapt.learn(nuts.stepsize(), t.accept);
            if (windows.learn(nuts.inv_metric(), nuts.state().q)) {
                nuts.init_stepsize();
                adapt.set_mu(std::log(10.0 * nuts.stepsize()));
                adapt.restart();
            }
            if (it == config.warmup - 1) {
                adapt.complete(nuts.stepsize());
            }
            continue;
        }
        accept_sum += t.accept;
        result.info.divergences += t.divergent ? 1 : 0;
        result.info.max_treedepth_hits += t.depth >= config.max_depth ? 1 : 0;
        result.rows.push_back(target.output_values(nuts.state().q));
        result.lp.push_back(nuts.state().lp);
    }
    result.info.stepsize = nuts.stepsize();
    result.info.inv_metric = nuts.inv_metric();
    result.info.mean_accept = kept > 0 ? accept_sum / kept : 0.0;
    return result;
}

std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + half);
        out.emplace_back(c.end() - half, c.end());
    }
    return out;
}

void check_chains(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 1) {
        throw std::invalid_argument("diagnostics need at least one chain");
    }
    const std::size_t n = chains.front().size();
    if (n < 4) {
        throw std::invalid_argument("diagnostics need at least 4 draws per chain");
    }
    for (const auto& c : chains) {
        if (c.size() != n) {
            throw std::invalid_argument("chains must have equal length");
        }
    }
}

double rhat_basic(const std::vector<std::vector<double>>& chains) {
    const double m = static_cast<double>(chains.size());
    const double n = static_cast<double>(chains.front().size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& c : chains) {
        const double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : c) {
            ss += (v - mean) * (v - mean);
        }
        means.push_back(mean);
        w += ss / (n - 1.0);
    }
    w /= m;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    double b = 0.0;
    for (double mu : means) {
        b += (mu - grand) * (mu - grand);
    }
    b = b * n / (m - 1.0);
    if (!(w > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t i = 0; i < chains[c].size(); ++i) {
            all.emplace_back(chains[c][i], c * chains[c].size() + i);
        }
    }
    std::sort(all.begin(), all.end());
    const double s = static_cast<double>(all.size());
    std::vector<double> ranks(all.size());
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) {
            ++j;
        }
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            ranks[all[k].second] = avg;
        }
        i = j;
    }
    const boost::math::normal_distribution<double> normal;
    std::vector<std::vector<double>> out(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
        out[c].resize(chains[c].size());
        for (std::size_t i = 0; i < chains[c].size(); ++i) {
            const double r = ranks[c * chains[c].size() + i];
            out[c][i] = boost::math::quantile(normal, (r - 0.375) / (s + 0.25));
        }
    }
    return out;
}

double ess_of(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    std::vector<double> means(m);
    std::vector<double> vars(m);
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = std::accumulate(chains[c].begin(), chains[c].end(), 0.0) / n;
        double ss = 0.0;
        for (double v : chains[c]) {
            ss += (v - means[c]) * (v - means[c]);
        }
        vars[c] = ss / (n - 1.0);
    }
    const double mean_var = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
    double var_plus = mean_var * (n - 1.0) / n;
    if (m > 1) {
        const double gm = std::accumulate(means.begin(), means.end(), 0.0) / m;
        double ss = 0.0;
        for (double mu : means) {
            ss += (mu - gm) * (mu - gm);
        }
        var_plus += ss / (m - 1.0);
    }
    if (!(var_plus > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    // Mean autocovariance across chains at lag t (biased estimator).
    auto acov = [&](std::size_t t) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i + t < n; ++i) {
                s += (chains[c][i] - means[c]) * (chains[c][i + t] - means[c]);
            }
            acc += s / n;
        }
        return acc / m;
    };
    std::vector<double> rho(n, 0.0);
    rho[0] = 1.0;
    double rho_even = 1.0;
    double rho_odd = 1.0 - (mean_var - acov(1)) / var_plus;
    rho[1] = rho_odd;
    std::size_t s = 1;
    while (s < n - 4 && rho_even + rho_odd > 0.0) {
        rho_even = 1.0 - (mean_var - acov(s + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov(s + 2)) / var_plus;
        if (rho_even + rho_odd >= 0.0) {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    const std::size_t max_s = s;
    if (rho_even > 0.0) {
        rho[max_s + 1] = rho_even;
    }
    for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
        if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
            rho[t + 2] = rho[t + 1];
        }
    }
    const double total = static_cast<double>(m * n);
    double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + static_cast<long>(max_s) + 1, 0.0) +
                 (max_s + 1 < n ? rho[max_s + 1] : 0.0);
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

}  // namespace

void ChainConfig::validate() const {
    if (chains < 1) {
        throw std::invalid_argument("at least one chain is required");
    }
    if (warmup < 0 || iterations <= warmup) {
        throw std::invalid_argument("iterations must exceed warmup");
    }
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
        throw std::invalid_argument("target acceptance must lie in (0, 1)");
    }
    if (max_depth < 1) {
        throw std::invalid_argument("maximum tree depth must be positive");
    }
    if (workers < 1) {
        throw std::invalid_argument("workers must be positive");
    }
}

PosteriorDraws::PosteriorDraws(std::vector<std::string> names, int chains, int per_chain)
    : names_(std::move(names)), chains_(chains), per_chain_(per_chain) {}

std::span<const double> PosteriorDraws::row(std::size_t r) const {
    return std::span<const double>(values_.data() + r * names_.size(), names_.size());
}

std::size_t PosteriorDraws::index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        throw std::invalid_argument("no parameter named '" + name + "' in the draws");
    }
    return static_cast<std::size_t>(it - names_.begin());
}

bool PosteriorDraws::has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::vector<double> PosteriorDraws::column(std::size_t col) const {
    std::vector<double> out(draws());
    for (std::size_t r = 0; r < draws(); ++r) {
        out[r] = at(r, col);
    }
    return out;
}

std::vector<std::vector<double>> PosteriorDraws::by_chain(std::size_t col) const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(chains_));
    for (std::size_t r = 0; r < draws(); ++r) {
        out[static_cast<std::size_t>(chain_[r])].push_back(at(r, col));
    }
    return out;
}

void PosteriorDraws::append(int chain, int iteration, std::span<const double> values, double lp) {
    if (values.size() != names_.size()) {
        throw std::invalid_argument("draw row length does not match the parameter names");
    }
    if (chain < 0 || chain >= chains_) {
        throw std::invalid_argument("chain index out of range");
    }
    chain_.push_back(chain);
    iteration_.push_back(iteration);
    values_.insert(values_.end(), values.begin(), values.end());
    lp_.push_back(lp);
}

PosteriorDraws run_mcmc(const LogDensity& target, const ChainConfig& config) {
    config.validate();
    std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
    std::vector<std::exception_ptr> errors(results.size());
    const int workers = std::min(config.workers, config.chains);
    if (workers <= 1) {
        for (int c = 0; c < config.chains; ++c) {
            results[c] = run_chain(target, config, c);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int c = next++; c < config.chains; c = next++) {
                    try {
                        results[c] = run_chain(target, config, c);
                    } catch (...) {
                        errors[c] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    const int kept = config.iterations - config.warmup;
    PosteriorDraws draws(target.output_names(), config.chains, kept);
    for (int c = 0; c < config.chains; ++c) {
        for (int i = 0; i < kept; ++i) {
            draws.append(c, i + 1, results[c].rows[i], results[c].lp[i]);
        }
        draws.info.push_back(results[c].info);
    }
    return draws;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
    check_chains(chains);
    const auto split = split_chains(chains);
    const double bulk = rhat_basic(rank_normalize(split));
    std::vector<double> pooled;
    for (const auto& c : chains) {
        pooled.insert(pooled.end(), c.begin(), c.end());
    }
    std::nth_element(pooled.begin(), pooled.begin() + pooled.size() / 2, pooled.end());
    double median = pooled[pooled.size() / 2];
    if (pooled.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(pooled.begin(), pooled.begin() + pooled.size() / 2));
    }
    auto folded = split;
    for (auto& c : folded) {
        for (double& v : c) {
            v = std::abs(v - median);
        }
    }
    const double tail = rhat_basic(rank_normalize(folded));
    if (std::isnan(bulk) || std::isnan(tail)) {
        return std::isnan(bulk) ? tail : bulk;
    }
    return std::max(bulk, tail);
}

double split_rhat(const PosteriorDraws& draws, std::size_t col) {
    return split_rhat(draws.by_chain(col));
}

double ess(const std::vector<std::vector<double>>& chains) {
    check_chains(chains);
    return ess_of(split_chains(chains));
}

double ess(const PosteriorDraws& draws, std::size_t col) {
    return ess(draws.by_chain(col));
}

double ess_bulk(const std::vector<std::vector<double>>& chains) {
    check_chains(chains);
    return ess_of(rank_normalize(split_chains(chains)));
}

std::vector<ParameterSummary> summarize_parameters(const PosteriorDraws& draws) {
    std::vector<ParameterSummary> out;
    for (std::size_t j = 0; j < draws.columns(); ++j) {
        ParameterSummary s;
        s.name = draws.names()[j];
        const std::vector<double> col = draws.column(j);
        const Summary basic = summarize(col);
        s.mean = basic.mean;
        s.sd = basic.sd;
        s.q05 = basic.q05;
        s.q95 = basic.q95;
        s.q50 = quantile(col, 0.5);
        const auto chains = draws.by_chain(j);
        s.rhat = split_rhat(chains);
        s.ess_bulk = ess_bulk(chains);
        out.push_back(s);
    }
    return out;
}

double max_rhat(const PosteriorDraws& draws) {
    double worst = 0.0;
    for (std::size_t j = 0; j < draws.columns(); ++j) {
        const double r = split_rhat(draws, j);
        if (std::isnan(r)) {
            continue;
        }
        worst = std::max(worst, r);
    }
    return worst;
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
    Table t;
    t.columns = {"chain", "iteration", "lp__"};
    t.columns.insert(t.columns.end(), draws.names().begin(), draws.names().end());
    for (std::size_t r = 0; r < draws.draws(); ++r) {
        std::vector<std::string> row{std::to_string(draws.chain(r) + 1), std::to_string(draws.iteration(r)),
                                     format_double(draws.log_density(r))};
        for (double v : draws.row(r)) {
            row.push_back(format_double(v));
        }
        t.rows.push_back(std::move(row));
    }
    write_table(path, t);
}

PosteriorDraws read_draws_csv(const std::string& path) {
    const Table t = read_table(path);
    if (t.columns.size() < 3 || t.columns[0] != "chain" || t.columns[1] != "iteration" || t.columns[2] != "lp__") {
        throw std::invalid_argument(path + ": draw file must start with columns chain, iteration, lp__");
    }
    std::vector<std::string> names(t.columns.begin() + 3, t.columns.end());
    int chains = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        chains = std::max(chains, parse_int(t.rows[r][0], path, r + 2, "chain"));
    }
    if (chains < 1 || t.rows.size() % static_cast<std::size_t>(chains) != 0) {
        throw std::invalid_argument(path + ": draw file must hold an equal number of draws per chain");
    }
    PosteriorDraws draws(names, chains, static_cast<int>(t.rows.size() / chains));
    std::vector<double> values(names.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        for (std::size_t j = 0; j < names.size(); ++j) {
            values[j] = parse_double(row[j + 3], path, r + 2, names[j]);
        }
        draws.append(parse_int(row[0], path, r + 2, "chain") - 1, parse_int(row[1], path, r + 2, "iteration"),
                     values, parse_double(row[2], path, r + 2, "lp__"));
    }
    return draws;
}

}  // namespace heapsae
