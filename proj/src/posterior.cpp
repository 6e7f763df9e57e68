#include "heapsae/posterior.hpp"

#include "heapsae/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace heapsae {

namespace {

constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

std::string indexed(const std::string& name, std::size_t i) {
    return name + "[" + std::to_string(i + 1) + "]";
}

void append_vector(std::vector<std::string>& out, const std::string& name, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(indexed(name, i));
    }
}

// log N(x; m, s) with its derivative in x.
double normal_term(double x, double m, double s, double& dx) {
    dx = -(x - m) / (s * s);
    return normal_logpdf(x, m, s);
}

// GHN prior on exp(s) plus the log-Jacobian s.
double ghn_log_term(double s, double a, double b, double& ds) {
    const double x = std::exp(s);
    const double r = std::pow(x / b, 2.0 * a);
    ds = a - a * r;
    return ghn_logpdf(x, a, b) + s;
}

// HN prior on exp(s) plus the log-Jacobian s.
double hn_log_term(double s, double scale, double& ds) {
    const double x = std::exp(s);
    ds = 1.0 - (x * x) / (scale * scale);
    return hn_logpdf(x, scale) + s;
}

bool usable(double v) {
    return std::isfinite(v) && v > 0.0;
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::ln:
        return "LN";
    case ModelKind::ln_c:
        return "LN-C";
    case ModelKind::lnm:
        return "LNM";
    case ModelKind::lnm_c:
        return "LNM-C";
    }
    throw std::invalid_argument("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
    for (ModelKind k : kAllModels) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument("model must be one of LN, LN-C, LNM, LNM-C; got '" + name + "'");
}

double LogDensity::log_density(std::span<const double> q) const {
    std::vector<double> grad(dim());
    return log_density(q, grad);
}

std::vector<std::string> intensity_output_names(const ModelSpec& spec, std::size_t p, std::size_t domains) {
    std::vector<std::string> out{"beta0_mu1"};
    if (spec.components() == 2) {
        out.push_back("beta0_mu2");
    }
    append_vector(out, "beta_mu", p);
    append_vector(out, "u_mu", domains);
    out.push_back("tau_mu");
    out.push_back("sigma1");
    if (spec.components() == 2) {
        out.push_back("sigma2");
        out.push_back("beta0_pi");
        append_vector(out, "beta_pi", p);
        append_vector(out, "u_pi", domains);
        out.push_back("tau_pi");
    }
    if (spec.coarsened()) {
        if (spec.mode == HeapingMode::full) {
            out.push_back("gamma01");
            out.push_back("gamma02");
        } else {
            out.push_back("gamma0");
        }
        out.push_back("gamma1");
    }
    return out;
}

std::vector<std::string> participation_output_names(std::size_t p, std::size_t domains) {
    std::vector<std::string> out{"beta0_nu"};
    append_vector(out, "beta_nu", p);
    append_vector(out, "u_nu", domains);
    out.push_back("tau_nu");
    return out;
}

IntensityPosterior::IntensityPosterior(IntensityData data, ModelSpec spec, PriorConfig prior)
    : data_(std::move(data)), spec_(spec), prior_(prior) {
    prior_.validate();
    if (data_.domains < 1) {
        throw std::invalid_argument("at least one domain is required");
    }
    p_ = data_.covariates;
    d_ = static_cast<std::size_t>(data_.domains);
    const bool mix = spec_.components() == 2;
    std::size_t k = 0;
    beta0_mu1_ = k++;
    log_gap_mu_ = mix ? k++ : kAbsent;
    beta_mu_ = k;
    k += p_;
    raw_mu_ = k;
    k += d_;
    log_tau_mu_ = k++;
    log_sigma1_ = k++;
    log_sigma2_ = mix ? k++ : kAbsent;
    beta0_pi_ = mix ? k++ : kAbsent;
    beta_pi_ = kAbsent;
    raw_pi_ = kAbsent;
    if (mix) {
        beta_pi_ = k;
        k += p_;
        raw_pi_ = k;
        k += d_;
    }
    log_tau_pi_ = mix ? k++ : kAbsent;
    gamma01_ = spec_.coarsened() ? k++ : kAbsent;
    log_gap_gamma_ = spec_.coarsened() && spec_.mode == HeapingMode::full ? k++ : kAbsent;
    gamma1_ = spec_.coarsened() ? k++ : kAbsent;
    dim_ = k;
}

std::vector<std::string> IntensityPosterior::unconstrained_names() const {
    std::vector<std::string> out{"beta0_mu1"};
    const bool mix = spec_.components() == 2;
    if (mix) {
        out.push_back("log_gap_mu");
    }
    append_vector(out, "beta_mu", p_);
    append_vector(out, "raw_mu", d_);
    out.push_back("log_tau_mu");
    out.push_back("log_sigma1");
    if (mix) {
        out.push_back("log_sigma2");
        out.push_back("beta0_pi");
        append_vector(out, "beta_pi", p_);
        append_vector(out, "raw_pi", d_);
        out.push_back("log_tau_pi");
    }
    if (spec_.coarsened()) {
        out.push_back(spec_.mode == HeapingMode::full ? "gamma01" : "gamma0");
        if (spec_.mode == HeapingMode::full) {
            out.push_back("log_gap_gamma");
        }
        out.push_back("gamma1");
    }
    return out;
}

std::vector<std::string> IntensityPosterior::output_names() const {
    return intensity_output_names(spec_, p_, d_);
}

IntensityState IntensityPosterior::to_constrained(std::span<const double> q, double* log_jacobian) const {
    if (q.size() != dim_) {
        throw std::invalid_argument("unconstrained vector has the wrong length");
    }
    IntensityState s;
    IntensityParams& t = s.theta;
    t.components = spec_.components();
    t.beta0_mu1 = q[beta0_mu1_];
    t.beta_mu.assign(q.begin() + beta_mu_, q.begin() + beta_mu_ + p_);
    t.tau_mu = std::exp(q[log_tau_mu_]);
    t.u_mu.resize(d_);
    for (std::size_t d = 0; d < d_; ++d) {
        t.u_mu[d] = t.tau_mu * q[raw_mu_ + d];
    }
    t.sigma1 = std::exp(q[log_sigma1_]);
    double lj = q[log_tau_mu_] * (1.0 + static_cast<double>(d_)) + q[log_sigma1_];
    if (t.is_mixture()) {
        t.beta0_mu2 = t.beta0_mu1 + std::exp(q[log_gap_mu_]);
        t.sigma2 = std::exp(q[log_sigma2_]);
        t.beta0_pi = q[beta0_pi_];
        t.beta_pi.assign(q.begin() + beta_pi_, q.begin() + beta_pi_ + p_);
        t.tau_pi = std::exp(q[log_tau_pi_]);
        t.u_pi.resize(d_);
        for (std::size_t d = 0; d < d_; ++d) {
            t.u_pi[d] = t.tau_pi * q[raw_pi_ + d];
        }
        lj += q[log_gap_mu_] + q[log_sigma2_] + q[log_tau_pi_] * (1.0 + static_cast<double>(d_));
    } else {
        t.beta0_mu2 = t.beta0_mu1;
    }
    if (spec_.coarsened()) {
        HeapingParams g;
        g.mode = spec_.mode;
        g.gamma01 = q[gamma01_];
        g.gamma1 = q[gamma1_];
        if (spec_.mode == HeapingMode::full) {
            g.gamma02 = g.gamma01 + std::exp(q[log_gap_gamma_]);
            lj += q[log_gap_gamma_];
        }
        s.gamma = g;
    }
    if (log_jacobian) {
        *log_jacobian = lj;
    }
    return s;
}

std::vector<double> IntensityPosterior::to_unconstrained(const IntensityState& state) const {
    const IntensityParams& t = state.theta;
    if (t.components != spec_.components()) {
        throw std::invalid_argument("state has the wrong number of mixture components");
    }
    if (t.beta_mu.size() != p_ || t.u_mu.size() != d_) {
        throw std::invalid_argument("state dimensions do not match the data");
    }
    t.validate();
    std::vector<double> q(dim_);
    q[beta0_mu1_] = t.beta0_mu1;
    std::copy(t.beta_mu.begin(), t.beta_mu.end(), q.begin() + beta_mu_);
    q[log_tau_mu_] = std::log(t.tau_mu);
    for (std::size_t d = 0; d < d_; ++d) {
        q[raw_mu_ + d] = t.u_mu[d] / t.tau_mu;
    }
    q[log_sigma1_] = std::log(t.sigma1);
    if (t.is_mixture()) {
        if (t.beta_pi.size() != p_ || t.u_pi.size() != d_) {
            throw std::invalid_argument("state dimensions do not match the data");
        }
        q[log_gap_mu_] = std::log(t.beta0_mu2 - t.beta0_mu1);
        q[log_sigma2_] = std::log(t.sigma2);
        q[beta0_pi_] = t.beta0_pi;
        std::copy(t.beta_pi.begin(), t.beta_pi.end(), q.begin() + beta_pi_);
        q[log_tau_pi_] = std::log(t.tau_pi);
        for (std::size_t d = 0; d < d_; ++d) {
            q[raw_pi_ + d] = t.u_pi[d] / t.tau_pi;
        }
    }
    if (spec_.coarsened()) {
        if (!state.gamma || state.gamma->mode != spec_.mode) {
            throw std::invalid_argument("coarsened model needs heaping parameters of the matching mode");
        }
        state.gamma->validate();
        q[gamma01_] = state.gamma->gamma01;
        q[gamma1_] = state.gamma->gamma1;
        if (spec_.mode == HeapingMode::full) {
            q[log_gap_gamma_] = std::log(state.gamma->gamma02 - state.gamma->gamma01);
        }
    }
    return q;
}

std::vector<double> IntensityPosterior::output_values(std::span<const double> q) const {
    const IntensityState s = to_constrained(q);
    const IntensityParams& t = s.theta;
    std::vector<double> out{t.beta0_mu1};
    if (t.is_mixture()) {
        out.push_back(t.beta0_mu2);
    }
    out.insert(out.end(), t.beta_mu.begin(), t.beta_mu.end());
    out.insert(out.end(), t.u_mu.begin(), t.u_mu.end());
    out.push_back(t.tau_mu);
    out.push_back(t.sigma1);
    if (t.is_mixture()) {
        out.push_back(t.sigma2);
        out.push_back(t.beta0_pi);
        out.insert(out.end(), t.beta_pi.begin(), t.beta_pi.end());
        out.insert(out.end(), t.u_pi.begin(), t.u_pi.end());
        out.push_back(t.tau_pi);
    }
    if (s.gamma) {
        out.push_back(s.gamma->gamma01);
        if (s.gamma->mode == HeapingMode::full) {
            out.push_back(s.gamma->gamma02);
        }
        out.push_back(s.gamma->gamma1);
    }
    return out;
}

IntensityState intensity_state_from_values(const ModelSpec& spec_, std::size_t p_, std::size_t d_,
                                          std::span<const double> v) {
    const std::size_t expected = intensity_output_names(spec_, p_, d_).size();
    if (v.size() != expected) {
        throw std::invalid_argument("draw row has " + std::to_string(v.size()) + " values, expected " +
                                    std::to_string(expected));
    }
    IntensityState s;
    IntensityParams& t = s.theta;
    t.components = spec_.components();
    std::size_t k = 0;
    t.beta0_mu1 = v[k++];
    t.beta0_mu2 = t.is_mixture() ? v[k++] : t.beta0_mu1;
    t.beta_mu.assign(v.begin() + k, v.begin() + k + p_);
    k += p_;
    t.u_mu.assign(v.begin() + k, v.begin() + k + d_);
    k += d_;
    t.tau_mu = v[k++];
    t.sigma1 = v[k++];
    if (t.is_mixture()) {
        t.sigma2 = v[k++];
        t.beta0_pi = v[k++];
        t.beta_pi.assign(v.begin() + k, v.begin() + k + p_);
        k += p_;
        t.u_pi.assign(v.begin() + k, v.begin() + k + d_);
        k += d_;
        t.tau_pi = v[k++];
    }
    if (spec_.coarsened()) {
        HeapingParams g;
        g.mode = spec_.mode;
        g.gamma01 = v[k++];
        if (g.mode == HeapingMode::full) {
            g.gamma02 = v[k++];
        }
        g.gamma1 = v[k++];
        s.gamma = g;
    }
    return s;
}

IntensityState IntensityPosterior::from_output(std::span<const double> v) const {
    return intensity_state_from_values(spec_, p_, d_, v);
}

std::vector<double> IntensityPosterior::initial_point(Stream& rng) const {
    std::vector<double> q(dim_);
    for (double& v : q) {
        v = 2.0 * rng.uniform() - 1.0;
    }
    const double m = prior_.mu_center;
    const double s = prior_.mu_scale;
    if (spec_.components() == 2) {
        q[beta0_mu1_] = m - 0.5 * s;
        q[log_gap_mu_] = std::log(s);
    } else {
        q[beta0_mu1_] = m;
    }
    return q;
}

double IntensityPosterior::log_density(std::span<const double> q, std::span<double> grad) const {
    if (q.size() != dim_ || grad.size() != dim_) {
        throw std::invalid_argument("unconstrained vector has the wrong length");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const bool mix = spec_.components() == 2;
    const double b01 = q[beta0_mu1_];
    const double gap = mix ? std::exp(q[log_gap_mu_]) : 0.0;
    const double tau_mu = std::exp(q[log_tau_mu_]);
    const double sigma1 = std::exp(q[log_sigma1_]);
    const double sigma2 = mix ? std::exp(q[log_sigma2_]) : 1.0;
    const double tau_pi = mix ? std::exp(q[log_tau_pi_]) : 1.0;
    if (!usable(tau_mu) || !usable(sigma1) || !usable(sigma2) || !usable(tau_pi) || (mix && !usable(gap))) {
        return kNegInf;
    }

    std::optional<ReportKernel> kernel;
    double gap_gamma = 0.0;
    if (spec_.coarsened()) {
        HeapingParams g;
        g.mode = spec_.mode;
        g.gamma01 = q[gamma01_];
        g.gamma1 = q[gamma1_];
        if (spec_.mode == HeapingMode::full) {
            gap_gamma = std::exp(q[log_gap_gamma_]);
            g.gamma02 = g.gamma01 + gap_gamma;
            if (!usable(gap_gamma) || !(g.gamma02 > g.gamma01)) {
                return kNegInf;
            }
        }
        if (!std::isfinite(g.gamma01) || !std::isfinite(g.gamma1)) {
            return kNegInf;
        }
        kernel.emplace(g);
    }
    const ObservationModel obs = spec_.observation();
    const ReportKernel* kp = kernel ? &*kernel : nullptr;

    double lp = 0.0;
    double g_gamma[3] = {0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < data_.pattern_x.size(); ++c) {
        const std::vector<double>& x = data_.pattern_x[c];
        const std::size_t d = static_cast<std::size_t>(data_.pattern_domain[c]);
        MixtureAt m;
        m.components = spec_.components();
        double eta_mu = b01 + tau_mu * q[raw_mu_ + d];
        for (std::size_t j = 0; j < p_; ++j) {
            eta_mu += x[j] * q[beta_mu_ + j];
        }
        m.mu1 = eta_mu;
        m.sigma1 = sigma1;
        if (mix) {
            m.mu2 = eta_mu + gap;
            m.sigma2 = sigma2;
            double eta_pi = q[beta0_pi_] + tau_pi * q[raw_pi_ + d];
            for (std::size_t j = 0; j < p_; ++j) {
                eta_pi += x[j] * q[beta_pi_ + j];
            }
            m.pi = expit(eta_pi);
        }
        PatternGradient pg;
        const double ll = pattern_loglik(m, data_.counts[c], obs, kp, &pg);
        if (!std::isfinite(ll)) {
            return kNegInf;
        }
        lp += ll;
        const double g_loc = pg.mu1 + pg.mu2;
        grad[beta0_mu1_] += g_loc;
        for (std::size_t j = 0; j < p_; ++j) {
            grad[beta_mu_ + j] += g_loc * x[j];
        }
        grad[raw_mu_ + d] += g_loc * tau_mu;
        grad[log_tau_mu_] += g_loc * tau_mu * q[raw_mu_ + d];
        grad[log_sigma1_] += pg.sigma1 * sigma1;
        if (mix) {
            grad[log_gap_mu_] += pg.mu2 * gap;
            grad[log_sigma2_] += pg.sigma2 * sigma2;
            grad[beta0_pi_] += pg.eta;
            for (std::size_t j = 0; j < p_; ++j) {
                grad[beta_pi_ + j] += pg.eta * x[j];
            }
            grad[raw_pi_ + d] += pg.eta * tau_pi;
            grad[log_tau_pi_] += pg.eta * tau_pi * q[raw_pi_ + d];
        }
        g_gamma[0] += pg.gamma[0];
        g_gamma[1] += pg.gamma[1];
        g_gamma[2] += pg.gamma[2];
    }
    if (spec_.coarsened()) {
        grad[gamma01_] += g_gamma[0] + g_gamma[1];
        grad[gamma1_] += g_gamma[2];
        if (spec_.mode == HeapingMode::full) {
            grad[log_gap_gamma_] += g_gamma[1] * gap_gamma;
        }
    }

    // Priors and log-Jacobians.
    const double mu_sd = prior_.intercept_sd * prior_.mu_scale;
    const double slope_sd = prior_.coef_sd * prior_.mu_scale;
    const double a = prior_.ghn_shape;
    const double b = prior_.ghn_scale;
    double dv = 0.0;
    lp += normal_term(b01, prior_.mu_center, mu_sd, dv);
    grad[beta0_mu1_] += dv;
    if (mix) {
        lp += normal_term(b01 + gap, prior_.mu_center, mu_sd, dv) + q[log_gap_mu_];
        grad[beta0_mu1_] += dv;
        grad[log_gap_mu_] += dv * gap + 1.0;
    }
    for (std::size_t j = 0; j < p_; ++j) {
        lp += normal_term(q[beta_mu_ + j], 0.0, slope_sd, dv);
        grad[beta_mu_ + j] += dv;
    }
    for (std::size_t d = 0; d < d_; ++d) {
        lp += normal_term(q[raw_mu_ + d], 0.0, 1.0, dv);
        grad[raw_mu_ + d] += dv;
    }
    lp += ghn_log_term(q[log_tau_mu_], a, b, dv);
    grad[log_tau_mu_] += dv;
    lp += ghn_log_term(q[log_sigma1_], a, b, dv);
    grad[log_sigma1_] += dv;
    if (mix) {
        lp += ghn_log_term(q[log_sigma2_], a, b, dv);
        grad[log_sigma2_] += dv;
        lp += normal_term(q[beta0_pi_], 0.0, prior_.intercept_sd, dv);
        grad[beta0_pi_] += dv;
        for (std::size_t j = 0; j < p_; ++j) {
            lp += normal_term(q[beta_pi_ + j], 0.0, prior_.coef_sd, dv);
            grad[beta_pi_ + j] += dv;
        }
        for (std::size_t d = 0; d < d_; ++d) {
            lp += normal_term(q[raw_pi_ + d], 0.0, 1.0, dv);
            grad[raw_pi_ + d] += dv;
        }
        lp += hn_log_term(q[log_tau_pi_], prior_.hn_scale, dv);
        grad[log_tau_pi_] += dv;
    }
    if (spec_.coarsened()) {
        lp += normal_term(q[gamma01_], 0.0, prior_.intercept_sd, dv);
        grad[gamma01_] += dv;
        lp += normal_term(q[gamma1_], 0.0, prior_.coef_sd, dv);
        grad[gamma1_] += dv;
        if (spec_.mode == HeapingMode::full) {
            lp += normal_term(q[gamma01_] + gap_gamma, 0.0, prior_.intercept_sd, dv) + q[log_gap_gamma_];
            grad[gamma01_] += dv;
            grad[log_gap_gamma_] += dv * gap_gamma + 1.0;
        }
    }
    return lp;
}

ParticipationPosterior::ParticipationPosterior(ParticipationData data, PriorConfig prior)
    : data_(std::move(data)), prior_(prior) {
    prior_.validate();
    if (data_.domains < 1) {
        throw std::invalid_argument("at least one domain is required");
    }
    p_ = data_.covariates;
    d_ = static_cast<std::size_t>(data_.domains);
}

std::vector<std::string> ParticipationPosterior::unconstrained_names() const {
    std::vector<std::string> out{"beta0_nu"};
    append_vector(out, "beta_nu", p_);
    append_vector(out, "raw_nu", d_);
    out.push_back("log_tau_nu");
    return out;
}

std::vector<std::string> ParticipationPosterior::output_names() const {
    return participation_output_names(p_, d_);
}

ParticipationParams ParticipationPosterior::to_constrained(std::span<const double> q, double* log_jacobian) const {
    if (q.size() != dim()) {
        throw std::invalid_argument("unconstrained vector has the wrong length");
    }
    ParticipationParams delta;
    delta.beta0 = q[0];
    delta.beta.assign(q.begin() + 1, q.begin() + 1 + p_);
    const double s = q[1 + p_ + d_];
    delta.tau = std::exp(s);
    delta.u.resize(d_);
    for (std::size_t d = 0; d < d_; ++d) {
        delta.u[d] = delta.tau * q[1 + p_ + d];
    }
    if (log_jacobian) {
        *log_jacobian = s * (1.0 + static_cast<double>(d_));
    }
    return delta;
}

std::vector<double> ParticipationPosterior::to_unconstrained(const ParticipationParams& delta) const {
    delta.validate();
    if (delta.beta.size() != p_ || delta.u.size() != d_) {
        throw std::invalid_argument("state dimensions do not match the data");
    }
    std::vector<double> q(dim());
    q[0] = delta.beta0;
    std::copy(delta.beta.begin(), delta.beta.end(), q.begin() + 1);
    for (std::size_t d = 0; d < d_; ++d) {
        q[1 + p_ + d] = delta.u[d] / delta.tau;
    }
    q[1 + p_ + d_] = std::log(delta.tau);
    return q;
}

std::vector<double> ParticipationPosterior::output_values(std::span<const double> q) const {
    const ParticipationParams delta = to_constrained(q);
    std::vector<double> out{delta.beta0};
    out.insert(out.end(), delta.beta.begin(), delta.beta.end());
    out.insert(out.end(), delta.u.begin(), delta.u.end());
    out.push_back(delta.tau);
    return out;
}

ParticipationParams participation_state_from_values(std::size_t p_, std::size_t d_, std::span<const double> v) {
    if (v.size() != 2 + p_ + d_) {
        throw std::invalid_argument("participation draw row has the wrong length");
    }
    ParticipationParams delta;
    delta.beta0 = v[0];
    delta.beta.assign(v.begin() + 1, v.begin() + 1 + p_);
    delta.u.assign(v.begin() + 1 + p_, v.begin() + 1 + p_ + d_);
    delta.tau = v[1 + p_ + d_];
    return delta;
}

ParticipationParams ParticipationPosterior::from_output(std::span<const double> v) const {
    return participation_state_from_values(p_, d_, v);
}

std::vector<double> ParticipationPosterior::initial_point(Stream& rng) const {
    std::vector<double> q(dim());
    for (double& v : q) {
        v = 2.0 * rng.uniform() - 1.0;
    }
    return q;
}

double ParticipationPosterior::log_density(std::span<const double> q, std::span<double> grad) const {
    if (q.size() != dim() || grad.size() != dim()) {
        throw std::invalid_argument("unconstrained vector has the wrong length");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const std::size_t raw = 1 + p_;
    const std::size_t ls = 1 + p_ + d_;
    const double tau = std::exp(q[ls]);
    if (!usable(tau)) {
        return kNegInf;
    }
    double lp = 0.0;
    for (std::size_t c = 0; c < data_.pattern_x.size(); ++c) {
        const std::vector<double>& x = data_.pattern_x[c];
        const std::size_t d = static_cast<std::size_t>(data_.pattern_domain[c]);
        double eta = q[0] + tau * q[raw + d];
        for (std::size_t j = 0; j < p_; ++j) {
            eta += x[j] * q[1 + j];
        }
        const double n1 = data_.ones[c];
        const double n0 = data_.zeros[c];
        lp -= n1 * log1pexp(-eta) + n0 * log1pexp(eta);
        const double g = n1 * expit(-eta) - n0 * expit(eta);
        grad[0] += g;
        for (std::size_t j = 0; j < p_; ++j) {
            grad[1 + j] += g * x[j];
        }
        grad[raw + d] += g * tau;
        grad[ls] += g * tau * q[raw + d];
    }
    double dv = 0.0;
    lp += normal_term(q[0], 0.0, prior_.intercept_sd, dv);
    grad[0] += dv;
    for (std::size_t j = 0; j < p_; ++j) {
        lp += normal_term(q[1 + j], 0.0, prior_.coef_sd, dv);
        grad[1 + j] += dv;
    }
    for (std::size_t d = 0; d < d_; ++d) {
        lp += normal_term(q[raw + d], 0.0, 1.0, dv);
        grad[raw + d] += dv;
    }
    lp += hn_log_term(q[ls], prior_.hn_scale, dv);
    grad[ls] += dv;
    return lp;
}

}  // namespace heapsae
