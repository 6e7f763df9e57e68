#include "heapsae/likelihood.hpp"

#include "heapsae/numeric.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace heapsae {

namespace {

struct BoundaryLogs {
    std::array<double, kLastCell + 1> log_t{};  // log(j + 0.5) for j = 1..24, slot 0 unused
    std::array<double, kMaxReported + 2> log_k{};  // log(k) for k = 1..21

    BoundaryLogs() {
        for (int j = 1; j <= kLastCell; ++j) {
            log_t[j] = std::log(j + 0.5);
        }
        for (int k = 1; k <= kTopCode; ++k) {
            log_k[k] = std::log(static_cast<double>(k));
        }
    }
};

const BoundaryLogs& boundary_logs() {
    static const BoundaryLogs logs;
    return logs;
}

struct TargetTable {
    std::array<std::array<int, 3>, kLastCell> index{};

    TargetTable() {
        for (int q = 1; q <= kLastCell; ++q) {
            for (HeapingLevel g : kAllLevels) {
                index[q - 1][level_index(g)] = report_for_cell(q, g) - 1;
            }
        }
    }
};

const TargetTable& target_table() {
    static const TargetTable table;
    return table;
}

// Per-component evaluation at the 24 cell boundaries.
struct ComponentBoundaries {
    std::array<double, kLastCell + 1> lower{};  // Phi(a_j)
    std::array<double, kLastCell + 1> upper{};  // 1 - Phi(a_j)
    std::array<double, kLastCell + 1> a{};
    std::array<double, kLastCell + 1> phi{};

    void fill(double mu, double sigma, bool with_density) {
        const auto& logs = boundary_logs();
        for (int j = 1; j <= kLastCell; ++j) {
            const double aj = (logs.log_t[j] - mu) / sigma;
            const NormalTails t = std_normal_tails(aj);
            a[j] = aj;
            lower[j] = t.lower;
            upper[j] = t.upper;
            if (with_density) {
                phi[j] = std_normal_pdf(aj);
            }
        }
    }
};

struct MixtureBoundaries {
    ComponentBoundaries c1;
    ComponentBoundaries c2;
    std::array<double, kLastCell + 1> cdf{};
    std::array<double, kLastCell + 1> ccdf{};

    void fill(const MixtureAt& mix, bool with_density) {
        c1.fill(mix.mu1, mix.sigma1, with_density);
        if (mix.components == 2) {
            c2.fill(mix.mu2, mix.sigma2, with_density);
            const double w1 = mix.pi;
            const double w2 = 1.0 - mix.pi;
            for (int j = 1; j <= kLastCell; ++j) {
                cdf[j] = w1 * c1.lower[j] + w2 * c2.lower[j];
                ccdf[j] = w1 * c1.upper[j] + w2 * c2.upper[j];
            }
        } else {
            cdf = c1.lower;
            ccdf = c1.upper;
        }
    }

    std::array<double, kMassSlots> masses() const {
        std::array<double, kMassSlots> m{};
        double prev_cdf = 0.0;
        double prev_ccdf = 1.0;
        for (int q = 1; q <= kLastCell; ++q) {
            // Differences of whichever tail is small at the lower edge.
            m[q - 1] = prev_cdf < 0.5 ? cdf[q] - prev_cdf : prev_ccdf - ccdf[q];
            if (m[q - 1] < 0.0) {
                m[q - 1] = 0.0;
            }
            prev_cdf = cdf[q];
            prev_ccdf = ccdf[q];
        }
        m[kLastCell] = ccdf[kLastCell];
        return m;
    }
};

}  // namespace

ReportKernel::ReportKernel(const HeapingParams& gamma) : gamma_(gamma) {
    gamma_.validate();
    const auto& logs = boundary_logs();
    for (int q = 1; q <= kLastCell; ++q) {
        const double lqq = q <= kTopCode ? logs.log_k[q] : std::log(static_cast<double>(q));
        auto& lam = lambda_[q - 1];
        auto& dl = dlambda_[q - 1];
        if (gamma_.mode == HeapingMode::reduced) {
            const double eta = gamma_.gamma01 + gamma_.gamma1 * lqq;
            const double s = expit(eta);
            const double sc = expit(-eta);
            const double d = s * sc;
            lam = {s, sc, 0.0};
            dl[0] = {d, 0.0, d * lqq};
            dl[1] = {-d, 0.0, -d * lqq};
            dl[2] = {0.0, 0.0, 0.0};
        } else {
            const double eta1 = gamma_.gamma01 + gamma_.gamma1 * lqq;
            const double eta2 = gamma_.gamma02 + gamma_.gamma1 * lqq;
            const double s1 = expit(eta1);
            const double s1c = expit(-eta1);
            const double s2 = expit(eta2);
            const double s2c = expit(-eta2);
            const double d1 = s1 * s1c;
            const double d2 = s2 * s2c;
            lam = {s1, s1 > 0.5 ? s1c - s2c : s2 - s1, s2c};
            dl[0] = {d1, 0.0, d1 * lqq};
            dl[1] = {-d1, d2, (d2 - d1) * lqq};
            dl[2] = {0.0, -d2, -d2 * lqq};
        }
    }
}

ReportKernel::ReportKernel() {
    for (auto& lam : lambda_) {
        lam = {1.0, 0.0, 0.0};
    }
}

const ReportKernel& ReportKernel::rounding() {
    static const ReportKernel kernel;
    return kernel;
}

int ReportKernel::target(int q, HeapingLevel g) {
    if (q > kLastCell) {
        return kTopCode - 1;
    }
    return target_table().index[q - 1][level_index(g)];
}

ReportProbs ReportKernel::report_probs(std::span<const double, kMassSlots> masses) const {
    const auto& tt = target_table();
    ReportProbs p{};
    for (int q = 1; q <= kLastCell; ++q) {
        const double m = masses[q - 1];
        const auto& lam = lambda_[q - 1];
        const auto& idx = tt.index[q - 1];
        p[idx[0]] += lam[0] * m;
        p[idx[1]] += lam[1] * m;
        p[idx[2]] += lam[2] * m;
    }
    p[kTopCode - 1] += masses[kLastCell];
    return p;
}

std::array<double, kMassSlots> cell_masses(const MixtureAt& mix) {
    MixtureBoundaries b;
    b.fill(mix, false);
    return b.masses();
}

double interval_mass(int q, const MixtureAt& mix) {
    if (q < 1) {
        throw std::invalid_argument("interval_mass requires q >= 1");
    }
    const double hi = q + 0.5;
    if (q == 1) {
        return mix.cdf(hi);
    }
    const double lo = q - 0.5;
    const double flo = mix.cdf(lo);
    return flo < 0.5 ? mix.cdf(hi) - flo : mix.ccdf(lo) - mix.ccdf(hi);
}

double interval_mass(int q, std::span<const double> x, int domain, const IntensityParams& theta) {
    return interval_mass(q, mixture_at(x, domain, theta));
}

double loglik_report(int value, const MixtureAt& mix, const ObservationModel& obs, const ReportKernel* kernel) {
    if (value < 1 || value > kTopCode) {
        throw std::invalid_argument("reported value must lie in 1..21");
    }
    ReportCounts counts{};
    counts[value - 1] = 1.0;
    return pattern_loglik(mix, counts, obs, kernel, nullptr);
}

double loglik_unit(const ObservedAnswer& answer, std::span<const double> x, int domain,
                   const IntensityParams& theta, const HeapingParams& gamma) {
    if (answer.censored) {
        throw std::invalid_argument("loglik_unit expects a non-censored answer; use loglik_censored");
    }
    const ReportKernel kernel(gamma);
    const ObservationModel obs{true, gamma.mode, true};
    return loglik_report(answer.value, mixture_at(x, domain, theta), obs, &kernel);
}

double loglik_censored(std::span<const double> x, int domain, const IntensityParams& theta,
                       const HeapingParams& gamma) {
    const ReportKernel kernel(gamma);
    const ObservationModel obs{true, gamma.mode, true};
    return loglik_report(kTopCode, mixture_at(x, domain, theta), obs, &kernel);
}

namespace {

const ReportKernel& select_kernel(const ObservationModel& obs, const ReportKernel* kernel) {
    if (!obs.coarsened) {
        return ReportKernel::rounding();
    }
    if (kernel == nullptr) {
        throw std::invalid_argument("coarsened likelihood needs heaping parameters");
    }
    return *kernel;
}

// A face-value 21 is the single cell [20.5, 21.5); cells above it are dropped.
bool face_value_top(const ObservationModel& obs) {
    return !obs.coarsened && !obs.censor_topcode;
}

std::array<double, kMassSlots> observable_masses(const MixtureAt& mix, const ObservationModel& obs) {
    auto masses = cell_masses(mix);
    if (face_value_top(obs)) {
        std::fill(masses.begin() + kTopCode, masses.end(), 0.0);
    }
    return masses;
}

}  // namespace

ReportProbs report_logprobs(const MixtureAt& mix, const ObservationModel& obs, const ReportKernel* kernel) {
    const auto masses = observable_masses(mix, obs);
    const ReportProbs p = select_kernel(obs, kernel).report_probs(masses);
    ReportProbs out{};
    for (int k = 0; k < kTopCode; ++k) {
        out[k] = p[k] > 0.0 ? std::log(p[k]) : kNegInf;
    }
    return out;
}

double OutcomeTable::total() const {
    double acc = 0.0;
    for (double p : probabilities) {
        acc += p;
    }
    return acc;
}

OutcomeTable outcome_distribution(const MixtureAt& mix, const HeapingParams& gamma) {
    const ReportKernel kernel(gamma);
    const auto masses = cell_masses(mix);
    const ReportProbs p = kernel.report_probs(masses);
    OutcomeTable table;
    for (int k = 1; k <= kTopCode; ++k) {
        table.answers.push_back(ObservedAnswer::from_report(k, gamma.mode));
        table.probabilities.push_back(p[k - 1]);
    }
    return table;
}

OutcomeTable outcome_distribution(std::span<const double> x, int domain, const IntensityParams& theta,
                                  const HeapingParams& gamma) {
    return outcome_distribution(mixture_at(x, domain, theta), gamma);
}

double pattern_loglik(const MixtureAt& mix, const ReportCounts& counts, const ObservationModel& obs,
                      const ReportKernel* kernel_in, PatternGradient* grad) {
    const ReportKernel* kernel = &select_kernel(obs, kernel_in);
    const bool face_top = face_value_top(obs);
    MixtureBoundaries b;
    b.fill(mix, grad != nullptr);
    auto masses = b.masses();
    if (face_top) {
        std::fill(masses.begin() + kTopCode, masses.end(), 0.0);
    }
    const ReportProbs p = kernel->report_probs(masses);

    double ll = 0.0;
    ReportProbs ratio{};
    for (int k = 0; k < kTopCode; ++k) {
        if (counts[k] > 0.0) {
            if (!(p[k] > 0.0)) {
                return kNegInf;
            }
            ll += counts[k] * std::log(p[k]);
            ratio[k] = counts[k] / p[k];
        }
    }
    if (!grad) {
        return ll;
    }

    // Adjoint of each mass, then of each boundary CDF value.
    const auto& tt = target_table();
    std::array<double, kMassSlots + 1> adj{};
    for (int q = 1; q <= kLastCell; ++q) {
        const auto& idx = tt.index[q - 1];
        const double lam1 = kernel->lambda(q, HeapingLevel::one);
        const double lam5 = kernel->lambda(q, HeapingLevel::five);
        const double lam10 = kernel->lambda(q, HeapingLevel::ten);
        adj[q - 1] = lam1 * ratio[idx[0]] + lam5 * ratio[idx[1]] + lam10 * ratio[idx[2]];
        const double m = masses[q - 1];
        for (HeapingLevel g : kAllLevels) {
            const double r = ratio[idx[level_index(g)]];
            if (r != 0.0) {
                const auto& dl = kernel->dlambda(q, g);
                grad->gamma[0] += r * m * dl[0];
                grad->gamma[1] += r * m * dl[1];
                grad->gamma[2] += r * m * dl[2];
            }
        }
    }
    adj[kLastCell] = ratio[kTopCode - 1];
    if (face_top) {
        std::fill(adj.begin() + kTopCode, adj.end(), 0.0);
    }

    const bool mixture = mix.components == 2;
    const double w1 = mixture ? mix.pi : 1.0;
    const double w2 = 1.0 - w1;
    double g_mu1 = 0.0;
    double g_s1 = 0.0;
    double g_mu2 = 0.0;
    double g_s2 = 0.0;
    double g_pi = 0.0;
    for (int j = 1; j <= kLastCell; ++j) {
        // F(t_j) enters m_j with + and m_{j+1} with -.
        const double bj = adj[j - 1] - adj[j];
        if (bj == 0.0) {
            continue;
        }
        g_mu1 -= bj * b.c1.phi[j];
        g_s1 -= bj * b.c1.phi[j] * b.c1.a[j];
        if (mixture) {
            g_mu2 -= bj * b.c2.phi[j];
            g_s2 -= bj * b.c2.phi[j] * b.c2.a[j];
            g_pi += bj * (b.c1.lower[j] - b.c2.lower[j]);
        }
    }
    grad->mu1 += w1 * g_mu1 / mix.sigma1;
    grad->sigma1 += w1 * g_s1 / mix.sigma1;
    if (mixture) {
        grad->mu2 += w2 * g_mu2 / mix.sigma2;
        grad->sigma2 += w2 * g_s2 / mix.sigma2;
        grad->eta += g_pi * mix.pi * (1.0 - mix.pi);
    }
    return ll;
}

namespace {

template <typename Key>
int intern(std::map<Key, int>& index, const Key& key, std::vector<int>& domains, std::vector<std::vector<double>>& xs) {
    auto [it, inserted] = index.try_emplace(key, static_cast<int>(domains.size()));
    if (inserted) {
        domains.push_back(key.first);
        xs.push_back(key.second);
    }
    return it->second;
}

}  // namespace

IntensityData IntensityData::from_records(std::span<const UnitRecord> records, int domains) {
    IntensityData data;
    data.domains = domains;
    data.covariates = records.empty() ? 0 : records.front().x.size();
    std::map<std::pair<int, std::vector<double>>, int> index;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const UnitRecord& r = records[i];
        r.validate(domains, data.covariates);
        if (!r.answer) {
            throw std::invalid_argument("record " + std::to_string(i) + " carries no intensity answer");
        }
        const int id = intern(index, std::make_pair(r.domain, r.x), data.pattern_domain, data.pattern_x);
        if (static_cast<std::size_t>(id) == data.counts.size()) {
            data.counts.push_back(ReportCounts{});
        }
        data.counts[id][r.answer->value - 1] += 1.0;
        data.unit_pattern.push_back(id);
        data.unit_value.push_back(r.answer->value);
    }
    return data;
}

std::vector<ObservedAnswer> IntensityData::answers(HeapingMode mode) const {
    std::vector<ObservedAnswer> out;
    out.reserve(unit_value.size());
    for (int v : unit_value) {
        out.push_back(ObservedAnswer::from_report(v, mode));
    }
    return out;
}

ParticipationData ParticipationData::from_records(std::span<const UnitRecord> records, int domains) {
    ParticipationData data;
    data.domains = domains;
    data.covariates = records.empty() ? 0 : records.front().x.size();
    std::map<std::pair<int, std::vector<double>>, int> index;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const UnitRecord& r = records[i];
        r.validate(domains, data.covariates);
        if (!r.w) {
            throw std::invalid_argument("record " + std::to_string(i) + " carries no participation value");
        }
        const int id = intern(index, std::make_pair(r.domain, r.x), data.pattern_domain, data.pattern_x);
        if (static_cast<std::size_t>(id) == data.ones.size()) {
            data.ones.push_back(0.0);
            data.zeros.push_back(0.0);
        }
        (*r.w == 1 ? data.ones : data.zeros)[id] += 1.0;
        data.unit_pattern.push_back(id);
        data.unit_w.push_back(*r.w);
    }
    return data;
}

LogLik loglik_intensity(const IntensityData& data, const IntensityParams& theta,
                        const std::optional<HeapingParams>& gamma, const ObservationModel& obs) {
    theta.validate();
    std::optional<ReportKernel> kernel;
    if (obs.coarsened) {
        if (!gamma) {
            throw std::invalid_argument("coarsened likelihood needs heaping parameters");
        }
        kernel.emplace(*gamma);
    }
    const ReportKernel* kp = kernel ? &*kernel : nullptr;
    std::vector<MixtureAt> mixes;
    mixes.reserve(data.pattern_x.size());
    for (std::size_t c = 0; c < data.pattern_x.size(); ++c) {
        mixes.push_back(mixture_at(data.pattern_x[c], data.pattern_domain[c], theta));
    }
    std::vector<ReportProbs> table(mixes.size());
    for (std::size_t c = 0; c < mixes.size(); ++c) {
        table[c] = report_logprobs(mixes[c], obs, kp);
    }
    LogLik out;
    out.pointwise.resize(data.units());
    for (std::size_t i = 0; i < data.units(); ++i) {
        out.pointwise[i] = table[data.unit_pattern[i]][data.unit_value[i] - 1];
        out.total += out.pointwise[i];
    }
    return out;
}

LogLik loglik_intensity(std::span<const UnitRecord> records, int domains, const IntensityParams& theta,
                        const HeapingParams& gamma) {
    const IntensityData data = IntensityData::from_records(records, domains);
    return loglik_intensity(data, theta, gamma, ObservationModel{true, gamma.mode, true});
}

LogLik loglik_participation(const ParticipationData& data, const ParticipationParams& delta) {
    delta.validate();
    LogLik out;
    out.pointwise.resize(data.units());
    std::vector<double> eta(data.pattern_x.size());
    for (std::size_t c = 0; c < eta.size(); ++c) {
        eta[c] = linear_predictor(delta.beta0, delta.beta, data.pattern_x[c], delta.u, data.pattern_domain[c]);
    }
    for (std::size_t i = 0; i < data.units(); ++i) {
        const double e = eta[data.unit_pattern[i]];
        // log nu = -log(1 + exp(-eta)), log(1 - nu) = -log(1 + exp(eta))
        out.pointwise[i] = data.unit_w[i] == 1 ? -log1pexp(-e) : -log1pexp(e);
        out.total += out.pointwise[i];
    }
    return out;
}

LogLik loglik_participation(std::span<const UnitRecord> records, int domains, const ParticipationParams& delta) {
    return loglik_participation(ParticipationData::from_records(records, domains), delta);
}

double log_posterior_intensity(const IntensityData& data, const IntensityParams& theta,
                               const std::optional<HeapingParams>& gamma, const ObservationModel& obs,
                               const PriorConfig& config) {
    double lp = log_prior_intensity(theta, config);
    if (obs.coarsened) {
        if (!gamma) {
            throw std::invalid_argument("coarsened posterior needs heaping parameters");
        }
        lp += log_prior_heaping(*gamma, config);
    }
    if (lp == kNegInf) {
        return kNegInf;
    }
    return lp + loglik_intensity(data, theta, gamma, obs).total;
}

double log_posterior_participation(const ParticipationData& data, const ParticipationParams& delta,
                                   const PriorConfig& config) {
    const double lp = log_prior_participation(delta, config);
    if (lp == kNegInf) {
        return kNegInf;
    }
    return lp + loglik_participation(data, delta).total;
}

}  // namespace heapsae
