#include "heapsae/predictor.hpp"

#include "heapsae/tables.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

namespace heapsae {

namespace {

constexpr std::uint64_t kPredictTag = 0x70726564;  // "pred"
constexpr double kHeavy = 20.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Neumaier running sum.
struct Accumulator {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    const int threads = std::max(1, std::min(workers, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = next++; i < n; i = next++) {
                    fn(i);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

// Inverted-CDF quantile, so integer counts give integer bands.
double quantile_step(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(n * p)));
    return values[std::min(k, values.size()) - 1];
}

PpcBand band(double observed, const std::vector<double>& draws, bool integer) {
    PpcBand b;
    b.observed = observed;
    b.mean = mean(draws);
    if (integer) {
        b.lo = quantile_step(draws, 0.05);
        b.hi = quantile_step(draws, 0.95);
    } else {
        b.lo = quantile(draws, 0.05);
        b.hi = quantile(draws, 0.95);
    }
    return b;
}

double srs_se(std::span<const double> values, double sampling_fraction) {
    if (values.size() < 2) {
        return kNaN;
    }
    return std::sqrt((1.0 - sampling_fraction) * variance(values) / static_cast<double>(values.size()));
}

}  // namespace

PopulationFrame PopulationFrame::from_units(std::span<const UnitRecord> units, int domains) {
    std::vector<int> d;
    std::vector<std::vector<double>> x;
    d.reserve(units.size());
    x.reserve(units.size());
    for (const auto& u : units) {
        d.push_back(u.domain);
        x.push_back(u.x);
    }
    const std::vector<long long> ones(units.size(), 1);
    return from_patterns(domains, d, x, ones);
}

PopulationFrame PopulationFrame::from_patterns(int domains, std::span<const int> domain,
                                               std::span<const std::vector<double>> x,
                                               std::span<const long long> count) {
    if (domain.size() != x.size() || domain.size() != count.size()) {
        throw DataError("frame columns have different lengths");
    }
    if (domains < 1) {
        throw DataError("frame needs at least one domain");
    }
    PopulationFrame f;
    f.domains = domains;
    f.covariates = x.empty() ? 0 : x.front().size();
    std::map<std::pair<int, std::vector<double>>, std::size_t> index;
    for (std::size_t i = 0; i < domain.size(); ++i) {
        if (domain[i] < 0 || domain[i] >= domains) {
            throw DataError("frame row " + std::to_string(i + 1) + ": domain out of range");
        }
        if (x[i].size() != f.covariates) {
            throw DataError("frame row " + std::to_string(i + 1) + ": wrong number of covariates");
        }
        for (double v : x[i]) {
            if (!std::isfinite(v)) {
                throw DataError("frame row " + std::to_string(i + 1) + ": non-finite covariate");
            }
        }
        if (count[i] < 1) {
            throw DataError("frame row " + std::to_string(i + 1) + ": count must be positive");
        }
        auto [it, inserted] = index.try_emplace({domain[i], x[i]}, f.pattern_domain.size());
        if (inserted) {
            f.pattern_domain.push_back(domain[i]);
            f.pattern_x.push_back(x[i]);
            f.pattern_count.push_back(count[i]);
        } else {
            f.pattern_count[it->second] += count[i];
        }
    }
    return f;
}

std::vector<long long> PopulationFrame::domain_sizes() const {
    std::vector<long long> n(domains, 0);
    for (std::size_t c = 0; c < pattern_domain.size(); ++c) {
        n[pattern_domain[c]] += pattern_count[c];
    }
    return n;
}

PopulationFrame PopulationFrame::transformed(const Standardizer& s) const {
    PopulationFrame f = *this;
    for (auto& x : f.pattern_x) {
        x = s.apply(x);
    }
    return f;
}

std::size_t PopulationFrame::find(int domain, std::span<const double> x) const {
    for (std::size_t c = 0; c < pattern_domain.size(); ++c) {
        if (pattern_domain[c] == domain && std::equal(x.begin(), x.end(), pattern_x[c].begin(), pattern_x[c].end())) {
            return c;
        }
    }
    return npos;
}

Stream cell_stream(std::uint64_t seed, std::uint64_t stream, UnitSlot slot, int domain, std::size_t draw) {
    return Stream(seed, {kPredictTag, stream, static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(domain),
                         static_cast<std::uint64_t>(draw)});
}

Stream unit_stream(std::uint64_t seed, std::uint64_t stream, UnitSlot slot, int domain, std::size_t draw,
                   std::size_t unit) {
    Stream s = cell_stream(seed, stream, slot, domain, draw);
    s.seek(unit * kBlocksPerUnit);
    return s;
}

int predict_w(Stream& rng, double nu) {
    return rng.uniform() < nu ? 1 : 0;
}

double predict_z(Stream& rng, const MixtureAt& mix) {
    const bool first = rng.uniform() < mix.pi;
    const double e = rng.normal();
    return first || mix.components == 1 ? std::exp(mix.mu1 + mix.sigma1 * e) : std::exp(mix.mu2 + mix.sigma2 * e);
}

HeapingLevel predict_g(Stream& rng, double z, const HeapingParams& gamma) {
    const LevelProbs p = heaping_probs_discrete(z, gamma);
    const double u = rng.uniform();
    if (u < p.one) {
        return HeapingLevel::one;
    }
    return u < p.one + p.five || gamma.mode == HeapingMode::reduced ? HeapingLevel::five : HeapingLevel::ten;
}

ObservedAnswer predict_zstar(double z, HeapingLevel g, HeapingMode mode) {
    return coarsen(z, g, mode);
}

UnitDraw predict_unit(Stream& rng, std::optional<double> nu, const MixtureAt& mix,
                      const std::optional<HeapingParams>& gamma, HeapingMode mode) {
    UnitDraw d;
    const double u = rng.uniform();
    d.w = nu ? (u < *nu ? 1 : 0) : 1;
    d.z = predict_z(rng, mix);
    d.g = gamma ? predict_g(rng, d.z, *gamma) : HeapingLevel::one;
    d.zstar = predict_zstar(d.z, d.g, mode);
    return d;
}

std::vector<DomainDraws> hb_predict(const PredictionInput& in) {
    if (in.frame == nullptr) {
        throw std::invalid_argument("prediction needs a population frame");
    }
    if (in.intensity.empty()) {
        throw std::invalid_argument("prediction needs intensity draws");
    }
    if (!in.participation.empty() && in.participation.size() != in.intensity.size()) {
        throw std::invalid_argument("participation and intensity draws are not aligned");
    }
    const PopulationFrame& frame = *in.frame;
    const int domains = frame.domains;
    const std::size_t patterns = frame.pattern_domain.size();

    // Sampled units per domain as (pattern, w), and the remaining frame counts.
    std::vector<std::vector<std::pair<std::size_t, int>>> sampled(domains);
    std::vector<long long> remaining = frame.pattern_count;
    std::map<std::pair<int, std::vector<double>>, std::size_t> lookup;
    for (std::size_t c = 0; c < patterns; ++c) {
        lookup.emplace(std::make_pair(frame.pattern_domain[c], frame.pattern_x[c]), c);
    }
    for (std::size_t i = 0; i < in.sample.size(); ++i) {
        const UnitRecord& r = in.sample[i];
        if (r.domain < 0 || r.domain >= domains) {
            throw DataError("sample unit " + std::to_string(i + 1) + ": domain out of range");
        }
        if (!r.w) {
            throw DataError("sample unit " + std::to_string(i + 1) + ": participation value missing");
        }
        const auto it = lookup.find({r.domain, r.x});
        if (it == lookup.end()) {
            throw DataError("sample unit " + std::to_string(i + 1) + " (domain " + std::to_string(r.domain + 1) +
                            ") matches no frame pattern");
        }
        const std::size_t c = it->second;
        if (--remaining[c] < 0) {
            throw DataError("frame pattern " + std::to_string(c + 1) + " has fewer units than the sample");
        }
        sampled[r.domain].emplace_back(c, *r.w);
    }
    std::string empty;
    for (int d = 0; d < domains; ++d) {
        const bool any = std::any_of(sampled[d].begin(), sampled[d].end(), [](const auto& s) { return s.second == 1; });
        if (!any) {
            empty += (empty.empty() ? "" : ", ") + std::to_string(d + 1);
        }
    }
    if (!empty.empty()) {
        throw DataError("domains without a sampled participant: " + empty);
    }
    std::vector<std::vector<std::size_t>> domain_patterns(domains);
    for (std::size_t c = 0; c < patterns; ++c) {
        domain_patterns[frame.pattern_domain[c]].push_back(c);
    }
    const std::vector<long long> sizes = frame.domain_sizes();
    const std::size_t draws = in.intensity.size();
    const bool with_w = !in.participation.empty();

    std::vector<DomainDraws> out(domains);
    parallel_for(domains, in.workers, [&](int d) {
        DomainDraws& dd = out[d];
        dd.wbar.resize(draws);
        dd.zbar.resize(draws);
        dd.hsbar.resize(draws);
        const auto& pats = domain_patterns[d];
        std::vector<MixtureAt> mix(patterns);
        std::vector<double> nu(patterns, 1.0);
        for (std::size_t b = 0; b < draws; ++b) {
            for (std::size_t c : pats) {
                mix[c] = mixture_at(frame.pattern_x[c], d, in.intensity[b].theta);
                if (with_w) {
                    nu[c] = participation_prob(frame.pattern_x[c], d, in.participation[b]);
                }
            }
            Accumulator wsum;
            Accumulator zsum;
            Accumulator heavy;
            Stream s = cell_stream(in.seed, in.stream, UnitSlot::sampled, d, b);
            for (std::size_t j = 0; j < sampled[d].size(); ++j) {
                const auto [c, w] = sampled[d][j];
                if (w == 0) {
                    continue;
                }
                s.seek(j * kBlocksPerUnit);
                s();  // the participation slot; w is observed
                const double z = predict_z(s, mix[c]);
                wsum.add(1.0);
                zsum.add(z);
                heavy.add(z >= kHeavy ? 1.0 : 0.0);
            }
            Stream t = cell_stream(in.seed, in.stream, UnitSlot::unsampled, d, b);
            std::size_t unit = 0;
            for (std::size_t c : pats) {
                for (long long k = 0; k < remaining[c]; ++k, ++unit) {
                    t.seek(unit * kBlocksPerUnit);
                    const double u = t.uniform();
                    if (with_w && !(u < nu[c])) {
                        continue;
                    }
                    const double z = predict_z(t, mix[c]);
                    wsum.add(1.0);
                    zsum.add(z);
                    heavy.add(z >= kHeavy ? 1.0 : 0.0);
                }
            }
            const double ws = wsum.value();
            dd.wbar[b] = ws / static_cast<double>(sizes[d]);
            dd.zbar[b] = zsum.value() / ws;
            dd.hsbar[b] = heavy.value() / ws;
        }
    });
    return out;
}

std::string to_string(Indicator indicator) {
    switch (indicator) {
    case Indicator::wbar:
        return "wbar";
    case Indicator::zbar:
        return "zbar";
    case Indicator::hsbar:
        return "hsbar";
    }
    throw std::invalid_argument("unknown indicator");
}

std::vector<DomainEstimate> domain_estimates(const std::vector<DomainDraws>& draws, Indicator indicator) {
    std::vector<DomainEstimate> out;
    out.reserve(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) {
        const auto& v = indicator == Indicator::wbar ? draws[d].wbar
                        : indicator == Indicator::zbar ? draws[d].zbar
                                                       : draws[d].hsbar;
        out.push_back(DomainEstimate{static_cast<int>(d), indicator, summarize(v)});
    }
    return out;
}

std::vector<DomainEstimate> hb_wbar(const PredictionInput& input) {
    return domain_estimates(hb_predict(input), Indicator::wbar);
}

std::vector<DomainEstimate> hb_zbar(const PredictionInput& input) {
    return domain_estimates(hb_predict(input), Indicator::zbar);
}

std::vector<DomainEstimate> hb_hsbar(const PredictionInput& input) {
    return domain_estimates(hb_predict(input), Indicator::hsbar);
}

PpcResult ppc_stats(std::span<const UnitRecord> sample, const ModelSpec& spec,
                    std::span<const IntensityState> intensity, std::span<const ParticipationParams> participation,
                    std::uint64_t seed, std::uint64_t stream) {
    if (intensity.empty()) {
        throw std::invalid_argument("predictive checks need intensity draws");
    }
    if (!participation.empty() && participation.size() != intensity.size()) {
        throw std::invalid_argument("participation and intensity draws are not aligned");
    }
    const std::size_t draws = intensity.size();
    std::vector<double> obs_counts(kTopCode, 0.0);
    double reporters = 0.0;
    double participants = 0.0;
    for (const auto& r : sample) {
        if (r.answer) {
            obs_counts[r.answer->value - 1] += 1.0;
            reporters += 1.0;
        }
        if (participation.size() > 0 && !r.w) {
            throw DataError("predictive check needs participation values for every sample unit");
        }
        participants += r.w.value_or(0);
    }
    if (reporters == 0.0) {
        throw DataError("predictive check needs at least one reported value");
    }

    std::vector<double> rep_share(draws);
    std::vector<std::vector<double>> rep_cdf(kMaxReported, std::vector<double>(draws));
    std::vector<std::vector<double>> rep_counts(kTopCode, std::vector<double>(draws));
    for (std::size_t b = 0; b < draws; ++b) {
        const IntensityState& st = intensity[b];
        double share = 0.0;
        std::vector<double> below(kMaxReported, 0.0);
        std::vector<double> counts(kTopCode, 0.0);
        for (std::size_t i = 0; i < sample.size(); ++i) {
            const UnitRecord& r = sample[i];
            Stream s = unit_stream(seed, stream, UnitSlot::replicate, r.domain, b, i);
            std::optional<double> nu;
            if (!participation.empty()) {
                nu = participation_prob(r.x, r.domain, participation[b]);
            }
            const UnitDraw u = predict_unit(s, nu, mixture_at(r.x, r.domain, st.theta), st.gamma, spec.mode);
            share += u.w;
            if (!r.answer) {
                continue;
            }
            for (int t = 1; t <= kMaxReported; ++t) {
                below[t - 1] += u.z < t + 0.5 ? 1.0 : 0.0;
            }
            counts[u.zstar.value - 1] += 1.0;
        }
        rep_share[b] = share / static_cast<double>(sample.size());
        for (int t = 0; t < kMaxReported; ++t) {
            rep_cdf[t][b] = below[t] / reporters;
        }
        for (int k = 0; k < kTopCode; ++k) {
            rep_counts[k][b] = counts[k];
        }
    }

    PpcResult out;
    if (!participation.empty()) {
        out.participation = band(participants / static_cast<double>(sample.size()), rep_share, false);
    }
    double cum = 0.0;
    for (int t = 1; t <= kMaxReported; ++t) {
        cum += obs_counts[t - 1];
        out.cdf.push_back(band(cum / reporters, rep_cdf[t - 1], false));
    }
    for (int k = 0; k < kTopCode; ++k) {
        out.counts.push_back(band(obs_counts[k], rep_counts[k], true));
    }
    return out;
}

DirectEstimate direct_estimate(int domain, long long population, std::span<const int> w, std::span<const double> z) {
    if (w.empty()) {
        throw DataError("domain " + std::to_string(domain + 1) + " has no sampled unit");
    }
    if (population < static_cast<long long>(w.size())) {
        throw DataError("domain " + std::to_string(domain + 1) + " has more sampled units than population units");
    }
    DirectEstimate e;
    e.domain = domain;
    e.population = population;
    e.n = static_cast<int>(w.size());
    const double f = static_cast<double>(w.size()) / static_cast<double>(population);
    std::vector<double> wv(w.begin(), w.end());
    e.participants = static_cast<int>(std::count(w.begin(), w.end(), 1));
    e.wbar = mean(wv);
    e.wbar_se = srs_se(wv, f);
    if (z.empty()) {
        e.zbar = e.zbar_se = e.hsbar = e.hsbar_se = kNaN;
        return e;
    }
    std::vector<double> heavy(z.size());
    std::transform(z.begin(), z.end(), heavy.begin(), [](double v) { return v >= kHeavy ? 1.0 : 0.0; });
    e.zbar = mean(z);
    e.zbar_se = srs_se(z, f);
    e.hsbar = mean(heavy);
    e.hsbar_se = srs_se(heavy, f);
    return e;
}

std::vector<DirectEstimate> direct_estimates(std::span<const UnitRecord> sample,
                                             std::span<const long long> domain_sizes) {
    const int domains = static_cast<int>(domain_sizes.size());
    std::vector<std::vector<int>> w(domains);
    std::vector<std::vector<double>> z(domains);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const UnitRecord& r = sample[i];
        if (r.domain < 0 || r.domain >= domains) {
            throw DataError("sample unit " + std::to_string(i + 1) + ": domain out of range");
        }
        if (!r.w) {
            throw DataError("sample unit " + std::to_string(i + 1) + ": participation value missing");
        }
        w[r.domain].push_back(*r.w);
        if (*r.w == 1) {
            if (!r.answer) {
                throw DataError("sample unit " + std::to_string(i + 1) + ": participant without a report");
            }
            z[r.domain].push_back(static_cast<double>(r.answer->value));
        }
    }
    std::vector<DirectEstimate> out;
    out.reserve(domains);
    for (int d = 0; d < domains; ++d) {
        out.push_back(direct_estimate(d, domain_sizes[d], w[d], z[d]));
    }
    return out;
}

}  // namespace heapsae
