#include "heapsae/simstudy.hpp"

#include "heapsae/fit.hpp"
#include "heapsae/tables.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace heapsae {

namespace {

constexpr std::uint64_t kPopulationTag = 0x706f7075;  // "popu"
constexpr std::uint64_t kSampleTag = 0x73616d70;      // "samp"
constexpr std::uint64_t kHeapTag = 0x68656170;        // "heap"
constexpr std::uint64_t kStudyTag = 0x73696d75;       // "simu"
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ90 = 1.6448536269514722;

double expit(double v) {
    return 1.0 / (1.0 + std::exp(-v));
}

Indicator indicator_from_string(const std::string& s, const std::string& source, std::size_t line) {
    if (s == "zbar") {
        return Indicator::zbar;
    }
    if (s == "hsbar") {
        return Indicator::hsbar;
    }
    if (s == "wbar") {
        return Indicator::wbar;
    }
    throw DataError(source + ":" + std::to_string(line) + ": unknown indicator '" + s + "'");
}

int truth_row(Indicator i) {
    return i == Indicator::zbar ? 0 : 1;
}

void add_direct(std::vector<EstimateRecord>& out, const std::string& name, int scenario, int replication,
                const DirectEstimate& e) {
    out.push_back({scenario, replication, name, Indicator::zbar, e.domain, e.zbar, e.zbar - kZ90 * e.zbar_se,
                   e.zbar + kZ90 * e.zbar_se, false});
    out.push_back({scenario, replication, name, Indicator::hsbar, e.domain, e.hsbar, e.hsbar - kZ90 * e.hsbar_se,
                   e.hsbar + kZ90 * e.hsbar_se, false});
}

template <typename Fn>
void run_jobs(std::size_t n, int workers, Fn&& fn) {
    const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next++; i < n; i = next++) {
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

Table estimates_table(std::span<const EstimateRecord> rows) {
    Table t;
    t.columns = {"scenario", "replication", "estimator", "indicator", "domain", "estimate", "lo", "hi", "excluded"};
    for (const auto& r : rows) {
        t.rows.push_back({std::to_string(r.scenario), std::to_string(r.replication + 1), r.estimator,
                          to_string(r.indicator), std::to_string(r.domain + 1), format_double(r.estimate),
                          format_double(r.lo), format_double(r.hi), r.excluded ? "1" : "0"});
    }
    return t;
}

std::vector<EstimateRecord> parse_estimates(const Table& t, const std::string& source) {
    const std::size_t cs = t.require("scenario", source);
    const std::size_t cr = t.require("replication", source);
    const std::size_t ce = t.require("estimator", source);
    const std::size_t ci = t.require("indicator", source);
    const std::size_t cd = t.require("domain", source);
    const std::size_t cv = t.require("estimate", source);
    const std::size_t cl = t.require("lo", source);
    const std::size_t ch = t.require("hi", source);
    const std::size_t cx = t.require("excluded", source);
    std::vector<EstimateRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = i + 2;
        EstimateRecord r;
        r.scenario = parse_int(row[cs], source, line, "scenario");
        r.replication = parse_int(row[cr], source, line, "replication") - 1;
        r.estimator = row[ce];
        r.indicator = indicator_from_string(row[ci], source, line);
        r.domain = parse_int(row[cd], source, line, "domain") - 1;
        r.estimate = parse_double(row[cv], source, line, "estimate");
        r.lo = parse_double(row[cl], source, line, "lo");
        r.hi = parse_double(row[ch], source, line, "hi");
        r.excluded = parse_int(row[cx], source, line, "excluded") != 0;
        out.push_back(r);
    }
    return out;
}

Table fits_table(std::span<const ReplicationResult> reps) {
    Table t;
    t.columns = {"scenario", "replication", "estimator", "max_rhat", "divergences", "converged", "seconds",
                 "gamma1_mean", "gamma1_sd", "gamma1_q05", "gamma1_q95"};
    for (const auto& rep : reps) {
        for (const auto& f : rep.fits) {
            const Summary g = f.gamma1.value_or(Summary{kNaN, kNaN, kNaN, kNaN});
            t.rows.push_back({std::to_string(rep.scenario), std::to_string(rep.replication + 1), to_string(f.kind),
                              format_double(f.max_rhat), std::to_string(f.divergences), f.converged ? "1" : "0",
                              format_double(f.seconds), format_double(g.mean), format_double(g.sd),
                              format_double(g.q05), format_double(g.q95)});
        }
    }
    return t;
}

std::vector<EstimatorFit> parse_fits(const Table& t, const std::string& source) {
    std::vector<EstimatorFit> out;
    const std::size_t ce = t.require("estimator", source);
    const std::size_t cr = t.require("max_rhat", source);
    const std::size_t cd = t.require("divergences", source);
    const std::size_t cc = t.require("converged", source);
    const std::size_t cs = t.require("seconds", source);
    const std::size_t g0 = t.require("gamma1_mean", source);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = i + 2;
        EstimatorFit f;
        f.kind = model_kind_from_string(row[ce]);
        f.max_rhat = parse_double(row[cr], source, line, "max_rhat");
        f.divergences = parse_int(row[cd], source, line, "divergences");
        f.converged = parse_int(row[cc], source, line, "converged") != 0;
        f.seconds = parse_double(row[cs], source, line, "seconds");
        Summary g{parse_double(row[g0], source, line, "gamma1_mean"),
                  parse_double(row[g0 + 1], source, line, "gamma1_sd"),
                  parse_double(row[g0 + 2], source, line, "gamma1_q05"),
                  parse_double(row[g0 + 3], source, line, "gamma1_q95")};
        if (!std::isnan(g.mean)) {
            f.gamma1 = g;
        }
        out.push_back(f);
    }
    return out;
}

std::string checkpoint_stem(const std::string& dir, int scenario, int replication) {
    return (std::filesystem::path(dir) / "checkpoints" /
            ("s" + std::to_string(scenario) + "-r" + std::to_string(replication + 1)))
        .string();
}

std::optional<ReplicationResult> load_checkpoint(const std::string& dir, int scenario, int replication) {
    const std::string stem = checkpoint_stem(dir, scenario, replication);
    // The fit file is written last and marks a complete replication.
    if (!std::filesystem::exists(stem + ".fits.csv") || !std::filesystem::exists(stem + ".estimates.csv")) {
        return std::nullopt;
    }
    ReplicationResult r;
    r.scenario = scenario;
    r.replication = replication;
    r.estimates = parse_estimates(read_table(stem + ".estimates.csv"), stem + ".estimates.csv");
    r.fits = parse_fits(read_table(stem + ".fits.csv"), stem + ".fits.csv");
    return r;
}

void save_checkpoint(const std::string& dir, const ReplicationResult& r) {
    const std::string stem = checkpoint_stem(dir, r.scenario, r.replication);
    write_table(stem + ".estimates.csv", estimates_table(r.estimates));
    write_table(stem + ".fits.csv", fits_table(std::span<const ReplicationResult>(&r, 1)));
}

// Everything that changes a replication's output. Scenario and replication
// count are not included since checkpoint files are keyed by them.
std::string settings_key(const StudyConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "population_seed " << c.population_seed << "\nsizes";
    for (int n : c.population.sizes) {
        o << ' ' << n;
    }
    const PopulationSpec& p = c.population;
    o << "\npopulation " << p.covariate_prob << ' ' << p.mix_intercept << ' ' << p.mix_slope << ' ' << p.b01 << ' '
      << p.b02 << ' ' << p.slope << ' ' << p.domain_sd << ' ' << p.sd1 << ' ' << p.sd2;
    const ReplicationSettings& s = c.settings;
    o << "\nestimators";
    for (ModelKind k : s.estimators) {
        o << ' ' << to_string(k);
    }
    o << "\nmcmc " << s.mcmc.chains << ' ' << s.mcmc.iterations << ' ' << s.mcmc.warmup << ' ' << s.mcmc.seed << ' '
      << s.mcmc.target_acceptance << ' ' << s.mcmc.max_depth << ' ' << s.mcmc.stream;
    o << "\nrhat_threshold " << s.rhat_threshold << "\nfraction " << s.fraction << "\nseed " << s.seed << '\n';
    return o.str();
}

// Refuses checkpoints written under other settings; records the key otherwise.
void guard_checkpoints(const StudyConfig& c) {
    const std::filesystem::path dir = std::filesystem::path(c.output_dir) / "checkpoints";
    std::filesystem::create_directories(dir);
    const std::filesystem::path file = dir / "settings.txt";
    const std::string key = settings_key(c);
    if (std::filesystem::exists(file)) {
        std::ifstream in(file);
        std::stringstream buf;
        buf << in.rdbuf();
        if (buf.str() != key) {
            throw DataError("checkpoints in " + dir.string() +
                            " were written with different study settings; remove them or choose another output directory");
        }
        return;
    }
    std::ofstream out(file);
    out << key;
    if (!out) {
        throw DataError("cannot write " + file.string());
    }
}

std::string fixed(double v, int digits) {
    if (std::isnan(v)) {
        return "NA";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

PopulationSpec PopulationSpec::standard() {
    PopulationSpec s;
    for (int size : {700, 1000, 1300}) {
        s.sizes.insert(s.sizes.end(), 10, size);
    }
    return s;
}

long long PopulationSpec::total() const {
    return std::accumulate(sizes.begin(), sizes.end(), 0LL);
}

void PopulationSpec::validate() const {
    if (sizes.empty()) {
        throw std::invalid_argument("population needs at least one domain");
    }
    for (int n : sizes) {
        if (n < 1) {
            throw std::invalid_argument("domain sizes must be positive");
        }
    }
    if (!(covariate_prob >= 0.0 && covariate_prob <= 1.0)) {
        throw std::invalid_argument("covariate probability must lie in [0, 1]");
    }
    if (!(domain_sd >= 0.0) || !(sd1 > 0.0) || !(sd2 > 0.0)) {
        throw std::invalid_argument("population scales must be positive");
    }
}

int Population::domain_of(std::size_t unit) const {
    const auto it = std::upper_bound(start.begin(), start.end(), unit);
    return static_cast<int>(it - start.begin()) - 1;
}

Population generate_population(const PopulationSpec& spec, std::uint64_t seed) {
    spec.validate();
    Population pop;
    pop.spec = spec;
    const int domains = spec.domains();
    Stream effects(seed, {kPopulationTag, 0});
    pop.u.resize(domains);
    for (double& v : pop.u) {
        v = spec.domain_sd * effects.normal();
    }
    pop.start.push_back(0);
    for (int d = 0; d < domains; ++d) {
        Stream s(seed, {kPopulationTag, 1, static_cast<std::uint64_t>(d)});
        double zsum = 0.0;
        double heavy = 0.0;
        for (int i = 0; i < spec.sizes[d]; ++i) {
            const double x = s.uniform() < spec.covariate_prob ? 1.0 : 0.0;
            const bool first = s.uniform() < expit(spec.mix_intercept + spec.mix_slope * x);
            const double e = s.normal();
            const double loc = (first ? spec.b01 : spec.b02) + spec.slope * x + pop.u[d];
            const double z = std::exp(loc + (first ? spec.sd1 : spec.sd2) * e);
            pop.x.push_back(x);
            pop.z.push_back(z);
            pop.component.push_back(first ? 1 : 2);
            zsum += z;
            heavy += z >= 20.0 ? 1.0 : 0.0;
        }
        pop.start.push_back(pop.z.size());
        pop.true_zbar.push_back(zsum / spec.sizes[d]);
        pop.true_hsbar.push_back(heavy / spec.sizes[d]);
    }
    return pop;
}

int sample_size(long long population, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("sampling fraction must lie in (0, 1]");
    }
    const auto n = static_cast<long long>(std::floor(fraction * static_cast<double>(population) + 0.5));
    return static_cast<int>(std::clamp<long long>(n, 1, population));
}

std::vector<std::vector<std::size_t>> draw_sample(const Population& pop, double fraction, std::uint64_t seed,
                                                  std::uint64_t replication) {
    const int domains = pop.spec.domains();
    std::vector<std::vector<std::size_t>> out(domains);
    for (int d = 0; d < domains; ++d) {
        const std::size_t lo = pop.start[d];
        const std::size_t size = pop.start[d + 1] - lo;
        const auto n = static_cast<std::size_t>(sample_size(static_cast<long long>(size), fraction));
        std::vector<std::size_t> idx(size);
        std::iota(idx.begin(), idx.end(), lo);
        Stream s(seed, {kSampleTag, replication, static_cast<std::uint64_t>(d)});
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = i + static_cast<std::size_t>(s.uniform() * static_cast<double>(size - i));
            std::swap(idx[i], idx[std::min(j, size - 1)]);
        }
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        out[d] = std::move(idx);
    }
    return out;
}

ScenarioConfig ScenarioConfig::standard(int id) {
    switch (id) {
    case 1:
        return {1, HeapingParams::reduced(2.0, 0.0)};
    case 2:
        return {2, HeapingParams::reduced(5.5, -3.2)};
    case 3:
        return {3, HeapingParams::full(0.5, 2.5, 0.0)};
    case 4:
        return {4, HeapingParams::full(7.0, 9.7, -3.4)};
    default:
        throw std::invalid_argument("scenario must be 1, 2, 3 or 4");
    }
}

std::vector<ObservedAnswer> apply_heaping(std::span<const double> z, const ScenarioConfig& scenario,
                                          std::uint64_t seed, std::uint64_t replication) {
    Stream s(seed, {kHeapTag, static_cast<std::uint64_t>(scenario.id), replication});
    std::vector<ObservedAnswer> out;
    out.reserve(z.size());
    for (double v : z) {
        if (!(v > 0.0)) {
            throw std::invalid_argument("latent values must be positive");
        }
        const LevelProbs p = heaping_probs(v, scenario.gamma);
        const double u = s.uniform();
        HeapingLevel g = HeapingLevel::one;
        if (u >= p.one) {
            g = u < p.one + p.five || scenario.mode() == HeapingMode::reduced ? HeapingLevel::five
                                                                               : HeapingLevel::ten;
        }
        out.push_back(coarsen(v, g, scenario.mode()));
    }
    return out;
}

ReplicationData replication_data(const Population& pop, std::span<const std::vector<std::size_t>> sample,
                                 const ScenarioConfig& scenario, int replication, std::uint64_t seed) {
    const int domains = pop.spec.domains();
    if (static_cast<int>(sample.size()) != domains) {
        throw std::invalid_argument("sample must list units for every domain");
    }
    std::vector<double> z;
    std::vector<int> unit_domain;
    std::vector<std::vector<double>> rows;
    for (int d = 0; d < domains; ++d) {
        for (std::size_t i : sample[d]) {
            z.push_back(pop.z[i]);
            unit_domain.push_back(d);
            rows.push_back({pop.x[i]});
        }
    }
    auto answers = apply_heaping(z, scenario, seed, static_cast<std::uint64_t>(replication));
    const Standardizer standardizer = Standardizer::fit(rows);
    std::vector<UnitRecord> records(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        records[i].domain = unit_domain[i];
        records[i].x = standardizer.apply(rows[i]);
        records[i].w = 1;
        records[i].answer = answers[i];
    }
    // Two covariate patterns per domain.
    std::vector<int> fd;
    std::vector<std::vector<double>> fx;
    std::vector<long long> fc;
    for (int d = 0; d < domains; ++d) {
        std::array<long long, 2> count{};
        for (std::size_t i = pop.start[d]; i < pop.start[d + 1]; ++i) {
            ++count[pop.x[i] > 0.5 ? 1 : 0];
        }
        for (int v = 0; v < 2; ++v) {
            if (count[v] > 0) {
                fd.push_back(d);
                fx.push_back(standardizer.apply(std::vector<double>{static_cast<double>(v)}));
                fc.push_back(count[v]);
            }
        }
    }
    ReplicationData out{std::move(records), std::move(z), std::move(answers),
                        PopulationFrame::from_patterns(domains, fd, fx, fc)};
    return out;
}

ReplicationResult run_replication(const Population& pop, std::span<const std::vector<std::size_t>> sample,
                                  const ScenarioConfig& scenario, int replication,
                                  const ReplicationSettings& settings) {
    const int domains = pop.spec.domains();
    const ReplicationData rd = replication_data(pop, sample, scenario, replication, settings.seed);
    const std::vector<UnitRecord>& records = rd.records;
    const std::vector<double>& z = rd.z;
    const std::vector<ObservedAnswer>& answers = rd.answers;
    const PopulationFrame& frame = rd.frame;
    const IntensityData data = IntensityData::from_records(records, domains);

    ReplicationResult result;
    result.scenario = scenario.id;
    result.replication = replication;
    for (ModelKind kind : settings.estimators) {
        const ModelSpec spec{kind, scenario.mode(), true};
        ChainConfig mcmc = settings.mcmc;
        mcmc.seed = settings.seed;
        mcmc.stream = stream_id({kStudyTag, static_cast<std::uint64_t>(scenario.id),
                                 static_cast<std::uint64_t>(replication), static_cast<std::uint64_t>(kind)});
        EstimatorFit fit;
        fit.kind = kind;
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<DomainDraws> draws;
        try {
            const IntensityFit f =
                fit_intensity(data, spec, PriorConfig::from_answers(data.answers(spec.mode)), mcmc);
            fit.max_rhat = max_rhat(f.draws);
            for (const auto& info : f.draws.info) {
                fit.divergences += info.divergences;
            }
            fit.converged = std::isfinite(fit.max_rhat) && fit.max_rhat < settings.rhat_threshold;
            if (spec.coarsened()) {
                fit.gamma1 = summarize(f.draws.column("gamma1"));
            }
            PredictionInput in;
            in.frame = &frame;
            in.sample = records;
            in.intensity = f.states;
            in.seed = settings.seed;
            in.stream = mcmc.stream;
            draws = hb_predict(in);
        } catch (const NumericalError&) {
            fit.max_rhat = kNaN;
            fit.converged = false;
        }
        fit.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (Indicator ind : {Indicator::zbar, Indicator::hsbar}) {
            for (int d = 0; d < domains; ++d) {
                EstimateRecord r{scenario.id, replication, to_string(kind), ind, d, kNaN, kNaN, kNaN, !fit.converged};
                if (!draws.empty()) {
                    const Summary s = summarize(ind == Indicator::zbar ? draws[d].zbar : draws[d].hsbar);
                    r.estimate = s.mean;
                    r.lo = s.q05;
                    r.hi = s.q95;
                }
                result.estimates.push_back(r);
            }
        }
        result.fits.push_back(fit);
    }

    // Direct estimators on the latent values and on the reports.
    std::size_t k = 0;
    for (int d = 0; d < domains; ++d) {
        const std::vector<int> w(sample[d].size(), 1);
        std::vector<double> latent;
        std::vector<double> reported;
        for (std::size_t j = 0; j < sample[d].size(); ++j, ++k) {
            latent.push_back(z[k]);
            reported.push_back(static_cast<double>(answers[k].value));
        }
        const long long size = static_cast<long long>(pop.start[d + 1] - pop.start[d]);
        add_direct(result.estimates, "direct-true", scenario.id, replication, direct_estimate(d, size, w, latent));
        add_direct(result.estimates, "direct-coarse", scenario.id, replication,
                   direct_estimate(d, size, w, reported));
    }
    return result;
}

std::vector<MetricCell> compute_metrics(std::span<const EstimateRecord> estimates,
                                        const std::vector<std::vector<double>>& truths) {
    using Key = std::tuple<int, std::string, int, int>;
    struct Acc {
        double rel = 0.0;
        double rel2 = 0.0;
        double cover = 0.0;
        double width = 0.0;
        int n = 0;
    };
    std::map<Key, Acc> acc;
    for (const auto& r : estimates) {
        const Key key{r.scenario, r.estimator, static_cast<int>(r.indicator), r.domain};
        Acc& a = acc[key];
        if (r.excluded || std::isnan(r.estimate)) {
            continue;
        }
        const double truth = truths.at(truth_row(r.indicator)).at(r.domain);
        const double e = (r.estimate - truth) / truth;
        a.rel += e;
        a.rel2 += e * e;
        a.cover += (truth >= r.lo && truth <= r.hi) ? 1.0 : 0.0;
        a.width += r.hi - r.lo;
        ++a.n;
    }
    std::vector<MetricCell> out;
    for (const auto& [key, a] : acc) {
        MetricCell c;
        c.scenario = std::get<0>(key);
        c.estimator = std::get<1>(key);
        c.indicator = static_cast<Indicator>(std::get<2>(key));
        c.domain = std::get<3>(key);
        c.replications = a.n;
        if (a.n == 0) {
            c.rb = c.rrmse = c.cov = c.width = kNaN;
        } else {
            c.rb = a.rel / a.n;
            c.rrmse = std::sqrt(a.rel2 / a.n);
            c.cov = a.cover / a.n;
            c.width = a.width / a.n;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<MetricSummary> average_metrics(std::span<const MetricCell> cells,
                                           std::span<const EstimateRecord> estimates) {
    using Key = std::tuple<int, std::string, int>;
    struct Acc {
        double rb = 0.0;
        double rrmse = 0.0;
        double cov = 0.0;
        double width = 0.0;
        int n = 0;
        std::map<int, bool> reps;  // replication -> excluded
    };
    std::map<Key, Acc> acc;
    for (const auto& c : cells) {
        Acc& a = acc[{c.scenario, c.estimator, static_cast<int>(c.indicator)}];
        if (c.replications == 0 || !std::isfinite(c.rb)) {
            continue;
        }
        a.rb += c.rb;
        a.rrmse += c.rrmse;
        a.cov += c.cov;
        a.width += c.width;
        ++a.n;
    }
    for (const auto& r : estimates) {
        auto it = acc.find({r.scenario, r.estimator, static_cast<int>(r.indicator)});
        if (it != acc.end()) {
            it->second.reps[r.replication] = r.excluded;
        }
    }
    std::vector<MetricSummary> out;
    for (const auto& [key, a] : acc) {
        MetricSummary s;
        s.scenario = std::get<0>(key);
        s.estimator = std::get<1>(key);
        s.indicator = static_cast<Indicator>(std::get<2>(key));
        if (a.n == 0) {
            s.arb = s.arrmse = s.acov = s.aw = kNaN;
        } else {
            s.arb = a.rb / a.n;
            s.arrmse = a.rrmse / a.n;
            s.acov = a.cov / a.n;
            s.aw = a.width / a.n;
        }
        for (const auto& [rep, excluded] : a.reps) {
            (excluded ? s.excluded : s.used) += 1;
        }
        out.push_back(s);
    }
    return out;
}

StudyConfig StudyConfig::desk() {
    StudyConfig c;
    c.settings.mcmc.chains = 4;
    c.settings.mcmc.iterations = 1000;
    c.settings.mcmc.warmup = 500;
    return c;
}

void StudyConfig::validate() const {
    population.validate();
    if (replications < 1) {
        throw std::invalid_argument("replications must be at least 1");
    }
    if (scenarios.empty()) {
        throw std::invalid_argument("at least one scenario is required");
    }
    for (int s : scenarios) {
        ScenarioConfig::standard(s);
    }
    if (settings.estimators.empty()) {
        throw std::invalid_argument("at least one estimator is required");
    }
    if (workers < 1) {
        throw std::invalid_argument("workers must be at least 1");
    }
    settings.mcmc.validate();
    sample_size(population.sizes.front(), settings.fraction);
}

StudyResult run_study(const StudyConfig& config, const StudyProgress& progress) {
    config.validate();
    const Population pop = generate_population(config.population, config.population_seed);
    std::vector<std::vector<std::vector<std::size_t>>> samples;
    for (int r = 0; r < config.replications; ++r) {
        samples.push_back(draw_sample(pop, config.settings.fraction, config.settings.seed, r));
    }
    struct Job {
        int scenario;
        int replication;
    };
    std::vector<Job> jobs;
    for (int s : config.scenarios) {
        for (int r = 0; r < config.replications; ++r) {
            jobs.push_back({s, r});
        }
    }
    ReplicationSettings settings = config.settings;
    if (config.workers > 1) {
        settings.mcmc.workers = 1;
    }
    if (!config.output_dir.empty()) {
        guard_checkpoints(config);
    }
    std::vector<ReplicationResult> results(jobs.size());
    std::mutex report;
    run_jobs(jobs.size(), config.workers, [&](std::size_t j) {
        const Job job = jobs[j];
        std::optional<ReplicationResult> r;
        if (!config.output_dir.empty()) {
            r = load_checkpoint(config.output_dir, job.scenario, job.replication);
        }
        if (!r) {
            r = run_replication(pop, samples[job.replication], ScenarioConfig::standard(job.scenario),
                                job.replication, settings);
            if (!config.output_dir.empty()) {
                save_checkpoint(config.output_dir, *r);
            }
        }
        results[j] = std::move(*r);
        if (progress) {
            const std::lock_guard<std::mutex> lock(report);
            progress(results[j]);
        }
    });

    StudyResult out;
    out.truths = {pop.true_zbar, pop.true_hsbar};
    for (auto& r : results) {
        out.estimates.insert(out.estimates.end(), r.estimates.begin(), r.estimates.end());
    }
    out.replications = std::move(results);
    out.cells = compute_metrics(out.estimates, out.truths);
    out.summary = average_metrics(out.cells, out.estimates);
    if (!config.output_dir.empty()) {
        write_study_tables(config.output_dir, out);
    }
    return out;
}

const MetricSummary* find_summary(std::span<const MetricSummary> rows, int scenario, const std::string& estimator,
                                  Indicator indicator) {
    for (const auto& r : rows) {
        if (r.scenario == scenario && r.estimator == estimator && r.indicator == indicator) {
            return &r;
        }
    }
    return nullptr;
}

std::string format_summary_table(std::span<const MetricSummary> rows) {
    std::vector<std::pair<int, std::string>> keys;
    for (const auto& r : rows) {
        const std::pair<int, std::string> k{r.scenario, r.estimator};
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            keys.push_back(k);
        }
    }
    auto rank = [](const std::string& e) {
        static const std::vector<std::string> order{"LN", "LN-C", "LNM", "LNM-C", "direct-true", "direct-coarse"};
        const auto it = std::find(order.begin(), order.end(), e);
        return it == order.end() ? order.size() : static_cast<std::size_t>(it - order.begin());
    };
    std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : rank(a.second) < rank(b.second);
    });
    std::ostringstream os;
    char head[256];
    std::snprintf(head, sizeof head, "%-8s %-13s | %8s %8s %6s %8s | %8s %8s %6s %8s | %4s %4s\n", "scenario",
                  "estimator", "ARB", "ARRMSE", "ACov", "AW", "ARB", "ARRMSE", "ACov", "AW", "used", "excl");
    os << std::string(23, ' ') << "| mean intensity" << std::string(21, ' ') << "| heavy share\n" << head;
    for (const auto& [s, e] : keys) {
        const MetricSummary* z = find_summary(rows, s, e, Indicator::zbar);
        const MetricSummary* h = find_summary(rows, s, e, Indicator::hsbar);
        char line[256];
        auto f = [](const MetricSummary* m, double MetricSummary::*field, int digits) {
            return m ? fixed(m->*field, digits) : std::string("NA");
        };
        std::snprintf(line, sizeof line, "%-8d %-13s | %8s %8s %6s %8s | %8s %8s %6s %8s | %4d %4d\n", s, e.c_str(),
                      f(z, &MetricSummary::arb, 3).c_str(), f(z, &MetricSummary::arrmse, 3).c_str(),
                      f(z, &MetricSummary::acov, 3).c_str(), f(z, &MetricSummary::aw, 3).c_str(),
                      f(h, &MetricSummary::arb, 3).c_str(), f(h, &MetricSummary::arrmse, 3).c_str(),
                      f(h, &MetricSummary::acov, 3).c_str(), f(h, &MetricSummary::aw, 4).c_str(),
                      z ? z->used : 0, z ? z->excluded : 0);
        os << line;
    }
    return os.str();
}

void write_study_tables(const std::string& dir, const StudyResult& result) {
    write_table((std::filesystem::path(dir) / "estimates.csv").string(), estimates_table(result.estimates));
    write_table((std::filesystem::path(dir) / "fits.csv").string(), fits_table(result.replications));
    write_metric_tables(dir, result.cells, result.summary, result.truths);
    write_truths((std::filesystem::path(dir) / "truths.csv").string(), result.truths);
}

void write_metric_tables(const std::string& dir, std::span<const MetricCell> cells_in,
                         std::span<const MetricSummary> rows, const std::vector<std::vector<double>>& truths) {
    Table cells;
    cells.columns = {"scenario", "estimator", "indicator", "domain", "truth", "rb", "rrmse", "cov", "w", "replications"};
    for (const auto& c : cells_in) {
        cells.rows.push_back({std::to_string(c.scenario), c.estimator, to_string(c.indicator),
                              std::to_string(c.domain + 1), format_double(truths[truth_row(c.indicator)][c.domain]),
                              format_double(c.rb), format_double(c.rrmse), format_double(c.cov),
                              format_double(c.width), std::to_string(c.replications)});
    }
    write_table((std::filesystem::path(dir) / "metrics.csv").string(), cells);
    Table summary;
    summary.columns = {"scenario", "estimator", "indicator", "arb", "arrmse", "acov", "aw", "used", "excluded"};
    for (const auto& s : rows) {
        summary.rows.push_back({std::to_string(s.scenario), s.estimator, to_string(s.indicator),
                                format_double(s.arb), format_double(s.arrmse), format_double(s.acov),
                                format_double(s.aw), std::to_string(s.used), std::to_string(s.excluded)});
    }
    write_table((std::filesystem::path(dir) / "summary.csv").string(), summary);
    write_text((std::filesystem::path(dir) / "table1.txt").string(), format_summary_table(rows));
}

void write_truths(const std::string& path, const std::vector<std::vector<double>>& truths) {
    Table t;
    t.columns = {"domain", "zbar", "hsbar"};
    for (std::size_t d = 0; d < truths.at(0).size(); ++d) {
        t.rows.push_back({std::to_string(d + 1), format_double(truths[0][d]), format_double(truths.at(1)[d])});
    }
    write_table(path, t);
}

std::vector<std::vector<double>> read_truths(const std::string& path) {
    const Table t = read_table(path);
    const std::size_t cd = t.require("domain", path);
    const std::size_t cz = t.require("zbar", path);
    const std::size_t ch = t.require("hsbar", path);
    std::vector<std::vector<double>> out(2, std::vector<double>(t.rows.size(), kNaN));
    std::vector<bool> seen(t.rows.size(), false);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const int d = parse_int(row[cd], path, i + 2, "domain");
        if (d < 1 || d > static_cast<int>(t.rows.size()) || seen[d - 1]) {
            throw DataError(path + ":" + std::to_string(i + 2) + ": domain " + std::to_string(d) +
                            " is out of range or repeated");
        }
        seen[d - 1] = true;
        out[0][d - 1] = parse_double(row[cz], path, i + 2, "zbar");
        out[1][d - 1] = parse_double(row[ch], path, i + 2, "hsbar");
    }
    return out;
}

std::vector<EstimateRecord> read_estimates(const std::string& path) {
    return parse_estimates(read_table(path), path);
}

}  // namespace heapsae
