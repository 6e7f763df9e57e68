#include "doctest.h"

#include "heapsae/likelihood.hpp"
#include "heapsae/simstudy.hpp"
#include "heapsae/tables.hpp"

#include <cmath>
#include <filesystem>
#include <set>

using namespace heapsae;

namespace {

StudyConfig tiny_study(const std::string& dir) {
    StudyConfig c;
    c.population.sizes = {120, 150, 180};
    c.population_seed = 4;
    c.scenarios = {1};
    c.replications = 2;
    c.settings.estimators = {ModelKind::ln};
    c.settings.fraction = 0.2;
    c.settings.mcmc.chains = 2;
    c.settings.mcmc.iterations = 200;
    c.settings.mcmc.warmup = 100;
    c.settings.seed = 11;
    c.output_dir = dir;
    return c;
}

// Share of multiple-of-5 reports among units whose latent value lies in [lo, hi).
std::pair<double, double> heap_share(const std::vector<double>& z, const std::vector<ObservedAnswer>& a, double lo,
                                     double hi) {
    double n = 0.0;
    double heaped = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] >= lo && z[i] < hi) {
            n += 1.0;
            heaped += a[i].value % 5 == 0 ? 1.0 : 0.0;
        }
    }
    return {heaped, n};
}

// Pearson statistic of a 2 x 2 table given two (successes, trials) pairs.
double chi_squared(std::pair<double, double> a, std::pair<double, double> b) {
    const double p = (a.first + b.first) / (a.second + b.second);
    double x = 0.0;
    for (auto [s, n] : {a, b}) {
        const double e1 = n * p;
        const double e0 = n * (1.0 - p);
        x += (s - e1) * (s - e1) / e1 + ((n - s) - e0) * ((n - s) - e0) / e0;
    }
    return x;
}

}  // namespace

TEST_CASE("standard population design") {
    const PopulationSpec spec = PopulationSpec::standard();
    CHECK(spec.domains() == 30);
    CHECK(spec.total() == 30000);
    CHECK(1.0 / (1.0 + std::exp(-(spec.mix_intercept + spec.mix_slope))) == doctest::Approx(0.6457).epsilon(1e-4));
    const Population pop = generate_population(spec, 3);
    CHECK(pop.z.size() == 30000);
    CHECK(pop.start.back() == 30000);
    CHECK(pop.domain_of(0) == 0);
    CHECK(pop.domain_of(699) == 0);
    CHECK(pop.domain_of(700) == 1);
    CHECK(pop.domain_of(29999) == 29);
    // Truths are the domain means of the generated values.
    double s = 0.0;
    double h = 0.0;
    for (std::size_t i = pop.start[12]; i < pop.start[13]; ++i) {
        s += pop.z[i];
        h += pop.z[i] >= 20.0;
    }
    CHECK(pop.true_zbar[12] == doctest::Approx(s / 1000.0).epsilon(1e-12));
    CHECK(pop.true_hsbar[12] == doctest::Approx(h / 1000.0).epsilon(1e-12));
    double x = 0.0;
    for (double v : pop.x) {
        x += v;
    }
    CHECK(std::abs(x / 30000.0 - 0.4) < 4.0 * std::sqrt(0.24 / 30000.0));
}

TEST_CASE("population generation is reproducible") {
    const Population a = generate_population(PopulationSpec::standard(), 9);
    const Population b = generate_population(PopulationSpec::standard(), 9);
    const Population c = generate_population(PopulationSpec::standard(), 10);
    CHECK(a.z == b.z);
    CHECK(a.true_hsbar == b.true_hsbar);
    CHECK(a.z != c.z);
}

TEST_CASE("stratified samples") {
    CHECK(sample_size(700, 0.03) == 21);
    CHECK(sample_size(1000, 0.03) == 30);
    CHECK(sample_size(1300, 0.03) == 39);
    CHECK(sample_size(50, 0.01) == 1);  // 0.5 rounds up
    CHECK_THROWS_AS(sample_size(10, 0.0), std::invalid_argument);
    const Population pop = generate_population(PopulationSpec::standard(), 1);
    const auto s = draw_sample(pop, 0.03, 5, 2);
    REQUIRE(s.size() == 30);
    for (int d = 0; d < 30; ++d) {
        const std::set<std::size_t> unique(s[d].begin(), s[d].end());
        CHECK(unique.size() == s[d].size());
        CHECK(s[d].size() == static_cast<std::size_t>(sample_size(pop.spec.sizes[d], 0.03)));
        for (std::size_t i : s[d]) {
            CHECK(pop.domain_of(i) == d);
        }
    }
    CHECK(draw_sample(pop, 0.03, 5, 2) == s);
    CHECK(draw_sample(pop, 0.03, 5, 3) != s);
    const auto all = draw_sample(pop, 1.0, 5, 0);
    CHECK(all[4].size() == 700);
    CHECK(all[4].front() == pop.start[4]);
    CHECK(all[4].back() == pop.start[5] - 1);
}

TEST_CASE("scenario heaping matches the enumerated report distribution") {
    // Scenario 1 heaping does not depend on z, so the continuous and the
    // cell-constant probabilities agree and the enumeration is exact.
    const ScenarioConfig s1 = ScenarioConfig::standard(1);
    const MixtureAt m{1, 1.0, std::log(9.0), 0.0, 0.6, 1.0};
    const int n = 200000;
    std::vector<double> z(n);
    Stream s(17, 0);
    for (double& v : z) {
        v = std::exp(m.mu1 + m.sigma1 * s.normal());
    }
    const auto answers = apply_heaping(z, s1, 3, 0);
    const OutcomeTable t = outcome_distribution(m, s1.gamma);
    double expected = 0.0;
    for (std::size_t k = 0; k < t.answers.size(); ++k) {
        if (t.answers[k].value % 5 == 0) {
            expected += t.probabilities[k];
        }
    }
    double observed = 0.0;
    for (const auto& a : answers) {
        observed += a.value % 5 == 0;
    }
    observed /= n;
    CHECK(std::abs(observed - expected) < 4.0 * std::sqrt(expected * (1 - expected) / n));
    CHECK(expected > 0.1192);
}

TEST_CASE("heaping depends on z only in the scenarios with a slope") {
    const int n = 100000;
    std::vector<double> z(n);
    Stream s(23, 0);
    for (double& v : z) {
        v = std::exp(std::log(10.0) + 0.5 * s.normal());
    }
    // Away from the heaps a multiple of 5 can only come from heaping.
    for (int id : {1, 3}) {
        const auto a = apply_heaping(z, ScenarioConfig::standard(id), 1, 0);
        CHECK(chi_squared(heap_share(z, a, 5.5, 8.5), heap_share(z, a, 10.5, 13.5)) < 10.83);
    }
    for (int id : {2, 4}) {
        const auto a = apply_heaping(z, ScenarioConfig::standard(id), 1, 0);
        CHECK(chi_squared(heap_share(z, a, 5.5, 8.5), heap_share(z, a, 10.5, 13.5)) > 10.83);
    }
}

TEST_CASE("scenario 3 approaches a two-level scenario as gamma02 grows") {
    for (double z : {1.0, 4.7, 10.0, 23.0}) {
        const LevelProbs full = heaping_probs(z, HeapingParams::full(0.5, 30.0, 0.0));
        const LevelProbs reduced = heaping_probs(z, HeapingParams::reduced(0.5, 0.0));
        CHECK(full.ten < 1e-12);
        CHECK(full.one == doctest::Approx(reduced.one).epsilon(1e-12));
        CHECK(full.five == doctest::Approx(reduced.five).epsilon(1e-12));
    }
}

TEST_CASE("heaping streams are keyed by scenario and replication") {
    const std::vector<double> z(200, 12.3);
    const ScenarioConfig s = ScenarioConfig::standard(3);
    const auto a = apply_heaping(z, s, 1, 0);
    CHECK(apply_heaping(z, s, 1, 0).size() == a.size());
    std::vector<int> va;
    std::vector<int> vb;
    for (const auto& x : a) {
        va.push_back(x.value);
    }
    for (const auto& x : apply_heaping(z, s, 1, 1)) {
        vb.push_back(x.value);
    }
    CHECK(va != vb);
    CHECK_THROWS_AS(apply_heaping(std::vector<double>{0.0}, s, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(ScenarioConfig::standard(5), std::invalid_argument);
}

TEST_CASE("metric formulas") {
    const std::vector<std::vector<double>> truths{{10.0, 20.0}, {0.1, 0.2}};
    std::vector<EstimateRecord> rows;
    for (int r = 0; r < 4; ++r) {
        for (int d = 0; d < 2; ++d) {
            const double t = truths[0][d];
            rows.push_back({1, r, "exact", Indicator::zbar, d, t, t - 1.0, t + 1.0, false});
            rows.push_back({1, r, "scaled", Indicator::zbar, d, 1.1 * t, 100.0, 101.0, false});
            rows.push_back({1, r, "noisy", Indicator::zbar, d, t * (1.0 + 0.05 * (r - 1)), t, t, r == 3});
        }
    }
    const auto cells = compute_metrics(rows, truths);
    for (const auto& c : cells) {
        if (c.estimator == "exact") {
            CHECK(c.rb == 0.0);
            CHECK(c.rrmse == 0.0);
            CHECK(c.cov == 1.0);
            CHECK(c.width == 2.0);
        } else if (c.estimator == "scaled") {
            CHECK(c.rb == doctest::Approx(0.1));
            CHECK(c.rrmse == doctest::Approx(0.1));
            CHECK(c.cov == 0.0);
        } else {
            // Replication 4 is excluded: relative errors -0.05, 0, 0.05.
            CHECK(c.replications == 3);
            CHECK(c.rb == doctest::Approx(0.0).epsilon(1e-12));
            const double var = (0.0025 + 0.0 + 0.0025) / 3.0;
            CHECK(c.rrmse * c.rrmse == doctest::Approx(c.rb * c.rb + var).epsilon(1e-10));
            CHECK(c.rrmse >= std::abs(c.rb));
        }
    }
    const auto avg = average_metrics(cells, rows);
    const MetricSummary* noisy = find_summary(avg, 1, "noisy", Indicator::zbar);
    REQUIRE(noisy != nullptr);
    CHECK(noisy->used == 3);
    CHECK(noisy->excluded == 1);
    const MetricSummary* scaled = find_summary(avg, 1, "scaled", Indicator::zbar);
    REQUIRE(scaled != nullptr);
    CHECK(scaled->arb == doctest::Approx(0.1));
    CHECK(find_summary(avg, 2, "scaled", Indicator::zbar) == nullptr);
    const std::string table = format_summary_table(avg);
    CHECK(table.find("scaled") != std::string::npos);
    CHECK(table.find("ARRMSE") != std::string::npos);
}

TEST_CASE("a small study runs end to end and resumes from checkpoints") {
    const auto dir = std::filesystem::temp_directory_path() / "heapsae_study_test";
    std::filesystem::remove_all(dir);
    const StudyResult first = run_study(tiny_study(dir.string()));
    CHECK(first.replications.size() == 2);
    // 3 domains x 2 indicators x (1 model + 2 direct) per replication.
    CHECK(first.estimates.size() == 2 * 3 * 2 * 3);
    const MetricSummary* ln = find_summary(first.summary, 1, "LN", Indicator::zbar);
    REQUIRE(ln != nullptr);
    CHECK(ln->used + ln->excluded == 2);
    CHECK(std::filesystem::exists(dir / "table1.txt"));
    CHECK(std::filesystem::exists(dir / "summary.csv"));

    std::filesystem::remove(dir / "checkpoints" / "s1-r2.fits.csv");
    int fresh = 0;
    const StudyResult resumed = run_study(tiny_study(dir.string()), [&](const ReplicationResult&) { ++fresh; });
    CHECK(fresh == 2);
    const StudyResult memory = run_study(tiny_study(""));
    REQUIRE(resumed.estimates.size() == first.estimates.size());
    for (std::size_t i = 0; i < first.estimates.size(); ++i) {
        const auto& a = first.estimates[i];
        const auto& b = resumed.estimates[i];
        const auto& c = memory.estimates[i];
        CHECK((a.estimate == b.estimate || (std::isnan(a.estimate) && std::isnan(b.estimate))));
        CHECK(a.lo == b.lo);
        CHECK(a.hi == c.hi);
        CHECK(a.estimate == c.estimate);
    }

    StudyConfig other = tiny_study(dir.string());
    other.settings.mcmc.iterations = 300;
    CHECK_THROWS_AS(run_study(other), DataError);
    std::filesystem::remove_all(dir);
}
