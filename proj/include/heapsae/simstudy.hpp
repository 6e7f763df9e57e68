#pragma once

// Design-based simulation study: a synthetic lognormal-mixture population,
// stratified simple random samples, scenario-specific heaping, the four model
// estimators and their relative bias, error, coverage and width.
//
// Replication r draws one sample and one set of latent values that every
// scenario reuses; only the heaping draws differ between scenarios.

#include "heapsae/posterior.hpp"
#include "heapsae/predictor.hpp"
#include "heapsae/sampler.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace heapsae {

struct PopulationSpec {
    std::vector<int> sizes;
    double covariate_prob = 0.4;
    double mix_intercept = 0.4;
    double mix_slope = 0.2;
    double b01 = 1.7;
    double b02 = 2.7;
    double slope = 0.05;
    double domain_sd = 0.25;
    double sd1 = 0.5;
    double sd2 = 0.25;

    /// Thirty domains of 700, 1000 and 1300 units, ten each.
    static PopulationSpec standard();
    int domains() const { return static_cast<int>(sizes.size()); }
    long long total() const;
    void validate() const;
};

struct Population {
    PopulationSpec spec;
    /// Units are stored domain by domain; domain d spans [start[d], start[d + 1]).
    std::vector<std::size_t> start;
    std::vector<double> x;
    std::vector<double> z;
    /// Mixture component (1 or 2) of every unit.
    std::vector<int> component;
    std::vector<double> u;
    std::vector<double> true_zbar;
    std::vector<double> true_hsbar;

    int domain_of(std::size_t unit) const;
};

Population generate_population(const PopulationSpec& spec, std::uint64_t seed);

/// round(fraction * N_d) with halves rounded up, at least one unit.
int sample_size(long long population, double fraction);

/// Global unit indices of a stratified SRSWOR, ascending within each domain.
std::vector<std::vector<std::size_t>> draw_sample(const Population& pop, double fraction, std::uint64_t seed,
                                                  std::uint64_t replication = 0);

struct ScenarioConfig {
    int id = 1;
    HeapingParams gamma;

    /// Scenarios 1-4 of the study design.
    static ScenarioConfig standard(int id);
    HeapingMode mode() const { return gamma.mode; }
};

/// Levels from the continuous heaping probabilities, then the coarsening map.
std::vector<ObservedAnswer> apply_heaping(std::span<const double> z, const ScenarioConfig& scenario,
                                          std::uint64_t seed, std::uint64_t replication = 0);

struct EstimatorFit {
    ModelKind kind = ModelKind::lnm_c;
    double max_rhat = 0.0;
    int divergences = 0;
    bool converged = true;
    double seconds = 0.0;
    /// Posterior summary of gamma1 for coarsened models.
    std::optional<Summary> gamma1;
};

/// One interval estimate of one domain quantity.
struct EstimateRecord {
    int scenario = 0;
    int replication = 0;
    std::string estimator;
    Indicator indicator = Indicator::zbar;
    int domain = 0;
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool excluded = false;
};

struct ReplicationResult {
    int scenario = 0;
    int replication = 0;
    std::vector<EstimatorFit> fits;
    /// Model estimates followed by the direct estimates ("direct-true" on
    /// latent values, "direct-coarse" on the reports).
    std::vector<EstimateRecord> estimates;
};

struct ReplicationSettings {
    std::vector<ModelKind> estimators{kAllModels.begin(), kAllModels.end()};
    ChainConfig mcmc;
    double rhat_threshold = 1.05;
    double fraction = 0.03;
    /// Study seed; fits and predictions use streams keyed by (scenario, replication, model).
    std::uint64_t seed = 1;
};

/// Sample records (covariates standardized on the sample), latent values,
/// reports and the two-pattern-per-domain population frame of one replication.
struct ReplicationData {
    std::vector<UnitRecord> records;
    std::vector<double> z;
    std::vector<ObservedAnswer> answers;
    PopulationFrame frame;
};

ReplicationData replication_data(const Population& pop, std::span<const std::vector<std::size_t>> sample,
                                 const ScenarioConfig& scenario, int replication, std::uint64_t seed);

ReplicationResult run_replication(const Population& pop, std::span<const std::vector<std::size_t>> sample,
                                  const ScenarioConfig& scenario, int replication,
                                  const ReplicationSettings& settings);

struct MetricCell {
    int scenario = 0;
    std::string estimator;
    Indicator indicator = Indicator::zbar;
    int domain = 0;
    double rb = 0.0;
    double rrmse = 0.0;
    double cov = 0.0;
    double width = 0.0;
    int replications = 0;
};

struct MetricSummary {
    int scenario = 0;
    std::string estimator;
    Indicator indicator = Indicator::zbar;
    double arb = 0.0;
    double arrmse = 0.0;
    double acov = 0.0;
    double aw = 0.0;
    /// Replications used and excluded.
    int used = 0;
    int excluded = 0;
};

/// Per-domain metrics over the non-excluded replications; truths are indexed
/// [indicator][domain] with indicator zbar = 0, hsbar = 1.
std::vector<MetricCell> compute_metrics(std::span<const EstimateRecord> estimates,
                                        const std::vector<std::vector<double>>& truths);
/// Domain averages of the cells of each (scenario, estimator, indicator).
std::vector<MetricSummary> average_metrics(std::span<const MetricCell> cells,
                                           std::span<const EstimateRecord> estimates);

struct StudyConfig {
    PopulationSpec population = PopulationSpec::standard();
    std::uint64_t population_seed = 1;
    std::vector<int> scenarios{1, 2, 3, 4};
    int replications = 25;
    ReplicationSettings settings;
    /// Replications run concurrently on this many threads.
    int workers = 1;
    /// Checkpoints and tables go here; empty keeps everything in memory.
    std::string output_dir;

    /// Four chains of 1000 iterations with 500 warm-up.
    static StudyConfig desk();
    void validate() const;
};

struct StudyResult {
    std::vector<ReplicationResult> replications;
    std::vector<EstimateRecord> estimates;
    std::vector<MetricCell> cells;
    std::vector<MetricSummary> summary;
    std::vector<std::vector<double>> truths;
};

using StudyProgress = std::function<void(const ReplicationResult&)>;

/// Runs every (scenario, replication). With an output directory, finished
/// replications are checkpointed and reused on the next call.
StudyResult run_study(const StudyConfig& config, const StudyProgress& progress = {});

/// Summary rows of one (scenario, estimator, indicator), or nullptr.
const MetricSummary* find_summary(std::span<const MetricSummary> rows, int scenario, const std::string& estimator,
                                  Indicator indicator);
/// Table-1-shaped text: one line per scenario and estimator, four metrics per indicator.
std::string format_summary_table(std::span<const MetricSummary> rows);
/// estimates.csv, fits.csv, metrics.csv, summary.csv, table1.txt and truths.csv.
void write_study_tables(const std::string& dir, const StudyResult& result);
/// metrics.csv, summary.csv and table1.txt.
void write_metric_tables(const std::string& dir, std::span<const MetricCell> cells,
                         std::span<const MetricSummary> summary, const std::vector<std::vector<double>>& truths);
/// Domain truths as [indicator][domain], zbar = 0 and hsbar = 1.
void write_truths(const std::string& path, const std::vector<std::vector<double>>& truths);
std::vector<std::vector<double>> read_truths(const std::string& path);
std::vector<EstimateRecord> read_estimates(const std::string& path);

}  // namespace heapsae
