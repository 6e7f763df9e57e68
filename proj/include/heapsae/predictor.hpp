#pragma once

// Posterior predictive draws for population units, hierarchical Bayes domain
// predictors, posterior predictive checks and design-based direct estimators.
//
// Every unit owns a fixed slice of counter blocks in a stream keyed by
// (seed, stream, slot, domain, draw), so a predictive draw never depends on
// how the population is traversed or split across threads.

#include "heapsae/posterior.hpp"
#include "heapsae/rng.hpp"
#include "heapsae/stats.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace heapsae {

/// Population covariate patterns with unit counts per (domain, x).
struct PopulationFrame {
    int domains = 0;
    std::size_t covariates = 0;
    std::vector<int> pattern_domain;
    std::vector<std::vector<double>> pattern_x;
    std::vector<long long> pattern_count;

    /// One row per unit; only domain and x are read.
    static PopulationFrame from_units(std::span<const UnitRecord> units, int domains);
    /// Merges repeated (domain, x) rows. Counts must be positive.
    static PopulationFrame from_patterns(int domains, std::span<const int> domain,
                                         std::span<const std::vector<double>> x, std::span<const long long> count);
    std::vector<long long> domain_sizes() const;
    PopulationFrame transformed(const Standardizer& s) const;
    /// Pattern index of (domain, x), or npos.
    std::size_t find(int domain, std::span<const double> x) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

enum class UnitSlot : std::uint64_t { sampled = 0, unsampled = 1, replicate = 2 };

inline constexpr std::uint64_t kBlocksPerUnit = 4;

/// Stream of one unit at one draw, positioned at the unit's first block.
Stream unit_stream(std::uint64_t seed, std::uint64_t stream, UnitSlot slot, int domain, std::size_t draw,
                   std::size_t unit);
/// Stream shared by the units of one (slot, domain, draw); seek to
/// unit * kBlocksPerUnit before drawing for a unit.
Stream cell_stream(std::uint64_t seed, std::uint64_t stream, UnitSlot slot, int domain, std::size_t draw);

/// One unit's predictive draw. Values are consumed in a fixed order: the
/// participation uniform, the component uniform, the normal, the level uniform.
struct UnitDraw {
    int w = 1;
    double z = 0.0;
    HeapingLevel g = HeapingLevel::one;
    ObservedAnswer zstar;
};

int predict_w(Stream& rng, double nu);
double predict_z(Stream& rng, const MixtureAt& mix);
/// Level drawn from the cell-constant probabilities the likelihood uses.
HeapingLevel predict_g(Stream& rng, double z, const HeapingParams& gamma);
ObservedAnswer predict_zstar(double z, HeapingLevel g, HeapingMode mode);
/// Full draw; nu absent means participation is not modeled (w = 1), gamma
/// absent means reports are plain integer rounding.
UnitDraw predict_unit(Stream& rng, std::optional<double> nu, const MixtureAt& mix,
                      const std::optional<HeapingParams>& gamma, HeapingMode mode);

struct PredictionInput {
    /// Frame and sample on the same (standardized) covariate scale.
    const PopulationFrame* frame = nullptr;
    std::span<const UnitRecord> sample;
    std::span<const IntensityState> intensity;
    /// Empty: every unsampled unit participates. Otherwise aligned with intensity.
    std::span<const ParticipationParams> participation;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    int workers = 1;
};

/// Per-draw domain means of w, of z over participants and of 1{z >= 20}
/// over participants.
struct DomainDraws {
    std::vector<double> wbar;
    std::vector<double> zbar;
    std::vector<double> hsbar;
};

/// Draws for every domain. Sampled units keep their observed w and receive
/// fresh predictive z; unsampled units receive predictive (w, z). Throws
/// DataError when the sample does not fit the frame or a domain has no
/// sampled participant.
std::vector<DomainDraws> hb_predict(const PredictionInput& input);

enum class Indicator { wbar, zbar, hsbar };
std::string to_string(Indicator indicator);

struct DomainEstimate {
    int domain = 0;
    Indicator indicator = Indicator::zbar;
    /// Posterior mean and 90% interval of the predictive draws.
    Summary summary;
};

std::vector<DomainEstimate> domain_estimates(const std::vector<DomainDraws>& draws, Indicator indicator);
std::vector<DomainEstimate> hb_wbar(const PredictionInput& input);
std::vector<DomainEstimate> hb_zbar(const PredictionInput& input);
std::vector<DomainEstimate> hb_hsbar(const PredictionInput& input);

struct PpcBand {
    double observed = 0.0;
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool inside() const { return observed >= lo && observed <= hi; }
};

struct PpcResult {
    /// Share of participants among sampled units; absent without participation draws.
    std::optional<PpcBand> participation;
    /// Empirical CDF of the reports at t against the predictive CDF of the
    /// latent values at t + 1/2, t = 1..20.
    std::vector<PpcBand> cdf;
    /// Counts of each report 1..21 against replicated reports.
    std::vector<PpcBand> counts;
};

/// 90% predictive bands from replicated sample data, one replicate per draw.
PpcResult ppc_stats(std::span<const UnitRecord> sample, const ModelSpec& spec,
                    std::span<const IntensityState> intensity, std::span<const ParticipationParams> participation,
                    std::uint64_t seed, std::uint64_t stream = 0);

struct DirectEstimate {
    int domain = 0;
    long long population = 0;
    int n = 0;
    int participants = 0;
    double wbar = 0.0;
    double wbar_se = 0.0;
    /// NaN when the domain has no participant.
    double zbar = 0.0;
    double zbar_se = 0.0;
    double hsbar = 0.0;
    double hsbar_se = 0.0;
};

/// Sample means with simple-random-sampling standard errors and finite
/// population correction; z holds the values of the participants.
DirectEstimate direct_estimate(int domain, long long population, std::span<const int> w, std::span<const double> z);
/// Direct estimates from reports taken at face value; 20 and 21 count as heavy.
std::vector<DirectEstimate> direct_estimates(std::span<const UnitRecord> sample,
                                             std::span<const long long> domain_sizes);

}  // namespace heapsae
