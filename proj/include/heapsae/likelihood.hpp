#pragma once

// Coarsening-aware likelihood of the intensity part, the participation
// likelihood, and exhaustive outcome tables used for validation.
//
// Reports are modeled through the integer cells I_1(q): for q = 1..24 the
// latent value falls in I_1(q) with probability m_q = F(q + 1/2) - F(q - 1/2)
// (F(1/2) read as F(0) = 0), and the remaining mass 1 - F(24.5) is always
// top-coded. Given the cell, the heaping level is drawn from lambda_g(q) and
// the report is fixed, so P(report = k) = sum_q W[k][q] m_q with a 21 x 25
// transition matrix W that depends on gamma only.

#include "heapsae/coarsening.hpp"
#include "heapsae/model.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace heapsae {

inline constexpr int kMassSlots = kLastCell + 1;  // q = 1..24 plus the tail
using ReportProbs = std::array<double, kTopCode>;  // index k - 1 for k = 1..21
using ReportCounts = std::array<double, kTopCode>;

/// How reported values enter the intensity likelihood.
struct ObservationModel {
    /// true: coarsening-aware likelihood; false: reports taken at face value
    /// as integer-rounded values, i.e. without heaping.
    bool coarsened = true;
    HeapingMode mode = HeapingMode::full;
    /// Face-value model only: 21 is a right-censored observation beyond 20.5
    /// (default) or, when false, the integer cell of 21.
    bool censor_topcode = true;
};

/// Heaping transition for one gamma, with derivatives of every lambda_g(q)
/// with respect to (gamma01, gamma02, gamma1).
class ReportKernel {
public:
    explicit ReportKernel(const HeapingParams& gamma);
    /// Plain integer rounding: lambda_1 = 1 in every cell.
    static const ReportKernel& rounding();

    const HeapingParams& params() const { return gamma_; }
    double lambda(int q, HeapingLevel g) const { return lambda_[q - 1][level_index(g)]; }
    const std::array<double, 3>& dlambda(int q, HeapingLevel g) const { return dlambda_[q - 1][level_index(g)]; }

    /// P(report = k) for every k from the masses m_1..m_24 and the tail.
    ReportProbs report_probs(std::span<const double, kMassSlots> masses) const;

    /// Report index (k - 1) reached from cell q under level g.
    static int target(int q, HeapingLevel g);

private:
    ReportKernel();
    HeapingParams gamma_;
    std::array<std::array<double, 3>, kLastCell> lambda_{};
    std::array<std::array<std::array<double, 3>, 3>, kLastCell> dlambda_{};
};

/// Masses m_1..m_24 and the tail mass for one mixture.
std::array<double, kMassSlots> cell_masses(const MixtureAt& mix);

/// Probability of the integer cell I_1(q).
double interval_mass(int q, const MixtureAt& mix);
double interval_mass(int q, std::span<const double> x, int domain, const IntensityParams& theta);

double loglik_unit(const ObservedAnswer& answer, std::span<const double> x, int domain,
                   const IntensityParams& theta, const HeapingParams& gamma);
double loglik_censored(std::span<const double> x, int domain, const IntensityParams& theta,
                       const HeapingParams& gamma);

/// Log-likelihood of one report under the given observation model. gamma is
/// required for coarsened models and ignored otherwise.
double loglik_report(int value, const MixtureAt& mix, const ObservationModel& obs,
                     const ReportKernel* kernel);

/// log P(report = k) for k = 1..21; -inf where the probability is zero.
ReportProbs report_logprobs(const MixtureAt& mix, const ObservationModel& obs, const ReportKernel* kernel);

struct OutcomeTable {
    std::vector<ObservedAnswer> answers;
    std::vector<double> probabilities;

    double total() const;
};

OutcomeTable outcome_distribution(std::span<const double> x, int domain, const IntensityParams& theta,
                                  const HeapingParams& gamma);
OutcomeTable outcome_distribution(const MixtureAt& mix, const HeapingParams& gamma);

/// Sample units grouped by (domain, covariate pattern) with counts per
/// reported value. Grouping is exact, so totals equal the unit-level sums.
struct IntensityData {
    int domains = 0;
    std::size_t covariates = 0;
    std::vector<int> pattern_domain;
    std::vector<std::vector<double>> pattern_x;
    std::vector<ReportCounts> counts;
    std::vector<int> unit_pattern;
    std::vector<int> unit_value;

    static IntensityData from_records(std::span<const UnitRecord> records, int domains);
    std::size_t units() const { return unit_pattern.size(); }
    std::vector<ObservedAnswer> answers(HeapingMode mode = HeapingMode::full) const;
};

struct ParticipationData {
    int domains = 0;
    std::size_t covariates = 0;
    std::vector<int> pattern_domain;
    std::vector<std::vector<double>> pattern_x;
    std::vector<double> ones;
    std::vector<double> zeros;
    std::vector<int> unit_pattern;
    std::vector<int> unit_w;

    static ParticipationData from_records(std::span<const UnitRecord> records, int domains);
    std::size_t units() const { return unit_pattern.size(); }
};

struct LogLik {
    double total = 0.0;
    std::vector<double> pointwise;
};

LogLik loglik_intensity(const IntensityData& data, const IntensityParams& theta,
                        const std::optional<HeapingParams>& gamma, const ObservationModel& obs);
LogLik loglik_intensity(std::span<const UnitRecord> records, int domains, const IntensityParams& theta,
                        const HeapingParams& gamma);
LogLik loglik_participation(const ParticipationData& data, const ParticipationParams& delta);
LogLik loglik_participation(std::span<const UnitRecord> records, int domains, const ParticipationParams& delta);

double log_posterior_intensity(const IntensityData& data, const IntensityParams& theta,
                               const std::optional<HeapingParams>& gamma, const ObservationModel& obs,
                               const PriorConfig& config);
double log_posterior_participation(const ParticipationData& data, const ParticipationParams& delta,
                                   const PriorConfig& config);

/// Derivatives of a pattern's log-likelihood with respect to the quantities
/// the pattern sees: the two locations, the two scales, the mixing logit and
/// the heaping parameters (gamma01, gamma02, gamma1).
struct PatternGradient {
    double mu1 = 0.0;
    double mu2 = 0.0;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double eta = 0.0;
    std::array<double, 3> gamma{};
};

/// Log-likelihood of all reports of one pattern, with gradient when grad is
/// non-null. Returns -inf when a report has zero probability.
double pattern_loglik(const MixtureAt& mix, const ReportCounts& counts, const ObservationModel& obs,
                      const ReportKernel* kernel, PatternGradient* grad);

}  // namespace heapsae
