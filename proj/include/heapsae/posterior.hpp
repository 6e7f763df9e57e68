#pragma once

// Unconstrained posterior targets for the intensity and participation parts.
// Positive scales are log-transformed, ordered pairs become (first, log gap)
// and random effects are non-centered (u = tau * raw, raw ~ N(0, 1)).

#include "heapsae/likelihood.hpp"
#include "heapsae/model.hpp"
#include "heapsae/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace heapsae {

enum class ModelKind { ln, ln_c, lnm, lnm_c };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
inline constexpr std::array<ModelKind, 4> kAllModels{ModelKind::ln, ModelKind::ln_c, ModelKind::lnm,
                                                      ModelKind::lnm_c};

struct ModelSpec {
    ModelKind kind = ModelKind::lnm_c;
    HeapingMode mode = HeapingMode::full;
    /// Exact models only: 21 is right-censored at 20.5 (true) or taken at face value.
    bool censor_topcode = true;

    int components() const { return kind == ModelKind::lnm || kind == ModelKind::lnm_c ? 2 : 1; }
    bool coarsened() const { return kind == ModelKind::ln_c || kind == ModelKind::lnm_c; }
    ObservationModel observation() const { return ObservationModel{coarsened(), mode, censor_topcode}; }
};

/// A smooth log-density over R^n with its gradient.
class LogDensity {
public:
    virtual ~LogDensity() = default;
    virtual std::size_t dim() const = 0;
    /// Writes the gradient into grad (size dim()) and returns the log-density.
    virtual double log_density(std::span<const double> q, std::span<double> grad) const = 0;
    double log_density(std::span<const double> q) const;
    /// Names and values of the constrained quantities recorded per draw.
    virtual std::vector<std::string> output_names() const = 0;
    virtual std::vector<double> output_values(std::span<const double> q) const = 0;
    /// Starting point for one chain.
    virtual std::vector<double> initial_point(Stream& rng) const = 0;
};

struct IntensityState {
    IntensityParams theta;
    std::optional<HeapingParams> gamma;
};

class IntensityPosterior final : public LogDensity {
public:
    IntensityPosterior(IntensityData data, ModelSpec spec, PriorConfig prior);

    std::size_t dim() const override { return dim_; }
    using LogDensity::log_density;
    double log_density(std::span<const double> q, std::span<double> grad) const override;
    std::vector<std::string> output_names() const override;
    std::vector<double> output_values(std::span<const double> q) const override;
    std::vector<double> initial_point(Stream& rng) const override;

    std::vector<std::string> unconstrained_names() const;
    /// Constrained state; log_jacobian receives the log-determinant of the
    /// inverse transform including the non-centering term.
    IntensityState to_constrained(std::span<const double> q, double* log_jacobian = nullptr) const;
    /// Throws std::invalid_argument when the state violates an invariant.
    std::vector<double> to_unconstrained(const IntensityState& state) const;
    IntensityState from_output(std::span<const double> values) const;

    const IntensityData& data() const { return data_; }
    const ModelSpec& spec() const { return spec_; }
    const PriorConfig& prior() const { return prior_; }

private:
    IntensityData data_;
    ModelSpec spec_;
    PriorConfig prior_;
    std::size_t p_ = 0;
    std::size_t d_ = 0;
    std::size_t dim_ = 0;
    // Offsets into the unconstrained vector; npos when absent.
    std::size_t beta0_mu1_ = 0;
    std::size_t log_gap_mu_ = 0;
    std::size_t beta_mu_ = 0;
    std::size_t raw_mu_ = 0;
    std::size_t log_tau_mu_ = 0;
    std::size_t log_sigma1_ = 0;
    std::size_t log_sigma2_ = 0;
    std::size_t beta0_pi_ = 0;
    std::size_t beta_pi_ = 0;
    std::size_t raw_pi_ = 0;
    std::size_t log_tau_pi_ = 0;
    std::size_t gamma01_ = 0;
    std::size_t log_gap_gamma_ = 0;
    std::size_t gamma1_ = 0;
};

class ParticipationPosterior final : public LogDensity {
public:
    ParticipationPosterior(ParticipationData data, PriorConfig prior);

    std::size_t dim() const override { return 2 + p_ + d_; }
    using LogDensity::log_density;
    double log_density(std::span<const double> q, std::span<double> grad) const override;
    std::vector<std::string> output_names() const override;
    std::vector<double> output_values(std::span<const double> q) const override;
    std::vector<double> initial_point(Stream& rng) const override;

    std::vector<std::string> unconstrained_names() const;
    ParticipationParams to_constrained(std::span<const double> q, double* log_jacobian = nullptr) const;
    std::vector<double> to_unconstrained(const ParticipationParams& delta) const;
    ParticipationParams from_output(std::span<const double> values) const;

    const ParticipationData& data() const { return data_; }

private:
    ParticipationData data_;
    PriorConfig prior_;
    std::size_t p_ = 0;
    std::size_t d_ = 0;
};

/// Output column names of the two parts, shared by draw files.
std::vector<std::string> intensity_output_names(const ModelSpec& spec, std::size_t p, std::size_t domains);
std::vector<std::string> participation_output_names(std::size_t p, std::size_t domains);
/// Inverse of output_values: parameters from one row in output-name order.
IntensityState intensity_state_from_values(const ModelSpec& spec, std::size_t p, std::size_t domains,
                                          std::span<const double> values);
ParticipationParams participation_state_from_values(std::size_t p, std::size_t domains,
                                                    std::span<const double> values);

}  // namespace heapsae
