#pragma once

// Fitting the two model parts and mapping draw rows back to parameters.

#include "heapsae/posterior.hpp"
#include "heapsae/sampler.hpp"

#include <vector>

namespace heapsae {

struct IntensityFit {
    ModelSpec spec;
    PriorConfig prior;
    PosteriorDraws draws;
    std::vector<IntensityState> states;
};

struct ParticipationFit {
    PriorConfig prior;
    PosteriorDraws draws;
    std::vector<ParticipationParams> states;
};

IntensityFit fit_intensity(const IntensityData& data, const ModelSpec& spec, const PriorConfig& prior,
                           const ChainConfig& config);
ParticipationFit fit_participation(const ParticipationData& data, const PriorConfig& prior,
                                   const ChainConfig& config);

/// Parameters of every draw row; throws DataError when a column is missing.
std::vector<IntensityState> intensity_states(const PosteriorDraws& draws, const ModelSpec& spec,
                                             std::size_t covariates, int domains);
std::vector<ParticipationParams> participation_states(const PosteriorDraws& draws, std::size_t covariates,
                                                      int domains);

/// Pointwise log-likelihood of every sample unit under every draw, laid out
/// as [draw][unit] in the order of data.unit_pattern.
std::vector<std::vector<double>> pointwise_loglik(const IntensityData& data, const ObservationModel& obs,
                                                  std::span<const IntensityState> states);

}  // namespace heapsae
