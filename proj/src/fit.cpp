#include "heapsae/fit.hpp"

#include "heapsae/tables.hpp"

namespace heapsae {

namespace {

// Column positions of the expected names, in their order.
std::vector<std::size_t> locate(const PosteriorDraws& draws, const std::vector<std::string>& names) {
    std::vector<std::size_t> cols;
    cols.reserve(names.size());
    for (const auto& name : names) {
        if (!draws.has(name)) {
            throw DataError("draws lack column '" + name + "'");
        }
        cols.push_back(draws.index_of(name));
    }
    return cols;
}

std::vector<double> gather(const PosteriorDraws& draws, std::size_t row, const std::vector<std::size_t>& cols) {
    std::vector<double> v(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        v[j] = draws.at(row, cols[j]);
    }
    return v;
}

}  // namespace

IntensityFit fit_intensity(const IntensityData& data, const ModelSpec& spec, const PriorConfig& prior,
                           const ChainConfig& config) {
    const IntensityPosterior post(data, spec, prior);
    IntensityFit fit{spec, prior, run_mcmc(post, config), {}};
    fit.states = intensity_states(fit.draws, spec, data.covariates, data.domains);
    return fit;
}

ParticipationFit fit_participation(const ParticipationData& data, const PriorConfig& prior,
                                   const ChainConfig& config) {
    const ParticipationPosterior post(data, prior);
    ParticipationFit fit{prior, run_mcmc(post, config), {}};
    fit.states = participation_states(fit.draws, data.covariates, data.domains);
    return fit;
}

std::vector<IntensityState> intensity_states(const PosteriorDraws& draws, const ModelSpec& spec,
                                             std::size_t covariates, int domains) {
    const auto cols = locate(draws, intensity_output_names(spec, covariates, domains));
    std::vector<IntensityState> out;
    out.reserve(draws.draws());
    for (std::size_t b = 0; b < draws.draws(); ++b) {
        out.push_back(intensity_state_from_values(spec, covariates, domains, gather(draws, b, cols)));
    }
    return out;
}

std::vector<ParticipationParams> participation_states(const PosteriorDraws& draws, std::size_t covariates,
                                                      int domains) {
    const auto cols = locate(draws, participation_output_names(covariates, domains));
    std::vector<ParticipationParams> out;
    out.reserve(draws.draws());
    for (std::size_t b = 0; b < draws.draws(); ++b) {
        out.push_back(participation_state_from_values(covariates, domains, gather(draws, b, cols)));
    }
    return out;
}

std::vector<std::vector<double>> pointwise_loglik(const IntensityData& data, const ObservationModel& obs,
                                                  std::span<const IntensityState> states) {
    std::vector<std::vector<double>> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        out.push_back(loglik_intensity(data, s.theta, s.gamma, obs).pointwise);
    }
    return out;
}

}  // namespace heapsae
