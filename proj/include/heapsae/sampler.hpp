#pragma once

// Multinomial no-U-turn sampler with a diagonal metric, dual-averaging step
// size and windowed variance adaptation during warm-up, plus rank-normalized
// split-Rhat and effective sample size.

#include "heapsae/posterior.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace heapsae {

/// Non-finite target at initialization, non-finite gradient at a finite
/// density, or a failed step-size search.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChainConfig {
    int chains = 4;
    int iterations = 2000;
    int warmup = 1000;
    std::uint64_t seed = 1;
    double target_acceptance = 0.8;
    int max_depth = 10;
    /// Chains run concurrently on up to this many threads.
    int workers = 1;
    /// Stream-id prefix, so repeated fits under one seed stay independent.
    std::uint64_t stream = 0;

    void validate() const;
};

struct ChainInfo {
    double stepsize = 0.0;
    std::vector<double> inv_metric;
    int divergences = 0;
    double mean_accept = 0.0;
    int max_treedepth_hits = 0;
};

class PosteriorDraws {
public:
    PosteriorDraws() = default;
    PosteriorDraws(std::vector<std::string> names, int chains, int per_chain);

    const std::vector<std::string>& names() const { return names_; }
    int chains() const { return chains_; }
    int per_chain() const { return per_chain_; }
    std::size_t draws() const { return chain_.size(); }
    std::size_t columns() const { return names_.size(); }

    /// Row b is iteration iteration(b) of chain chain(b); rows are grouped by chain.
    int chain(std::size_t row) const { return chain_[row]; }
    int iteration(std::size_t row) const { return iteration_[row]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * names_.size() + col]; }
    std::span<const double> row(std::size_t r) const;
    double log_density(std::size_t row) const { return lp_[row]; }

    std::size_t index_of(const std::string& name) const;
    bool has(const std::string& name) const;
    std::vector<double> column(std::size_t col) const;
    std::vector<double> column(const std::string& name) const { return column(index_of(name)); }
    /// Draws of one column split by chain.
    std::vector<std::vector<double>> by_chain(std::size_t col) const;

    void append(int chain, int iteration, std::span<const double> values, double lp);

    std::vector<ChainInfo> info;

private:
    std::vector<std::string> names_;
    int chains_ = 0;
    int per_chain_ = 0;
    std::vector<int> chain_;
    std::vector<int> iteration_;
    std::vector<double> values_;
    std::vector<double> lp_;
};

/// Runs config.chains chains and keeps the post-warm-up draws of
/// target.output_values.
PosteriorDraws run_mcmc(const LogDensity& target, const ChainConfig& config);

/// Rank-normalized split-Rhat: the larger of the bulk and folded versions.
double split_rhat(const std::vector<std::vector<double>>& chains);
double split_rhat(const PosteriorDraws& draws, std::size_t col);
/// Split-chain effective sample size of the raw values.
double ess(const std::vector<std::vector<double>>& chains);
double ess(const PosteriorDraws& draws, std::size_t col);
/// Split-chain effective sample size of the rank-normalized values.
double ess_bulk(const std::vector<std::vector<double>>& chains);

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
    double rhat = 0.0;
    double ess_bulk = 0.0;
};

std::vector<ParameterSummary> summarize_parameters(const PosteriorDraws& draws);
double max_rhat(const PosteriorDraws& draws);

/// Delimited draw file: chain, iteration, lp__, then one column per parameter.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::string& path);

}  // namespace heapsae
