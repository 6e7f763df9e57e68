#include "heapsae/coarsening.hpp"

#include "heapsae/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace heapsae {

int level_index(HeapingLevel g) {
    switch (g) {
    case HeapingLevel::one:
        return 0;
    case HeapingLevel::five:
        return 1;
    case HeapingLevel::ten:
        return 2;
    }
    throw std::invalid_argument("unknown heaping level");
}

std::string to_string(HeapingMode mode) {
    return mode == HeapingMode::full ? "full" : "reduced";
}

HeapingMode heaping_mode_from_string(const std::string& name) {
    if (name == "full") {
        return HeapingMode::full;
    }
    if (name == "reduced") {
        return HeapingMode::reduced;
    }
    throw std::invalid_argument("heaping mode must be 'full' or 'reduced', got '" + name + "'");
}

LevelSet LevelSet::of(std::initializer_list<HeapingLevel> levels) {
    LevelSet set;
    for (HeapingLevel g : levels) {
        set.insert(g);
    }
    return set;
}

std::vector<HeapingLevel> LevelSet::levels() const {
    std::vector<HeapingLevel> out;
    for (HeapingLevel g : kAllLevels) {
        if (contains(g)) {
            out.push_back(g);
        }
    }
    return out;
}

HeapingParams HeapingParams::reduced(double gamma0, double gamma1) {
    HeapingParams p;
    p.mode = HeapingMode::reduced;
    p.gamma01 = gamma0;
    p.gamma02 = 0.0;
    p.gamma1 = gamma1;
    return p;
}

HeapingParams HeapingParams::full(double gamma01, double gamma02, double gamma1) {
    HeapingParams p;
    p.mode = HeapingMode::full;
    p.gamma01 = gamma01;
    p.gamma02 = gamma02;
    p.gamma1 = gamma1;
    p.validate();
    return p;
}

void HeapingParams::validate() const {
    if (mode == HeapingMode::full && !(gamma01 < gamma02)) {
        throw std::invalid_argument("heaping parameters require gamma01 < gamma02");
    }
}

double LevelProbs::operator[](HeapingLevel g) const {
    switch (g) {
    case HeapingLevel::one:
        return one;
    case HeapingLevel::five:
        return five;
    case HeapingLevel::ten:
        return ten;
    }
    return 0.0;
}

ObservedAnswer ObservedAnswer::from_report(int value, HeapingMode mode) {
    if (value < 1 || value > kTopCode) {
        throw std::invalid_argument("reported value must lie in 1..21, got " + std::to_string(value));
    }
    ObservedAnswer a;
    a.value = value;
    a.censored = value == kTopCode;
    a.feasible = a.censored ? LevelSet{} : feasible_levels(value, mode);
    return a;
}

LevelProbs heaping_probs(double z, const HeapingParams& params) {
    if (!(z > 0.0)) {
        throw std::invalid_argument("heaping_probs requires z > 0");
    }
    params.validate();
    const double lz = std::log(z);
    LevelProbs out;
    if (params.mode == HeapingMode::reduced) {
        const double eta = params.gamma01 + params.gamma1 * lz;
        out.one = expit(eta);
        out.five = expit(-eta);
        return out;
    }
    const double eta1 = params.gamma01 + params.gamma1 * lz;
    const double eta2 = params.gamma02 + params.gamma1 * lz;
    const double s1 = expit(eta1);
    const double s2 = expit(eta2);
    out.one = s1;
    // Difference of the two logistic curves, taken on whichever side avoids
    // cancellation.
    out.five = s1 > 0.5 ? expit(-eta1) - expit(-eta2) : s2 - s1;
    out.ten = expit(-eta2);
    return out;
}

int representative_integer(double z) {
    if (!(z > 0.0)) {
        throw std::invalid_argument("representative_integer requires z > 0");
    }
    if (z < 1.5) {
        return 1;
    }
    return static_cast<int>(std::floor(z + 0.5));
}

LevelProbs heaping_probs_discrete(double z, const HeapingParams& params) {
    return heaping_probs(static_cast<double>(representative_integer(z)), params);
}

bool admissible(HeapingLevel g, int zstar) {
    switch (g) {
    case HeapingLevel::one:
        return zstar >= 1;
    case HeapingLevel::five:
        return zstar == 5 || zstar == 10 || zstar == 15 || zstar == 20;
    case HeapingLevel::ten:
        return zstar == 10 || zstar == 20;
    }
    return false;
}

Interval rounding_interval(HeapingLevel g, int zstar) {
    if (!admissible(g, zstar)) {
        throw std::invalid_argument("value " + std::to_string(zstar) + " is not admissible for heaping level " +
                                    std::to_string(static_cast<int>(g)));
    }
    const double v = zstar;
    switch (g) {
    case HeapingLevel::one:
        return zstar == 1 ? Interval{0.0, 1.5} : Interval{v - 0.5, v + 0.5};
    case HeapingLevel::five:
        return {v - 2.5, v + 2.5};
    case HeapingLevel::ten:
        return {v - 5.5, v + 4.5};
    }
    return {};
}

std::vector<int> candidate_integers(HeapingLevel g, int zstar) {
    const Interval cell = rounding_interval(g, zstar);
    std::vector<int> out;
    for (int q = std::max(1, static_cast<int>(std::ceil(cell.lo))); q < cell.hi; ++q) {
        if (cell.contains(q)) {
            out.push_back(q);
        }
    }
    return out;
}

LevelSet feasible_levels(int zstar, HeapingMode mode) {
    if (zstar < 1 || zstar > kMaxReported) {
        throw std::invalid_argument("feasible_levels requires 1 <= z* <= 20, got " + std::to_string(zstar));
    }
    LevelSet set = LevelSet::of({HeapingLevel::one});
    if (admissible(HeapingLevel::five, zstar)) {
        set.insert(HeapingLevel::five);
    }
    if (mode == HeapingMode::full && admissible(HeapingLevel::ten, zstar)) {
        set.insert(HeapingLevel::ten);
    }
    return set;
}

double lowest_cell_edge(HeapingLevel g) {
    switch (g) {
    case HeapingLevel::one:
        return 0.0;
    case HeapingLevel::five:
        return 2.5;
    case HeapingLevel::ten:
        return 4.5;
    }
    return 0.0;
}

namespace {

int round_at_level(double z, HeapingLevel g) {
    if (z < lowest_cell_edge(g) || g == HeapingLevel::one) {
        return z < 1.5 ? 1 : static_cast<int>(std::floor(z + 0.5));
    }
    if (g == HeapingLevel::five) {
        return 5 * static_cast<int>(std::floor((z + 2.5) / 5.0));
    }
    return 10 * static_cast<int>(std::floor((z + 5.5) / 10.0));
}

}  // namespace

ObservedAnswer coarsen(double z, HeapingLevel g, HeapingMode mode) {
    if (!(z > 0.0)) {
        throw std::invalid_argument("coarsen requires z > 0");
    }
    if (mode == HeapingMode::reduced && g == HeapingLevel::ten) {
        throw std::invalid_argument("reduced heaping mode has no level 10");
    }
    // Very large values would overflow the integer conversion; they are
    // censored under every level anyway.
    const int rounded = z > 1e6 ? kTopCode : round_at_level(z, g);
    ObservedAnswer out;
    if (rounded > kMaxReported) {
        out.value = kTopCode;
        out.censored = true;
        return out;
    }
    out.value = rounded;
    out.feasible = feasible_levels(rounded, mode);
    return out;
}

int report_for_cell(int q, HeapingLevel g) {
    if (q < 1) {
        throw std::invalid_argument("integer cells start at q = 1");
    }
    if (q > kLastCell) {
        return kTopCode;
    }
    return coarsen(static_cast<double>(q), g).value;
}

}  // namespace heapsae
