#pragma once

// Algebra of the reporting process: heaping-level probabilities, rounding
// cells, feasible level sets and the coarsening map with top-coding at 21.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace heapsae {

inline constexpr int kMaxReported = 20;
inline constexpr int kTopCode = 21;
/// Integer cells I_1(q), q = 1..kLastCell, carry every latent value that can
/// still be reported below the top code. Values >= kLastCell + 0.5 are always
/// censored.
inline constexpr int kLastCell = 24;

enum class HeapingMode { reduced, full };
enum class HeapingLevel : int { one = 1, five = 5, ten = 10 };

inline constexpr std::array<HeapingLevel, 3> kAllLevels{HeapingLevel::one, HeapingLevel::five,
                                                        HeapingLevel::ten};

int level_index(HeapingLevel g);
std::string to_string(HeapingMode mode);
HeapingMode heaping_mode_from_string(const std::string& name);

/// Small set over {1, 5, 10}.
class LevelSet {
public:
    constexpr LevelSet() = default;
    static LevelSet of(std::initializer_list<HeapingLevel> levels);

    bool contains(HeapingLevel g) const { return (bits_ >> level_index(g)) & 1u; }
    void insert(HeapingLevel g) { bits_ |= static_cast<std::uint8_t>(1u << level_index(g)); }
    bool empty() const { return bits_ == 0; }
    std::vector<HeapingLevel> levels() const;
    bool operator==(const LevelSet&) const = default;

private:
    std::uint8_t bits_ = 0;
};

/// Proportional-odds heaping parameters. In reduced mode only gamma01 (read as
/// gamma0) and gamma1 are used; gamma02 is ignored.
struct HeapingParams {
    HeapingMode mode = HeapingMode::full;
    double gamma01 = 0.0;
    double gamma02 = 0.0;
    double gamma1 = 0.0;

    static HeapingParams reduced(double gamma0, double gamma1);
    /// Throws std::invalid_argument unless gamma01 < gamma02.
    static HeapingParams full(double gamma01, double gamma02, double gamma1);

    void validate() const;
};

struct LevelProbs {
    double one = 0.0;
    double five = 0.0;
    double ten = 0.0;

    double operator[](HeapingLevel g) const;
};

struct ObservedAnswer {
    int value = 1;
    bool censored = false;
    LevelSet feasible;

    /// Builds the answer implied by a reported value in {1..21}.
    static ObservedAnswer from_report(int value, HeapingMode mode = HeapingMode::full);
};

/// Half-open cell [lo, hi); the first integer cell is open at 0.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double z) const { return lo == 0.0 ? (z > 0.0 && z < hi) : (z >= lo && z < hi); }
};

LevelProbs heaping_probs(double z, const HeapingParams& params);
/// Probabilities held constant over each integer cell I_1(q), q >= 1.
LevelProbs heaping_probs_discrete(double z, const HeapingParams& params);

/// The q with z in I_1(q); values below 1.5 map to q = 1.
int representative_integer(double z);

bool admissible(HeapingLevel g, int zstar);
Interval rounding_interval(HeapingLevel g, int zstar);
std::vector<int> candidate_integers(HeapingLevel g, int zstar);
LevelSet feasible_levels(int zstar, HeapingMode mode = HeapingMode::full);

/// Lower edge of the first admissible cell of level g. A latent value below it
/// cannot be heaped at g and is reported at integer precision instead.
double lowest_cell_edge(HeapingLevel g);

ObservedAnswer coarsen(double z, HeapingLevel g, HeapingMode mode = HeapingMode::full);

/// Reported value (1..21) for latent values in the integer cell I_1(q),
/// q >= 1, under level g. Cells past kLastCell are always censored.
int report_for_cell(int q, HeapingLevel g);

}  // namespace heapsae
