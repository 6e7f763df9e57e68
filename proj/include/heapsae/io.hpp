#pragma once

// Sample and frame files. Domains are 1-based in files and 0-based in memory.
//
// Sample: columns domain, x1..xp, optional w (0/1) and zstar (1..21, empty
// for non-participants). Without a w column every row is a participant.
// Frame: domain, x1..xp per population unit, or with a count column one row
// per (domain, pattern).

#include "heapsae/model.hpp"
#include "heapsae/predictor.hpp"

#include <string>
#include <vector>

namespace heapsae {

struct SampleFile {
    std::vector<std::string> covariates;
    std::vector<UnitRecord> records;
    /// A w column was present.
    bool has_w = false;

    bool any_nonparticipant() const;
    std::vector<UnitRecord> participants() const;
    int max_domain() const;
};

SampleFile read_sample(const std::string& path, HeapingMode mode = HeapingMode::full);
void write_sample(const std::string& path, const std::vector<std::string>& covariates,
                  const std::vector<UnitRecord>& records);

struct FrameFile {
    std::vector<std::string> covariates;
    PopulationFrame frame;
};

FrameFile read_frame(const std::string& path);
void write_frame(const std::string& path, const std::vector<std::string>& covariates, const PopulationFrame& frame);

/// Throws DataError unless the sample fits the frame: same covariate names
/// and every sampled domain present in the frame.
void check_sample_against_frame(const SampleFile& sample, const FrameFile& frame, const std::string& sample_path,
                                const std::string& frame_path);

}  // namespace heapsae
