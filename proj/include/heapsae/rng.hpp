#pragma once

// Counter-based random streams. Every random quantity in the library is drawn
// from a Philox4x32-10 stream whose key is the user seed and whose counter
// carries a stream id derived from a tuple of integers (chain, domain, draw,
// unit, ...). Results therefore never depend on worker count or scheduling.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace heapsae {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Combines an ordered list of integers into one 64-bit stream id.
std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts);

/// UniformRandomBitGenerator over one Philox stream.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t seed, std::uint64_t id);
    Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> parts)
        : Stream(seed, stream_id(parts)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    double normal();
    /// Jumps to the start of counter block `block` (four 32-bit words).
    void seek(std::uint64_t block);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t id_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
};

}  // namespace heapsae
