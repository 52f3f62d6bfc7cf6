#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace aimdmf {

/// Counter-based random stream.
///
/// Generator: Philox4x32-10 (Salmon et al., Random123). A stream is addressed
/// by a 64-bit key derived from (root seed, hierarchical path) with a SplitMix64
/// absorb chain; the i-th 128-bit block is Philox(key, counter = i). The output
/// therefore depends only on (root, path, draw index), never on thread layout.
///
/// Paths used by the library, by convention:
///   {experiment, replicate, class, particle}        particle system
///   {experiment, 0, class, member}                  mean-field ensemble
///   {experiment, replicate}                         single connection / chain
class Stream {
public:
    using Block = std::array<std::uint32_t, 4>;

    Stream(std::uint64_t root, std::initializer_list<std::uint64_t> path);

    /// Raw Philox4x32-10 block for a (counter, key) pair, exposed for known-answer tests.
    static Block philox(Block counter, std::array<std::uint32_t, 2> key);

    std::uint64_t next_u64();
    /// Uniform on (0, 1]; never returns 0.
    double uniform_open0();
    /// Uniform on [0, 1).
    double uniform();

    /// Restart from draw 0 (Picard iterations replay the same stream).
    void rewind() noexcept { counter_ = 0; buffered_ = 0; }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t position() const noexcept { return 2 * counter_ - buffered_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t buffer_ = 0;
    int buffered_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace aimdmf
