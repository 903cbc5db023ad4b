#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <vector>

namespace mvmc {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
/// Maps a 128-bit counter under a 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Order-dependent hash of a sequence of 64-bit words; used to build stream tags.
std::uint64_t stream_tag(std::initializer_list<std::uint64_t> words);

/// A reproducible stream of random draws addressed by (seed, tag).
///
/// The draw with index k of stream (seed, tag) depends on nothing else, so two
/// streams with distinct tags never share state and may be consumed in any
/// order or on any thread.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t tag);

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double low, double high) { return low + (high - low) * uniform(); }
    /// Standard normal (Box-Muller, both outputs consumed).
    double normal();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t tag_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

enum class StreamRole : std::uint64_t {
    initial_state = 0x1,
    increments = 0x2,
};

/// The randomness of one particle-system realization: P independently
/// addressable sub-streams, one per particle.
///
/// Wiener increments are always drawn at `base_steps` resolution; simulations
/// at a coarser step count sum consecutive blocks, so a fine system and any
/// coarse system built from the same sub-streams share Brownian paths.
class RandomBlock {
public:
    RandomBlock(std::uint64_t seed, std::uint64_t tag, std::size_t size, std::size_t base_steps);

    std::size_t size() const { return size_; }
    std::size_t base_steps() const { return base_steps_; }

    /// Sub-streams [first, first + count) as a standalone block.
    RandomBlock subrange(std::size_t first, std::size_t count) const;
    /// Block whose p-th sub-stream is this block's order[p]-th.
    RandomBlock permuted(const std::vector<std::size_t>& order) const;

    RandomStream stream(std::size_t p, StreamRole role) const;

private:
    std::size_t global_index(std::size_t p) const;

    std::uint64_t seed_;
    std::uint64_t tag_;
    std::size_t size_;
    std::size_t base_steps_;
    std::size_t offset_ = 0;
    std::shared_ptr<const std::vector<std::size_t>> order_;
};

}  // namespace mvmc
