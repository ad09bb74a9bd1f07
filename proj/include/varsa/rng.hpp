#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace varsa {

/// SplitMix64 finalizer. Used to turn structured (seed, index) pairs into
/// well-mixed Philox keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/**
 * Philox4x32-10 counter-based generator (Salmon et al., SC'11).
 *
 * A stream is identified by a 64-bit key and a 64-bit stream id; the
 * remaining 64 bits of the 128-bit counter index blocks within the stream.
 * Two generators with distinct (key, stream) pairs never share a block, so
 * streams can be created in any order without coordination.
 *
 * Satisfies UniformRandomBitGenerator with 64-bit output.
 */
class Philox4x32
{
  public:
    using result_type = std::uint64_t;

    constexpr Philox4x32() noexcept : Philox4x32(0, 0) {}

    constexpr Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream),
                   static_cast<std::uint32_t>(stream >> 32)}
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept
    {
        if (used_ == 2) {
            refill();
        }
        return buffer_[used_++];
    }

    /// Child stream keyed by this stream's identity and `child`. The child is
    /// a pure function of (key, stream, child), independent of how many
    /// values the parent has already produced.
    [[nodiscard]] Philox4x32 split(std::uint64_t child) const noexcept
    {
        std::uint64_t const key = (std::uint64_t{key_[1]} << 32) | key_[0];
        std::uint64_t const stream = (std::uint64_t{counter_[3]} << 32) | counter_[2];
        return Philox4x32(mix64(key ^ mix64(stream + 0x632be59bd9b4e019ull)), child);
    }

    /// Advance by `blocks` 128-bit blocks.
    void discard_blocks(std::uint64_t blocks) noexcept
    {
        std::uint64_t lo = (std::uint64_t{counter_[1]} << 32) | counter_[0];
        lo += blocks;
        counter_[0] = static_cast<std::uint32_t>(lo);
        counter_[1] = static_cast<std::uint32_t>(lo >> 32);
        used_ = 2;
    }

    /// Raw Philox4x32-10 bijection, exposed for known-answer tests.
    static constexpr std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                                        std::array<std::uint32_t, 2> key) noexcept
    {
        std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
#pragma GCC unroll 10
        for (int round = 0; round < 10; ++round) {
            std::uint64_t const p0 = std::uint64_t{kMul0} * c0;
            std::uint64_t const p1 = std::uint64_t{kMul1} * c2;
            std::uint32_t const n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            std::uint32_t const n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            c1 = static_cast<std::uint32_t>(p1);
            c3 = static_cast<std::uint32_t>(p0);
            c0 = n0;
            c2 = n2;
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return {c0, c1, c2, c3};
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

    void refill() noexcept
    {
        auto const out = block(counter_, key_);
        buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        used_ = 0;
        if (++counter_[0] == 0) {
            ++counter_[1];
        }
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint64_t, 2> buffer_{};
    int used_ = 2;
};

using Rng = Philox4x32;

/// Stream for replication `index` of a study seeded with `master_seed`.
inline Rng replication_stream(std::uint64_t master_seed, std::uint64_t index) noexcept
{
    return Rng(mix64(master_seed), index);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) noexcept
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (ziggurat, via Boost.Random).
inline double standard_normal(Rng& rng)
{
    // The Boost ziggurat keeps no state between calls.
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

} // namespace varsa
