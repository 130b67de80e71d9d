#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cyd {

using Complex = std::complex<double>;

/// Bad input detected before any numerical work (maps to CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: divergence, non-PD matrices, root-solver exhaustion
/// (maps to CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point cannot be represented in its selected chart (|dQ/dz_b| too small).
class ChartError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Child seed for a named stage and an index. All randomness in the library
/// flows through this so any stage can be reproduced in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(seed ^ hash_label(label)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-style stream: a SplitMix64 sequence started at a derived key.
/// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t key) noexcept : state_(key) {}
    Stream(std::uint64_t seed, std::string_view label, std::uint64_t index) noexcept
        : state_(derive_seed(seed, label, index)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal by Box-Muller; no cached state so draws are positional.
    double normal() noexcept;

    std::size_t below(std::size_t n) noexcept {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Parallel helpers
// ---------------------------------------------------------------------------

/// Number of worker threads used by the library (0 = hardware concurrency).
void set_thread_count(unsigned n) noexcept;
unsigned thread_count() noexcept;

/// Runs body(begin, end) over fixed-size chunks of [0, n). Chunk boundaries
/// depend only on n and chunk, never on the thread count, so callers that
/// write per-chunk partials and reduce them in chunk order are deterministic.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) noexcept {
    return chunk == 0 ? 0 : (n + chunk - 1) / chunk;
}

}  // namespace cyd
