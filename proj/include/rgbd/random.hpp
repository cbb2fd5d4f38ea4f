#pragma once

#include <cstdint>
#include <random>

namespace rgbd {

/// Seedable generator used everywhere randomness is needed.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Streams are split by feeding (seed, stream) through
/// std::seed_seq, whose mixing algorithm is also standardised, so a given
/// (seed, stream) pair reproduces the same draws on every conforming
/// toolchain. Distributions are implemented here rather than taken from
/// <random> because the standard leaves their algorithms unspecified.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t index(std::uint64_t n);

    /// Standard normal via a 128-layer ziggurat.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace rgbd
