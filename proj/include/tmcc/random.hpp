#pragma once

#include <cstdint>
#include <random>

namespace tmcc {

/// Seeded random stream with platform-independent draws.
///
/// The standard <random> distributions are implementation-defined, so only
/// the raw std::mt19937_64 output is used and every distribution is built
/// here on top of it:
///   uniform   53 high bits of one engine word, mapped to [0, 1)
///   normal    Marsaglia polar method (second variate cached)
///   poisson   see expfam::sample
class SeedStream {
public:
    explicit SeedStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on the open interval (0, 1).
    double uniform_open();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// Derives an independent-looking child seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace tmcc
