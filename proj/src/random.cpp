#include "tmcc/random.hpp"

#include <cmath>

namespace tmcc {

double SeedStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeedStream::uniform_open() {
    double u = 0.0;
    do {
        u = uniform();
    } while (u == 0.0);
    return u;
}

double SeedStream::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    double x = 0.0, y = 0.0, s = 0.0;
    do {
        x = 2.0 * uniform() - 1.0;
        y = 2.0 * uniform() - 1.0;
        s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = y * f;
    has_cached_ = true;
    return x * f;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace tmcc
