#pragma once

#include <cmath>
#include <cstdint>

namespace fxc::detail {

// splitmix64; fully pinned so artifacts are byte-identical across platforms.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    splitmix64(s);
    return s;
}

// Uniform in (0, 1]; never returns 0 so it is safe inside log().
inline double uniform01(uint64_t& state) {
    return (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
}

struct GaussianPair {
    double g1, g2;
};

inline GaussianPair gaussian_pair(uint64_t& state) {
    const double u1 = uniform01(state);
    const double u2 = uniform01(state);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

}  // namespace fxc::detail
