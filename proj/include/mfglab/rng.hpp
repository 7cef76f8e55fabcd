#pragma once

#include <cmath>
#include <cstdint>

namespace mfglab {

// Counter-free splittable generator. Streams are derived by hashing a root
// seed with stream labels, so (root, labels...) -> bit-identical sequences
// regardless of scheduling.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1], safe for log()
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }
};

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return hash_mix(hash_mix(hash_mix(root, a), b), c);
}

// Box-Muller on top of SplitMix64.
struct GaussianStream {
    SplitMix64 sm;
    bool have_spare = false;
    double spare = 0.0;

    explicit GaussianStream(std::uint64_t seed) : sm(seed) {}

    double next() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        static const double two_pi = 6.283185307179586476925286766559;
        const double u1 = sm.uniform_pos();
        const double u2 = sm.uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare = r * std::sin(two_pi * u2);
        have_spare = true;
        return r * std::cos(two_pi * u2);
    }
};

}  // namespace mfglab
