#pragma once

#include <cmath>
#include <cstdint>

namespace tcnot::rng {

// SplitMix64 finalizer (Stafford mix 13). Bijective on uint64 with full
// avalanche; the workhorse behind key derivation and the counter streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives a stream key from a run seed plus up to three subscripts
// (module tag, point index, realization/bond index). Distinct tuples give
// independent streams, so parallel realizations can draw their own
// randomness without sharing state.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t k = mix64(seed + 0x9e3779b97f4a7c15ull);
    k = mix64(k ^ a);
    k = mix64(k ^ b);
    k = mix64(k ^ c);
    return k;
}

// Stream tags, one per consumer, so identical indices in different modules
// never alias.
enum StreamTag : std::uint64_t {
    kDisorder2D = 1,
    kDisorder3D = 2,
    kChain2D = 3,
    kChain3D = 4,
    kDecoderShots = 5,
    kBootstrap = 6,
    kInit = 7,
};

// Counter-based generator: output n is mix64(key + n*phi). There is no
// sequential hidden state beyond the counter, so streams are cheap to
// construct, splittable and reproducible.
class Stream {
public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix64(state_);
    }

    // uniform in [0, 1) with 53-bit resolution
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return u01() < p; }

    // uniform integer in [0, n) via 128-bit multiply (bias-free for n << 2^64)
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    int pm1() { return (next_u64() >> 63) ? 1 : -1; }

    // standard normal, Box-Muller with cached second value
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = u01(), u2 = u01();
        while (u1 <= 0.0) u1 = u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace tcnot::rng
