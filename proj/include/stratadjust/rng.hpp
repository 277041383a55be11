#pragma once

#include <cstdint>
#include <random>

namespace stratadjust {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent seed streams from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic stream derivation: mix(base, a, b) gives an independent seed
// for (replication a, component b). Counter-based, so replications can be
// dispatched to worker threads in any order without sharing generator state.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = base;
    std::uint64_t h = splitmix64(s);
    s ^= a + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return splitmix64(s);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double runif(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double rnorm(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double rbeta(Rng& rng, double alpha, double beta) {
    std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
    double x = ga(rng), y = gb(rng);
    return x / (x + y);
}

// Index into cumulative probabilities; probs must sum to 1.
inline int rdiscrete(Rng& rng, const std::vector<double>& probs) {
    double u = runif(rng), acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace stratadjust
