#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "scaleup/errors.hpp"

// Reproducible randomness.  Every stochastic component draws from a named
// stream derived from (master seed, tag, index), so adding a consumer or
// reordering independent stages never perturbs the draws of another stage,
// and per-chain / per-replicate streams stay identical no matter how the
// work is scheduled across threads.

namespace scaleup {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t fnv1a64(std::string_view s,
                                       std::uint64_t h = 1469598103934665603ULL) {
    for (char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(tag);
    for (int b = 0; b < 8; ++b) {
        h ^= (seed >> (8 * b)) & 0xffULL;
        h *= 1099511628211ULL;
    }
    for (int b = 0; b < 8; ++b) {
        h ^= (index >> (8 * b)) & 0xffULL;
        h *= 1099511628211ULL;
    }
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    const std::uint64_t h = mix_seed(seed, tag, index);
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

inline double runif(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double runif(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double rnorm(Rng& rng, double mu = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mu, sd)(rng);
}

inline double rgamma(Rng& rng, double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0) throw ModelError("rgamma needs positive shape and scale");
    return std::gamma_distribution<double>(shape, scale)(rng);
}

inline double rbeta(Rng& rng, double a, double b) {
    const double x = rgamma(rng, a, 1.0);
    const double y = rgamma(rng, b, 1.0);
    return x / (x + y);
}

inline long long rbinom(Rng& rng, long long trials, double p) {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    return std::binomial_distribution<long long>(trials, p)(rng);
}

inline long long rpois(Rng& rng, double lambda) {
    if (lambda <= 0.0) return 0;
    return std::poisson_distribution<long long>(lambda)(rng);
}

inline int runif_int(Rng& rng, int lo, int hi) { // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Partial Fisher-Yates: k distinct values from {0, ..., n-1}, in draw order.
inline std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
    if (k > n || k < 0) throw ModelError("sample_without_replacement: k out of range");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
        const int j = std::uniform_int_distribution<int>(i, n - 1)(rng);
        std::swap(pool[i], pool[j]);
        out[i] = pool[i];
    }
    return out;
}

inline unsigned hardware_threads() {
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1u : h;
}

// Runs fn(i) for i in [0, count).  Work is split into contiguous blocks, one
// per thread; each call must touch only its own output slot, so the result
// is identical for every thread count (including 1).
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = hardware_threads();
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(used);
    const std::size_t chunk = (count + used - 1) / used;
    for (unsigned t = 0; t < used; ++t) {
        const std::size_t lo = static_cast<std::size_t>(t) * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn]() {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace scaleup
