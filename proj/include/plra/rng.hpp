#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace plra {

// Counter-based pseudorandom stream (splitmix64 core). All draws are pure
// 64-bit integer arithmetic, so a given seed produces the same sequence on
// every platform. One stream per logical task; streams never share state.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    // [0, 1), 53-bit resolution.
    double uniform01();

    // [lo, hi).
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; consumes two u64 draws per value.
    double normal();

    bool bernoulli(double p);

    // [0, n), unbiased (Lemire rejection).
    uint64_t uniform_int(uint64_t n);

    // Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n);

private:
    uint64_t state_;
};

// Mixes (root, tag, a, b) into a fresh seed. Used to derive independent
// per-step / per-matchup / per-child streams from one root seed without
// any shared mutable rng state.
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

// FNV-1a over a byte string; stable helper for hashing ids into seeds.
uint64_t fnv1a(std::string_view bytes);

}  // namespace plra
