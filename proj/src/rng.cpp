#include "plra/rng.hpp"

#include <cmath>
#include <numbers>

namespace plra {

namespace {

inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t RngStream::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

double RngStream::normal() {
    // u1 in (0,1] so log never sees zero.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool RngStream::bernoulli(double p) {
    return uniform01() < p;
}

uint64_t RngStream::uniform_int(uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    // Lemire's multiply-shift with rejection on the low product half.
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < n) {
        const uint64_t threshold = (0 - n) % n;
        while (lo < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            lo = static_cast<uint64_t>(m);
        }
    }
    return static_cast<uint64_t>(m >> 64);
}

std::vector<int> RngStream::permutation(int n) {
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        out[static_cast<size_t>(i)] = i;
    }
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(uniform_int(static_cast<uint64_t>(i) + 1));
        std::swap(out[static_cast<size_t>(i)], out[static_cast<size_t>(j)]);
    }
    return out;
}

uint64_t fnv1a(std::string_view bytes) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a, uint64_t b) {
    uint64_t h = fnv1a(tag);
    h = mix64(h ^ (root + 0x9E3779B97F4A7C15ULL));
    h = mix64(h ^ (a + 0xD1B54A32D192ED03ULL));
    h = mix64(h ^ (b + 0x8CB92BA72F3D8DD7ULL));
    return h;
}

}  // namespace plra
