#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace rcm {

// splitmix64 finalizer. Every derived seed and every per-edge uniform in the
// library goes through this function.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// seed' = mix(seed, i): replica and stream derivation.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream ^ 0x5851f42d4c957f2dULL));
}

constexpr std::uint64_t tag_hash(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) { return mix_seed(seed, tag_hash(tag)); }

// Top 53 bits, shifted to the open interval (0,1).
constexpr double to_unit_open(std::uint64_t x) { return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53; }

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}

    std::uint64_t bits() { return eng_(); }
    double uniform() { return to_unit_open(eng_()); }
    double exponential(double rate) { return -std::log(uniform()) / rate; }
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace rcm
