#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gps {

// All randomness in the project flows from a single configured seed.
// Sub-streams are derived with splitmix64 over a tag so that components
// (graph generation, parameter init, Gumbel draws, splits, ...) stay
// independent and reproducible regardless of call order.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = base;
    for (char c : tag) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return splitmix64(h ^ index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return uni_(gen_); }                       // in [0,1)
    double uniform_open() {                                       // in (0,1)
        double u;
        do { u = uni_(gen_); } while (u <= 0.0);
        return u;
    }
    double normal() { return norm_(gen_); }
    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next_u64() { return gen_(); }
    // integer in [0, n)
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> d(0, n - 1);
        return d(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace gps
