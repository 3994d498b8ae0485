#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace lfb {

// splitmix64 finalizer: one mix per draw, so a (seed, counter) pair fully
// determines every value ever produced. No hidden state beyond the counter.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed, used to namespace per-fold / per-class
// randomness off one top-level seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x517cc1b727220a95ull));
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return splitmix64(seed_ + 0x2545f4914f6cdd1dull * ++counter_); }

    // Uniform in [0, 1): top 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [-bound, bound].
    double uniform_symmetric(double bound) { return (2.0 * uniform() - 1.0) * bound; }

    // Uniform integer in [0, n). Modulo bias is irrelevant here; determinism
    // is the contract.
    std::uint64_t uniform_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    // Standard normal via Box-Muller; every draw consumes exactly two counters.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace lfb
