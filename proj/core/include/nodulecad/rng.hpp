#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace nodulecad {

/// Mixes a base seed with a stream index (splitmix64 finalizer). Used to give
/// every pipeline stage and every forest tree its own independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic random source. Only the engine comes from the standard
/// library; the distributions are implemented here so that output is
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t below(std::size_t n);

    /// Standard normal deviate (Box-Muller, no caching).
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nodulecad
