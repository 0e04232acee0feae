#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace gorp {

/// Deterministic RNG used everywhere seeds matter. The raw stream is
/// mt19937_64 (bit-exact per the standard); the uniform/gauss transforms are
/// our own so results do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller with a cached spare.
    double gauss();

    /// Unbiased integer in [0, n) by rejection; n must be > 0.
    std::size_t below(std::size_t n);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent sub-seed from (seed, stream) via splitmix64.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace gorp
