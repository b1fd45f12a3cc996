#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace kjm {

/// Mixes a seed with stream identifiers (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0);

/// Seeded generator whose distributions are implemented here rather than
/// delegated to the standard library, so draws are identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal (Box-Muller, cached pair).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace kjm
