#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace appsess {

// Deterministic RNG used everywhere randomness is needed. All draws are
// built from raw mt19937_64 output so results are identical across
// platforms and standard-library implementations (std::*_distribution is
// not pinned by the standard).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1) with 53 bits of randomness.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t n);

    std::int64_t uniform_i64(std::int64_t lo, std::int64_t hi); // inclusive range

    // Index into a cumulative-weight table (last entry = total mass).
    std::size_t pick_cumulative(std::span<const double> cumweights);

    // Box-Muller, no cached spare so call sequences stay reproducible.
    double normal(double mean = 0.0, double stddev = 1.0);

    // Chunked Knuth sampler, safe for large lambda.
    std::int64_t poisson(double lambda);

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Uniform random permutation of [0, n).
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 gen_;
};

// Labeled seed derivation: one root seed fans out to per-module,
// per-fold, per-restart streams without correlation.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t a);
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t a,
                          std::uint64_t b);

// FNV-1a over arbitrary bytes; used for config hashing and id-stable seeds.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace appsess
