#include "appsess/rng.hpp"

#include <cmath>
#include <numbers>

#include "appsess/error.hpp"

namespace appsess {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw ValidationError("uniform_int: n must be > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

std::int64_t Rng::uniform_i64(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw ValidationError("uniform_i64: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform_int(span));
}

std::size_t Rng::pick_cumulative(std::span<const double> cumweights) {
    const double total = cumweights.back();
    const double u = uniform01() * total;
    std::size_t lo = 0, hi = cumweights.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (cumweights[mid] <= u)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

double Rng::normal(double mean, double stddev) {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::poisson(double lambda) {
    if (lambda < 0.0) throw ValidationError("poisson: lambda must be >= 0");
    std::int64_t total = 0;
    // Knuth's product method underflows for large lambda; split into chunks.
    while (lambda > 0.0) {
        const double chunk = lambda > 30.0 ? 30.0 : lambda;
        lambda -= chunk;
        const double limit = std::exp(-chunk);
        double p = 1.0;
        std::int64_t k = 0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        total += k - 1;
    }
    return total;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    return splitmix64(root ^ splitmix64(fnv1a64(label)));
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t a) {
    return splitmix64(derive_seed(root, label) ^ splitmix64(a + 0x1234abcdULL));
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t a,
                          std::uint64_t b) {
    return splitmix64(derive_seed(root, label, a) ^ splitmix64(b + 0x9876ef01ULL));
}

} // namespace appsess
