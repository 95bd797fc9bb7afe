#include "cobench/rng.hpp"

#include <cmath>
#include <numbers>

namespace cobench {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

} // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
        s += kGolden;
        word = mix64(s);
    }
}

SeededRng SeededRng::derive(std::uint64_t tag) const { return SeededRng(mix64(seed_ ^ mix64(tag + kGolden))); }

SeededRng SeededRng::derive(std::string_view tag) const { return derive(fnv1a64(tag)); }

std::uint64_t SeededRng::next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double SeededRng::next_double() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform(double lo, double hi) noexcept {
    const double u = next_double();
    if (!(hi > lo)) return lo;
    const double v = lo + (hi - lo) * u;
    return v < hi ? v : std::nextafter(hi, lo);
}

long long SeededRng::uniform_int(long long lo, long long hi) noexcept {
    if (hi <= lo) return lo;
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<long long>(next_u64());
    // Reject the top partial bucket so every value is equally likely.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range + 1) % range;
    std::uint64_t x = next_u64();
    while (x > limit) x = next_u64();
    return lo + static_cast<long long>(x % range);
}

double SeededRng::normal(double mean, double stddev) noexcept {
    const double u1 = 1.0 - next_double(); // (0, 1]
    const double u2 = next_double();
    if (stddev == 0.0) return mean;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
}

long long SeededRng::poisson(double mean) noexcept {
    if (!(mean > 0.0)) return 0;
    if (mean >= 500.0) {
        const double x = normal(mean, std::sqrt(mean));
        return x <= 0.0 ? 0 : std::llround(x);
    }
    const double u = next_double();
    double p = std::exp(-mean);
    double cdf = p;
    long long k = 0;
    while (u >= cdf) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
        if (p == 0.0 && cdf <= u) break; // guards against cdf stalling below u by rounding
    }
    return k;
}

} // namespace cobench
