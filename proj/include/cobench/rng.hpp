#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace cobench {

// Portable seeded generator.
//
// Core: xoshiro256** (Blackman & Vigna), state initialised from the 64-bit seed
// by four successive splitmix64 outputs. Integer arithmetic only, up to the
// final conversion to double; results are bit-identical across platforms.
//
// Streams:
//   derive(tag)   child seed = mix64(seed ^ mix64(tag + 0x9E3779B97F4A7C15)),
//                 where mix64 is the splitmix64 finaliser. String tags are
//                 first hashed with 64-bit FNV-1a. A child depends only on the
//                 parent *seed*, never on how many numbers the parent produced,
//                 so per-image streams are independent of processing order.
//
// Draws:
//   next_double   (next_u64() >> 11) * 2^-53, in [0, 1)
//   uniform       lo + (hi - lo) * next_double, in [lo, hi) (lo when lo == hi)
//   uniform_int   inclusive range, unbiased (rejection on the 64-bit output)
//   normal        Box-Muller, cosine branch; consumes exactly two uniforms
//   poisson       inversion (sequential search) for mean < 500, otherwise
//                 round(max(0, normal(mean, sqrt(mean))))
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    SeededRng derive(std::uint64_t tag) const;
    SeededRng derive(std::string_view tag) const;

    std::uint64_t next_u64() noexcept;
    double next_double() noexcept;
    double uniform(double lo, double hi) noexcept;
    long long uniform_int(long long lo, long long hi) noexcept;
    double normal(double mean, double stddev) noexcept;
    long long poisson(double mean) noexcept;

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

} // namespace cobench
