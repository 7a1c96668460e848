#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace cbrl {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a stream seed from a base seed and a path of tags, e.g.
/// (seed, purpose, run, method). Different tag paths give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept;

/// Name of the generator algorithm, recorded in output metadata.
inline constexpr const char* kRngAlgorithm =
    "mt19937_64 seeded by splitmix64(seed, tags); uniform = top 53 bits * 2^-53; normal = Box-Muller";

/**
Project-wide random source.

All variates are derived from raw 64-bit mt19937_64 outputs with fixed
formulas, so streams are bit-reproducible across standard libraries (the
std:: distribution classes are implementation-defined and are not used).
*/
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() noexcept {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [a, b).
    double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    /// Inverse-CDF categorical draw; `cdf` is nondecreasing with last entry 1.
    /// Returns a 0-based index.
    std::size_t categorical(std::span<const double> cdf) noexcept;

  private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

} // namespace cbrl
