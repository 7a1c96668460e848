#include "cbrl/rng.hpp"

#include <cmath>
#include <numbers>

namespace cbrl {

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t t : tags) {
        h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    }
    return h;
}

double Rng::normal() noexcept {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    // 1 - u lies in (0, 1], so the log is finite
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
}

std::size_t Rng::categorical(std::span<const double> cdf) noexcept {
    const double u = uniform();
    for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
        if (u < cdf[i]) return i;
    }
    return cdf.size() - 1;
}

} // namespace cbrl
