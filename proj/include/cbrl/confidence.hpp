#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace cbrl {

/// Radii at or above this many bits are treated as the full simplex.
inline constexpr double kUnboundedEpsBits = 1e6;

inline bool is_unbounded_radius(double eps_bits) noexcept { return !(eps_bits < kUnboundedEpsBits); }

/**
KL radius (in bits) of the confidence set of context distributions,

    eps = ( |C| log2(n + 1) - log2(1 - beta) ) / n,

which covers the true distribution with probability at least beta and is
nested in beta. beta = 1 yields +infinity (the whole simplex).

Throws InputError("confidence level out of range") unless 0 < beta <= 1.
*/
double epsilon_bits(std::uint64_t n, std::uint64_t num_contexts, double beta);

/// D(phat || p) in bits, with 0 log(0/q) = 0; +infinity if p has a zero where phat does not.
double kl_bits(std::span<const double> phat, std::span<const double> p);

struct ConfidenceParams {
    double beta;
    std::uint64_t n;
    std::uint64_t num_contexts;
    double eps_bits;

    static ConfidenceParams make(double beta, std::uint64_t n, std::uint64_t num_contexts) {
        return {beta, n, num_contexts, epsilon_bits(n, num_contexts, beta)};
    }
};

/// True iff p lies in the KL ball of radius params.eps_bits around phat.
bool contains(const ConfidenceParams& params, std::span<const double> phat, std::span<const double> p);

/**
Fraction of `trials` multinomial draws of size n from p_true whose empirical
frequencies yield a confidence set containing p_true. Each trial uses its own
stream derived from (seed, trial), so the result is independent of evaluation
order.
*/
double simulate_coverage(std::span<const double> p_true, std::uint64_t n, double beta, std::uint64_t trials,
                         std::uint64_t seed);

} // namespace cbrl
