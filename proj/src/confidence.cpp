#include "cbrl/confidence.hpp"

#include <cmath>
#include <vector>

#include "cbrl/error.hpp"
#include "cbrl/rng.hpp"

namespace cbrl {

namespace {

void check_simplex(std::span<const double> p, const char* what) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw InputError(std::string(what) + " has a negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError(std::string(what) + " does not sum to 1");
}

} // namespace

double epsilon_bits(std::uint64_t n, std::uint64_t num_contexts, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InputError("confidence level out of range");
    if (n < 1) throw InputError("sample count must be positive");
    if (num_contexts < 1) throw InputError("context count must be positive");
    if (beta == 1.0) return std::numeric_limits<double>::infinity();
    const double nd = static_cast<double>(n);
    return (static_cast<double>(num_contexts) * std::log2(nd + 1.0) - std::log2(1.0 - beta)) / nd;
}

double kl_bits(std::span<const double> phat, std::span<const double> p) {
    if (phat.size() != p.size()) throw InputError("distribution length mismatch");
    check_simplex(phat, "phat");
    check_simplex(p, "p");
    double d = 0.0;
    for (std::size_t c = 0; c < phat.size(); ++c) {
        if (phat[c] == 0.0) continue;
        if (p[c] == 0.0) return std::numeric_limits<double>::infinity();
        d += phat[c] * std::log2(phat[c] / p[c]);
    }
    // round-off can push the sum slightly below zero
    return d < 0.0 ? 0.0 : d;
}

bool contains(const ConfidenceParams& params, std::span<const double> phat, std::span<const double> p) {
    const double d = kl_bits(phat, p);
    if (is_unbounded_radius(params.eps_bits)) return true;
    return d <= params.eps_bits;
}

double simulate_coverage(std::span<const double> p_true, std::uint64_t n, double beta, std::uint64_t trials,
                         std::uint64_t seed) {
    check_simplex(p_true, "p_true");
    for (double v : p_true) {
        if (!(v > 0.0)) throw InputError("p_true must be strictly positive");
    }
    if (trials < 1) throw InputError("trials must be positive");
    const auto params = ConfidenceParams::make(beta, n, p_true.size());

    std::vector<double> cdf(p_true.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < p_true.size(); ++c) {
        acc += p_true[c];
        cdf[c] = acc;
    }
    cdf.back() = 1.0;

    std::vector<std::uint64_t> counts(p_true.size());
    std::vector<double> phat(p_true.size());
    std::uint64_t covered = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, {t}));
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint64_t i = 0; i < n; ++i) ++counts[rng.categorical(cdf)];
        for (std::size_t c = 0; c < counts.size(); ++c) {
            phat[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
        }
        if (contains(params, phat, p_true)) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(trials);
}

} // namespace cbrl
