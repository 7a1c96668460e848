#include "cbrl/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "cbrl/confidence.hpp"
#include "cbrl/error.hpp"

namespace cbrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;

/**
Per-context terms of the multiplier equation at gap t = exp(log_gap).

With ell_c = log(u_c) (or log(u_c / nu) at large nu) and the matching
normalizer B, we have log(p*_c / phat_c) = -ell_c - B and
D(phat || p*) = (sum_c phat_c ell_c + B) / ln 2. Two algebraically equal
forms are used: the log1p form for nu >= 2 max(delta), where both pieces
are O(delta / nu) and would otherwise cancel, and a log-sum-exp form near
the pole, where t may underflow.
*/
struct GapTerms {
    Vector ell;
    double normalizer = 0.0;
    double nu = 0.0;
    double gap = 0.0;
    bool large_nu = false;

    double divergence_bits(std::span<const double> phat) const {
        double acc = normalizer;
        for (std::size_t c = 0; c < phat.size(); ++c) acc += phat[c] * ell[c];
        return acc / kLn2;
    }
};

struct ProfileView {
    const ExcessProfile& profile;
    double max_delta;
    Vector gaps; // max_delta - delta_c >= 0

    explicit ProfileView(const ExcessProfile& p) : profile(p) {
        max_delta = *std::max_element(p.deltas.begin(), p.deltas.end());
        gaps.resize(p.size());
        for (std::size_t c = 0; c < p.size(); ++c) gaps[c] = max_delta - p.deltas[c];
    }

    void evaluate(double log_gap, GapTerms& out) const {
        const std::size_t k = profile.size();
        const double t = std::exp(log_gap);
        out.ell.resize(k);
        out.gap = t;
        out.nu = max_delta + t;
        out.large_nu = t >= max_delta;
        if (out.large_nu) {
            double ratio_sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                out.ell[c] = std::log1p(-profile.deltas[c] / out.nu);
                ratio_sum += profile.phat[c] * profile.deltas[c] / (t + gaps[c]);
            }
            out.normalizer = std::log1p(ratio_sum);
            return;
        }
        double peak = -kInf;
        for (std::size_t c = 0; c < k; ++c) {
            double log_u;
            if (gaps[c] == 0.0) {
                log_u = log_gap;
            } else if (t < gaps[c]) {
                log_u = std::log(gaps[c]) + std::log1p(t / gaps[c]);
            } else {
                log_u = log_gap + std::log1p(gaps[c] / t);
            }
            out.ell[c] = log_u;
            peak = std::max(peak, std::log(profile.phat[c]) - log_u);
        }
        double acc = 0.0;
        for (std::size_t c = 0; c < k; ++c) acc += std::exp(std::log(profile.phat[c]) - out.ell[c] - peak);
        out.normalizer = peak + std::log(acc);
    }

    double residual(double log_gap, double eps_bits, GapTerms& scratch) const {
        evaluate(log_gap, scratch);
        return scratch.divergence_bits(profile.phat) - eps_bits;
    }
};

void check_radius(double eps_bits) {
    if (!(eps_bits > 0.0) || is_unbounded_radius(eps_bits)) {
        throw InputError("radius must lie in (0, " + std::to_string(kUnboundedEpsBits) + ") bits");
    }
}

} // namespace

std::string to_string(Regime regime) {
    switch (regime) {
    case Regime::interior:
        return "interior";
    case Regime::uniform_degenerate:
        return "uniform-degenerate";
    case Regime::point_mass:
        return "point-mass";
    }
    return "unknown";
}

ExcessProfile ExcessProfile::make(Vector phat, Vector deltas, Vector rhats) {
    const std::size_t k = phat.size();
    if (k == 0) throw InputError("excess profile is empty");
    if (deltas.size() != k) throw InputError("phat and deltas differ in length");
    if (rhats.empty()) rhats.assign(k, 0.0);
    if (rhats.size() != k) throw InputError("phat and rhats differ in length");
    double sum = 0.0;
    for (double p : phat) {
        if (!(p > 0.0)) throw InputError("phat must be strictly positive");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InputError("phat must sum to 1");
    for (std::size_t c = 0; c < k; ++c) {
        if (!std::isfinite(deltas[c]) || !std::isfinite(rhats[c])) throw InputError("excess profile is not finite");
        if (deltas[c] < 0.0) {
            if (deltas[c] < -1e-9 * std::max(1.0, std::abs(rhats[c]))) {
                throw InputError("negative excess risk " + std::to_string(deltas[c]) + " in context " +
                                 std::to_string(c + 1));
            }
            deltas[c] = 0.0;
        }
    }
    return {std::move(phat), std::move(deltas), std::move(rhats)};
}

bool is_degenerate(const ExcessProfile& profile) noexcept {
    const auto [lo, hi] = std::minmax_element(profile.deltas.begin(), profile.deltas.end());
    return *hi - *lo <= kDegenerateTolerance * std::max(1.0, std::abs(*hi));
}

double nu_residual_at_log_gap(const ExcessProfile& profile, double eps_bits, double log_gap) {
    ProfileView view(profile);
    GapTerms terms;
    return view.residual(log_gap, eps_bits, terms);
}

double nu_residual_at_gap(const ExcessProfile& profile, double eps_bits, double gap) {
    if (!(gap > 0.0)) throw InputError("gap must be positive");
    return nu_residual_at_log_gap(profile, eps_bits, std::log(gap));
}

NuRoot root_nu(const ExcessProfile& profile, double eps_bits) {
    check_radius(eps_bits);
    if (is_degenerate(profile)) throw SolverError("constant excess profile");

    const ProfileView view(profile);
    GapTerms scratch;
    const double spread =
        view.max_delta - *std::min_element(profile.deltas.begin(), profile.deltas.end());

    // upper end: g -> -eps as t -> infinity
    double hi = std::log(1.0 + spread);
    int doublings = 0;
    while (view.residual(hi, eps_bits, scratch) >= 0.0) {
        if (++doublings > 200) throw SolverError("root bracket not found");
        hi += std::numbers::ln2;
    }
    // lower end: g -> +infinity as t -> 0+, but only like (1 - phat(argmax)) log(1/t)
    double lo = std::log(std::max(1e-12, 1e-9 * (1.0 + view.max_delta)));
    if (lo >= hi) lo = hi - 1.0;
    int expansions = 0;
    while (view.residual(lo, eps_bits, scratch) <= 0.0) {
        if (++expansions > 200) throw SolverError("root bracket not found");
        lo -= std::max(1.0, std::abs(lo));
    }

    int iterations = 0;
    for (; iterations < 2000; ++iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double g = view.residual(mid, eps_bits, scratch);
        if (g == 0.0) {
            lo = hi = mid;
            break;
        }
        (g > 0.0 ? lo : hi) = mid;
    }
    const double g_lo = view.residual(lo, eps_bits, scratch);
    const double g_hi = view.residual(hi, eps_bits, scratch);
    const double log_gap = std::abs(g_lo) <= std::abs(g_hi) ? lo : hi;
    const double residual = std::min(std::abs(g_lo), std::abs(g_hi));
    const double gap = std::exp(log_gap);
    return {view.max_delta + gap, gap, log_gap, residual, iterations};
}

LeastFavorable solve_least_favorable(const ExcessProfile& profile, double eps_bits) {
    if (!(eps_bits >= 0.0)) throw InputError("radius must be nonnegative");
    const std::size_t k = profile.size();
    LeastFavorable lf;

    if (is_degenerate(profile) || eps_bits == 0.0) {
        lf.regime = Regime::uniform_degenerate;
        lf.p_star = profile.phat;
        lf.weights.assign(k, 0.0);
        lf.nu_star = kInf;
        lf.nu_gap = kInf;
        lf.lambda0 = kInf;
        lf.divergence_bits = 0.0;
        lf.objective = std::inner_product(profile.phat.begin(), profile.phat.end(), profile.deltas.begin(), 0.0);
        return lf;
    }

    if (is_unbounded_radius(eps_bits)) {
        const double top = *std::max_element(profile.deltas.begin(), profile.deltas.end());
        const double tie = kDegenerateTolerance * std::max(1.0, std::abs(top));
        std::size_t ties = 0;
        for (double d : profile.deltas) ties += d >= top - tie ? 1 : 0;
        lf.regime = Regime::point_mass;
        lf.p_star.assign(k, 0.0);
        lf.objective = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (profile.deltas[c] >= top - tie) lf.p_star[c] = 1.0 / static_cast<double>(ties);
            lf.objective += lf.p_star[c] * profile.deltas[c];
        }
        lf.weights.resize(k);
        for (std::size_t c = 0; c < k; ++c) lf.weights[c] = lf.p_star[c] / profile.phat[c] - 1.0;
        lf.nu_star = top;
        lf.nu_gap = 0.0;
        lf.lambda0 = 0.0;
        lf.divergence_bits = ties == k ? kl_bits(profile.phat, lf.p_star) : kInf;
        return lf;
    }

    const NuRoot root = root_nu(profile, eps_bits);
    const ProfileView view(profile);
    GapTerms terms;
    view.evaluate(root.log_gap, terms);

    lf.regime = Regime::interior;
    lf.nu_star = root.nu;
    lf.nu_gap = root.gap;
    lf.lambda0 = terms.large_nu ? terms.nu * std::exp(-terms.normalizer) : std::exp(-terms.normalizer);
    lf.p_star.resize(k);
    lf.weights.resize(k);
    lf.objective = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double log_ratio = -terms.ell[c] - terms.normalizer;
        lf.p_star[c] = profile.phat[c] * std::exp(log_ratio);
        lf.weights[c] = std::expm1(log_ratio);
        lf.objective += lf.p_star[c] * profile.deltas[c];
    }
    lf.divergence_bits = terms.divergence_bits(profile.phat);
    return lf;
}

ObjectiveDecomposition decompose_objective(const ExcessProfile& profile, const LeastFavorable& lf,
                                           double erm_risk) {
    if (lf.weights.size() != profile.size()) throw InputError("least-favorable solution does not match profile");
    ObjectiveDecomposition out{erm_risk, 0.0, 0.0};
    for (std::size_t c = 0; c < profile.size(); ++c) {
        out.weighted_excess += profile.phat[c] * lf.weights[c] * profile.deltas[c];
        out.constant -= profile.phat[c] * profile.rhats[c];
    }
    return out;
}

} // namespace cbrl
