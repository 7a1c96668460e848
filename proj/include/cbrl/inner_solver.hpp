#pragma once

#include <span>
#include <string>

#include "cbrl/model.hpp"

namespace cbrl {

/**
Per-context empirical excess risks at a fixed parameter.

`deltas[c] = R_c(theta) - rhats[c]` must be nonnegative; values down to
-1e-9 * max(1, |rhats[c]|) are treated as round-off and clamped to zero,
anything more negative is rejected.
*/
struct ExcessProfile {
    Vector phat;
    Vector deltas;
    Vector rhats;

    /// Validates and clamps. `rhats` may be empty (treated as zeros).
    static ExcessProfile make(Vector phat, Vector deltas, Vector rhats = {});

    std::size_t size() const noexcept { return phat.size(); }
};

enum class Regime { interior, uniform_degenerate, point_mass };

std::string to_string(Regime regime);

/**
Solution of max_p sum_c p_c deltas_c subject to D(phat || p) <= eps.

In the interior regime p*_c = lambda0 * phat_c / (nu* - delta_c) with
lambda0 = (sum_c phat_c / (nu* - delta_c))^-1, and the KL constraint is
active. `nu_gap` holds nu* - max_c delta_c, which stays resolvable when nu*
itself rounds to max delta. In the uniform-degenerate regime nu_star and
lambda0 are +infinity (the limit that gives p* = phat); in the point-mass
regime nu_star = max delta and lambda0 = 0.
*/
struct LeastFavorable {
    Vector p_star;
    double nu_star = 0.0;
    double nu_gap = 0.0;
    double lambda0 = 0.0;
    Vector weights; ///< p*_c / phat_c - 1
    double objective = 0.0;
    double divergence_bits = 0.0; ///< D(phat || p*) evaluated in log space
    Regime regime = Regime::interior;
};

/// Relative spread below which a profile counts as constant.
inline constexpr double kDegenerateTolerance = 1e-12;

bool is_degenerate(const ExcessProfile& profile) noexcept;

/**
Root function of the multiplier,

    g(nu) = sum_c phat_c log2(nu - delta_c) + log2(sum_c phat_c / (nu - delta_c)) - eps,

parameterized by the gap t = nu - max_c delta_c > 0. g equals D(phat || p(nu)) - eps
and decreases from +infinity (t -> 0+) to -eps (t -> infinity).
*/
double nu_residual_at_gap(const ExcessProfile& profile, double eps_bits, double gap);

/// Same function taking log(t), valid even when t underflows.
double nu_residual_at_log_gap(const ExcessProfile& profile, double eps_bits, double log_gap);

struct NuRoot {
    double nu;       ///< max_c delta_c + gap
    double gap;
    double log_gap;
    double residual; ///< g at the returned root, in bits
    int iterations;
};

/**
Bracketed bisection on log(t) for the root of g.

Throws SolverError("constant excess profile") for degenerate profiles,
SolverError("root bracket not found") when bracket expansion fails, and
InputError for eps outside (0, kUnboundedEpsBits).
*/
NuRoot root_nu(const ExcessProfile& profile, double eps_bits);

/// Least-favorable context distribution for the given radius; eps may be +infinity.
LeastFavorable solve_least_favorable(const ExcessProfile& profile, double eps_bits);

struct ObjectiveDecomposition {
    double erm_term;        ///< empirical risk under phat, as supplied
    double weighted_excess; ///< sum_c phat_c w_c delta_c
    double constant;        ///< K = -sum_c phat_c rhat_c
    double total() const noexcept { return erm_term + weighted_excess + constant; }
};

/// Splits lf.objective into ERM risk + weighted excess + constant.
ObjectiveDecomposition decompose_objective(const ExcessProfile& profile, const LeastFavorable& lf,
                                           double erm_risk);

} // namespace cbrl
