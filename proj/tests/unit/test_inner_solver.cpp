#include "doctest.h"

#include <cmath>
#include <random>

#include "cbrl/confidence.hpp"
#include "cbrl/error.hpp"
#include "cbrl/inner_solver.hpp"
#include "oracles.hpp"

using namespace cbrl;

namespace {

ExcessProfile two_point() { return ExcessProfile::make({0.5, 0.5}, {0.0, 1.0}); }

// g(nu) straight from its definition
double g_direct(const ExcessProfile& p, double nu, double eps) {
    double a = 0.0, b = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        a += p.phat[c] * std::log2(nu - p.deltas[c]);
        b += p.phat[c] / (nu - p.deltas[c]);
    }
    return a + std::log2(b) - eps;
}

struct Instance {
    ExcessProfile profile;
    double eps;
};

Instance random_instance(std::mt19937_64& gen, std::size_t k) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> e(0.01, 2.0);
    Vector phat = oracle::dirichlet_uniform(k, gen);
    // renormalize so the sum is exact to the last bit the validator checks
    double s = 0.0;
    for (double v : phat) s += v;
    for (double& v : phat) v /= s;
    Vector d(k), r(k);
    for (std::size_t c = 0; c < k; ++c) {
        d[c] = u(gen);
        r[c] = 4.0 * u(gen) - 2.0;
    }
    return {ExcessProfile::make(phat, d, r), e(gen)};
}

} // namespace

TEST_CASE("root of the multiplier equation, two-point example") {
    const auto root = root_nu(two_point(), 0.2);
    CHECK(root.nu == doctest::Approx(1.51609706230835).epsilon(1e-12));
    CHECK(std::abs(g_direct(two_point(), root.nu, 0.2)) <= 1e-10);
    CHECK(std::abs(root.residual) <= 1e-10);
    // nu / (nu - 1) = p2 / p1 for the grid maximizer
    Vector arg;
    oracle::grid_max(two_point().phat, two_point().deltas, 0.2, 1e-3, 1e-7, &arg);
    CHECK(root.nu / (root.nu - 1.0) == doctest::Approx(arg[1] / arg[0]).epsilon(1e-4));
}

TEST_CASE("tiny radius pushes nu far out") {
    const auto root = root_nu(two_point(), 1e-9);
    CHECK(root.nu >= 1e3);
    CHECK(std::abs(nu_residual_at_gap(two_point(), 1e-9, root.gap)) <= 1e-10);
}

TEST_CASE("root errors") {
    CHECK_THROWS_WITH_AS(root_nu(ExcessProfile::make({0.5, 0.5}, {0.3, 0.3}), 0.2), "constant excess profile",
                         SolverError);
    CHECK_THROWS_AS(root_nu(two_point(), 0.0), InputError);
    CHECK_THROWS_AS(root_nu(two_point(), kUnboundedEpsBits), InputError);
}

TEST_CASE("profile validation") {
    CHECK_THROWS_AS(ExcessProfile::make({0.5, 0.6}, {0, 1}), InputError);
    CHECK_THROWS_AS(ExcessProfile::make({1.0, 0.0}, {0, 1}), InputError);
    CHECK_THROWS_AS(ExcessProfile::make({0.5, 0.5}, {0, -1e-3}), InputError);
    CHECK_THROWS_AS(ExcessProfile::make({0.5, 0.5}, {0}), InputError);
    // noise-level negatives are clamped
    const auto p = ExcessProfile::make({0.5, 0.5}, {-5e-10, 1.0});
    CHECK(p.deltas[0] == 0.0);
}

TEST_CASE("least-favorable examples") {
    SUBCASE("constant profile keeps phat") {
        const auto lf = solve_least_favorable(ExcessProfile::make({0.5, 0.5}, {0.3, 0.3}), 0.7);
        CHECK(lf.regime == Regime::uniform_degenerate);
        CHECK(lf.p_star == Vector{0.5, 0.5});
        CHECK(lf.objective == doctest::Approx(0.3));
        CHECK(lf.weights == Vector{0.0, 0.0});
    }
    SUBCASE("two-point interior solution") {
        const auto lf = solve_least_favorable(two_point(), 0.2);
        CHECK(lf.regime == Regime::interior);
        CHECK(lf.p_star[0] == doctest::Approx(0.25396).epsilon(1e-5));
        CHECK(lf.p_star[1] == doctest::Approx(0.74604).epsilon(1e-5));
        CHECK(lf.objective == doctest::Approx(0.74604).epsilon(1e-5));
        CHECK(lf.weights[0] == doctest::Approx(-0.49208).epsilon(1e-5));
        CHECK(lf.weights[1] == doctest::Approx(0.49208).epsilon(1e-5));
        // saturation oracle: 0.5 log2(0.25 / (p1 p2)) = 0.2
        CHECK(0.5 * std::log2(0.25 / (lf.p_star[0] * lf.p_star[1])) == doctest::Approx(0.2).epsilon(1e-10));
        CHECK(lf.objective == doctest::Approx(oracle::grid_max(two_point().phat, two_point().deltas, 0.2, 1e-3, 1e-7))
                                  .epsilon(1e-6));
    }
    SUBCASE("point mass at full confidence") {
        const auto lf = solve_least_favorable(ExcessProfile::make({0.7, 0.3}, {0.2, 0.9}),
                                              std::numeric_limits<double>::infinity());
        CHECK(lf.regime == Regime::point_mass);
        CHECK(lf.p_star == Vector{0.0, 1.0});
        CHECK(lf.objective == 0.9);
        CHECK(lf.weights[0] == -1.0);
        CHECK(lf.weights[1] == doctest::Approx(0.7 / 0.3));
    }
    SUBCASE("point mass splits ties") {
        const auto lf = solve_least_favorable(ExcessProfile::make({0.5, 0.25, 0.25}, {0.9, 0.2, 0.9}), 1e7);
        CHECK(lf.p_star == Vector{0.5, 0.0, 0.5});
        CHECK(lf.objective == 0.9);
    }
    SUBCASE("zero radius returns phat") {
        const auto lf = solve_least_favorable(two_point(), 0.0);
        CHECK(lf.p_star == two_point().phat);
        CHECK(lf.objective == 0.5);
    }
}

TEST_CASE("decomposition examples") {
    const auto p = two_point();
    const auto lf = solve_least_favorable(p, 0.2);
    const auto dec = decompose_objective(p, lf, 0.5);
    CHECK(dec.constant == 0.0);
    CHECK(dec.erm_term == 0.5);
    CHECK(dec.weighted_excess == doctest::Approx(0.5 * 0.49208).epsilon(1e-4));
    CHECK(dec.total() == doctest::Approx(lf.objective).epsilon(1e-12));

    const auto flat = ExcessProfile::make({0.25, 0.75}, {0.4, 0.4}, {1.0, 2.0});
    const auto lf_flat = solve_least_favorable(flat, 0.3);
    // erm risk = sum phat (delta + rhat)
    const double erm = 0.25 * 1.4 + 0.75 * 2.4;
    const auto d2 = decompose_objective(flat, lf_flat, erm);
    CHECK(d2.weighted_excess == 0.0);
    CHECK(erm + d2.constant == doctest::Approx(lf_flat.objective).epsilon(1e-14));
}

TEST_CASE("property: oracle equivalence and KKT residuals on random instances") {
    std::mt19937_64 gen(2024);
    for (int t = 0; t < 40; ++t) {
        const auto inst = random_instance(gen, 2 + static_cast<std::size_t>(t % 2));
        const auto lf = solve_least_favorable(inst.profile, inst.eps);
        const double brute = oracle::grid_max(inst.profile.phat, inst.profile.deltas, inst.eps);
        CHECK(std::abs(brute - lf.objective) <= 1e-3);
        CHECK(brute <= lf.objective + 1e-9);
        if (lf.regime != Regime::interior) continue;
        CHECK(std::abs(oracle::kl2(inst.profile.phat, lf.p_star) - inst.eps) <= 1e-8);
        CHECK(std::abs(nu_residual_at_gap(inst.profile, inst.eps, lf.nu_gap)) <= 1e-10);
        double s = 0.0;
        for (double v : lf.p_star) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-10);
    }
}

TEST_CASE("property: optimality certificate against random feasible points") {
    std::mt19937_64 gen(77);
    for (int t = 0; t < 10; ++t) {
        const auto inst = random_instance(gen, 3);
        const auto lf = solve_least_favorable(inst.profile, inst.eps);
        int accepted = 0;
        while (accepted < 1000) {
            const auto q = oracle::dirichlet_uniform(3, gen);
            if (oracle::kl2(inst.profile.phat, q) > inst.eps) continue;
            ++accepted;
            CHECK(oracle::dot(q, inst.profile.deltas) <= lf.objective + 1e-9);
        }
    }
}

TEST_CASE("property: weight identity and invariants") {
    std::mt19937_64 gen(99);
    for (int t = 0; t < 300; ++t) {
        const auto inst = random_instance(gen, 2 + static_cast<std::size_t>(t % 4));
        const auto lf = solve_least_favorable(inst.profile, inst.eps);
        double mass = 0.0, obj = 0.0;
        for (std::size_t c = 0; c < inst.profile.size(); ++c) {
            CHECK(std::abs(lf.weights[c] - (lf.p_star[c] / inst.profile.phat[c] - 1.0)) <= 1e-10);
            CHECK(lf.weights[c] >= -1.0);
            mass += inst.profile.phat[c] * (1.0 + lf.weights[c]);
            obj += lf.p_star[c] * inst.profile.deltas[c];
        }
        CHECK(std::abs(mass - 1.0) <= 1e-10);
        CHECK(std::abs(obj - lf.objective) <= 1e-12);
        // nu* itself may round onto max delta; the stored gap may not
        if (lf.regime == Regime::interior) {
            CHECK(lf.nu_gap > 0.0);
            CHECK(lf.nu_star >= *std::max_element(inst.profile.deltas.begin(), inst.profile.deltas.end()));
        }
    }
}

TEST_CASE("property: decomposition identity") {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 1000; ++t) {
        const auto inst = random_instance(gen, 2 + static_cast<std::size_t>(t % 4));
        const auto lf = solve_least_favorable(inst.profile, inst.eps);
        double erm = 0.0;
        for (std::size_t c = 0; c < inst.profile.size(); ++c) {
            erm += inst.profile.phat[c] * (inst.profile.deltas[c] + inst.profile.rhats[c]);
        }
        const auto dec = decompose_objective(inst.profile, lf, erm);
        CHECK(std::abs(dec.total() - lf.objective) <= 1e-10);
    }
}

TEST_CASE("property: objective nondecreasing in radius, reaching the max at full confidence") {
    std::mt19937_64 gen(31);
    for (int t = 0; t < 50; ++t) {
        const auto inst = random_instance(gen, 2 + static_cast<std::size_t>(t % 3));
        double prev = -1.0;
        for (double eps = 1e-6; eps < 200.0; eps *= 1.5) {
            const double obj = solve_least_favorable(inst.profile, eps).objective;
            CHECK(obj >= prev - 1e-12);
            prev = obj;
        }
        const double top = *std::max_element(inst.profile.deltas.begin(), inst.profile.deltas.end());
        CHECK(prev <= top + 1e-12);
        CHECK(top - prev <= 1e-3);
        CHECK(solve_least_favorable(inst.profile, kUnboundedEpsBits).objective == top);
    }
}

TEST_CASE("property: tiny radius approaches phat") {
    std::mt19937_64 gen(13);
    for (int t = 0; t < 100; ++t) {
        const auto inst = random_instance(gen, 2 + static_cast<std::size_t>(t % 4));
        const auto lf = solve_least_favorable(inst.profile, 1e-9);
        for (std::size_t c = 0; c < inst.profile.size(); ++c) {
            CHECK(std::abs(lf.p_star[c] - inst.profile.phat[c]) <= 1e-3);
            CHECK(std::abs(lf.weights[c]) <= 2e-3);
        }
    }
}

TEST_CASE("dominant argmax context near the pole stays accurate") {
    // phat(argmax) close to 1 makes g blow up only slowly, so the gap can be astronomically small
    const auto p = ExcessProfile::make({0.999, 0.001}, {1.0, 0.0});
    for (double eps : {1e-3, 0.5, 3.0, 9.0}) {
        const auto lf = solve_least_favorable(p, eps);
        CHECK(lf.regime == Regime::interior);
        CHECK(std::abs(lf.divergence_bits - eps) <= 1e-8);
        CHECK(std::abs(lf.p_star[0] + lf.p_star[1] - 1.0) <= 1e-10);
        CHECK(lf.p_star[0] >= 0.999);
    }
}
