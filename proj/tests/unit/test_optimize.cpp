#include "doctest.h"

#include <cmath>
#include <random>

#include "cbrl/confidence.hpp"
#include "cbrl/error.hpp"
#include "cbrl/losses.hpp"
#include "cbrl/optimize.hpp"
#include "cbrl/synthetic.hpp"
#include "oracles.hpp"

using namespace cbrl;

namespace {

Dataset one_dim(const std::vector<std::tuple<int, double, double>>& rows, int k) {
    SampleSet s(1);
    std::vector<int> c;
    for (auto [ctx, x, y] : rows) {
        const double f[1] = {x};
        s.add(f, y);
        c.push_back(ctx);
    }
    return Dataset(std::move(s), c, k);
}

double max_context_risk(const LossModel& loss, const Dataset& d, std::span<const double> theta) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& part : partition_by_context(d)) m = std::max(m, loss.risk(theta, part, {}));
    return m;
}

// Newton's method on the pooled cross-entropy, written against the raw formulas.
oracle::Vec newton_logistic(const SampleSet& s) {
    const std::size_t d = s.dim() + 1;
    oracle::Vec th(d, 0.0);
    for (int it = 0; it < 100; ++it) {
        oracle::Vec g(d, 0.0);
        std::vector<oracle::Vec> h(d, oracle::Vec(d, 0.0));
        for (std::size_t i = 0; i < s.size(); ++i) {
            oracle::Vec xt(s.x(i).begin(), s.x(i).end());
            xt.push_back(1.0);
            const double p = 1.0 / (1.0 + std::exp(-oracle::dot(xt, th)));
            for (std::size_t a = 0; a < d; ++a) {
                g[a] += (p - s.y(i)) * xt[a];
                for (std::size_t b = 0; b < d; ++b) h[a][b] += p * (1 - p) * xt[a] * xt[b];
            }
        }
        // Gaussian elimination for h * step = g
        for (std::size_t col = 0; col < d; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < d; ++r)
                if (std::abs(h[r][col]) > std::abs(h[piv][col])) piv = r;
            std::swap(h[col], h[piv]);
            std::swap(g[col], g[piv]);
            for (std::size_t r = col + 1; r < d; ++r) {
                const double f = h[r][col] / h[col][col];
                for (std::size_t c = col; c < d; ++c) h[r][c] -= f * h[col][c];
                g[r] -= f * g[col];
            }
        }
        oracle::Vec step(d);
        for (std::size_t r = d; r-- > 0;) {
            double v = g[r];
            for (std::size_t c = r + 1; c < d; ++c) v -= h[r][c] * step[c];
            step[r] = v / h[r][r];
        }
        double size = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            th[a] -= step[a];
            size = std::max(size, std::abs(step[a]));
        }
        if (size < 1e-14) break;
    }
    return th;
}

double raw_cross_entropy(const SampleSet& s, const oracle::Vec& th) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        oracle::Vec xt(s.x(i).begin(), s.x(i).end());
        xt.push_back(1.0);
        const double z = oracle::dot(xt, th);
        sum += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - s.y(i) * z;
    }
    return sum / static_cast<double>(s.size());
}

TwoContextConfig desk_config(std::uint64_t seed) {
    TwoContextConfig cfg;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("method names") {
    CHECK(to_string(Method::minimax_group_dro) == "minimax-group-dro");
    CHECK(parse_method("minimax") == Method::minimax_group_dro);
    CHECK(parse_method("robust") == Method::robust);
    CHECK_THROWS_AS(parse_method("bayes"), InputError);
}

TEST_CASE("per-context minima") {
    SUBCASE("newsvendor closed form") {
        const auto d = one_dim({{1, 0.5, 1}, {1, 0.5, 2}, {1, 0.5, 3}, {1, 0.5, 4}, {2, 0.1, 5}}, 2);
        const auto m = per_context_min(NewsvendorLoss(1.0, 10.0), d, {});
        CHECK(m.rhats[0] == doctest::Approx(-0.75));
        CHECK(m.thetas[0][0] == 2.0);
        CHECK(m.rhats[1] == doctest::Approx(-4.5));
        CHECK(m.converged == std::vector<bool>{true, true});
    }
    SUBCASE("scaling the price and cost scales the minimum") {
        const auto d = one_dim({{1, 0.5, 1}, {1, 0.5, 2}, {1, 0.5, 3}, {1, 0.5, 4}}, 1);
        const auto d3 = one_dim({{1, 1.5, 1}, {1, 1.5, 2}, {1, 1.5, 3}, {1, 1.5, 4}}, 1);
        const auto a = per_context_min(NewsvendorLoss(1.0, 10.0), d, {});
        const auto b = per_context_min(NewsvendorLoss(3.0, 10.0), d3, {});
        CHECK(b.rhats[0] == doctest::Approx(3.0 * a.rhats[0]).epsilon(1e-14));
        CHECK(b.thetas[0] == a.thetas[0]);
    }
    SUBCASE("separable logistic context drives the risk to zero") {
        const auto d = one_dim({{1, -2, 0}, {1, -1, 0}, {1, 1, 1}, {1, 2, 1}}, 1);
        OptimizerOptions opts;
        opts.max_iters = 20000;
        const auto m = per_context_min(LogisticLoss(), d, opts);
        CHECK(m.rhats[0] >= 0.0);
        CHECK(m.rhats[0] <= 1e-6);
    }
}

TEST_CASE("non-convergence is flagged with a warning") {
    const auto d = one_dim({{1, -2, 0}, {1, -1, 1}, {1, 1, 0}, {1, 2, 1}}, 1);
    OptimizerOptions opts;
    opts.max_iters = 2;
    opts.grad_tol = 1e-14;
    const auto m = per_context_min(LogisticLoss(), d, opts);
    CHECK_FALSE(m.converged[0]);
    CHECK_FALSE(m.warnings.empty());
    const auto fit = fit_erm(LogisticLoss(), d, opts);
    CHECK_FALSE(fit.converged);
    CHECK(fit.stop_reason == "max-iters");
}

TEST_CASE("option validation") {
    const auto d = one_dim({{1, 0.5, 1}}, 1);
    OptimizerOptions opts;
    opts.step_size = -1.0;
    CHECK_THROWS_AS(fit_erm(LogisticLoss(), d, opts), InputError);
    CHECK_THROWS_AS(fit_robust(NewsvendorLoss(1, 10), d, 0.0, {}), InputError);
    CHECK_THROWS_AS(fit_robust(NewsvendorLoss(1, 10), d, 1.01, {}), InputError);
}

TEST_CASE("ERM on pooled newsvendor data matches the pooled closed form") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        StockGenConfig cfg;
        cfg.seed = seed;
        const auto d = gen_stock(cfg);
        NewsvendorLoss nv(200.0, 100.0);
        const auto fit = fit_erm(nv, d, {});
        const auto pooled = newsvendor_context_min(d.samples(), 200.0, 100.0);
        CHECK(std::abs(fit.objective - pooled.value) <= 1e-6);
        CHECK(fit.converged);
        CHECK(fit.method == Method::erm);
    }
}

TEST_CASE("single context ERM equals its per-context minimum") {
    const auto d = one_dim({{1, 0.5, 1}, {1, 0.4, 2}, {1, 0.5, 7}, {1, 0.2, 4}}, 1);
    NewsvendorLoss nv(2.0, 10.0);
    const auto fit = fit_erm(nv, d, {});
    const auto m = per_context_min(nv, d, {});
    CHECK(fit.theta.values == m.thetas[0]);
    CHECK(fit.objective == m.rhats[0]);
}

TEST_CASE("logistic ERM reaches the Newton reference") {
    ClassifyGenConfig cfg;
    cfg.seed = 11;
    const auto d = gen_classify(cfg);
    const auto fit = fit_erm(LogisticLoss(), d, {});
    const auto ref = newton_logistic(d.samples());
    CHECK(fit.converged);
    CHECK(std::abs(fit.objective - raw_cross_entropy(d.samples(), ref)) <= 1e-6);
    for (std::size_t j = 0; j < ref.size(); ++j) CHECK(std::abs(fit.theta.values[j] - ref[j]) <= 1e-4);
}

TEST_CASE("group-DRO") {
    SUBCASE("single context follows the ERM descent") {
        const auto d = one_dim({{1, -2, 0}, {1, -1, 1}, {1, 1, 0}, {1, 2, 1}, {1, 3, 1}}, 1);
        const auto g = fit_group_dro(LogisticLoss(), d, {}, 0.1, 20000);
        const auto e = fit_erm(LogisticLoss(), d, {});
        CHECK(std::abs(g.objective - e.objective) <= 1e-8);
    }
    SUBCASE("identical contexts keep the weights uniform and match the pooled fit") {
        const auto d = one_dim({{1, -2, 0}, {1, 1, 1}, {1, 2, 0}, {2, -2, 0}, {2, 1, 1}, {2, 2, 0}}, 2);
        const auto g = fit_group_dro(LogisticLoss(), d, {}, 0.1, 5000);
        const auto e = fit_erm(LogisticLoss(), d, {});
        CHECK(std::abs(g.objective - e.objective) <= 1e-8);
    }
    SUBCASE("two-context newsvendor matches the grid minimax") {
        const auto d = gen_stock_two_context(desk_config(3));
        NewsvendorLoss nv(10.0, 100.0);
        const auto g = fit_group_dro(nv, d, {}, 0.1, 20000);
        double grid = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 100000; ++i) {
            const double th[1] = {i * 1e-3};
            grid = std::min(grid, max_context_risk(nv, d, th));
        }
        CHECK(std::abs(g.objective - grid) <= 1e-3);
        CHECK(g.objective == doctest::Approx(max_context_risk(nv, d, g.theta.values)));
        CHECK(g.method == Method::minimax_group_dro);
    }
}

TEST_CASE("property: group-DRO max risk never exceeds ERM's") {
    std::vector<std::pair<std::unique_ptr<LossModel>, Dataset>> cases;
    for (std::uint64_t s : {1ULL, 2ULL}) {
        cases.emplace_back(std::make_unique<NewsvendorLoss>(10.0, 100.0), gen_stock_two_context(desk_config(s)));
        StockGenConfig sc;
        sc.seed = s;
        cases.emplace_back(std::make_unique<NewsvendorLoss>(200.0, 100.0), gen_stock(sc));
        ClassifyGenConfig cc;
        cc.seed = s;
        cases.emplace_back(std::make_unique<LogisticLoss>(), gen_classify(cc));
    }
    for (const auto& [loss, d] : cases) {
        const auto g = fit_group_dro(*loss, d, {}, 0.1, 20000);
        const auto e = fit_erm(*loss, d, {});
        CHECK(max_context_risk(*loss, d, g.theta.values) <= max_context_risk(*loss, d, e.theta.values) + 1e-6);
    }
}

TEST_CASE("robust fit with a vanishing radius stays at ERM") {
    StockGenConfig cfg;
    cfg.seed = 4;
    const auto d = gen_stock(cfg);
    NewsvendorLoss nv(10.0, 100.0);
    OptimizerOptions opts;
    opts.eps_override = 1e-12;
    const auto r = fit_robust(nv, d, 0.99, opts);
    const auto e = fit_erm(nv, d, {});
    CHECK(std::abs(r.theta.values[0] - e.theta.values[0]) <= 1e-4);
    CHECK_FALSE(r.beta.has_value());
    REQUIRE(r.inner.has_value());
    // objective differs from ERM's by the constant -sum phat rhat, up to the
    // sum (p* - phat) delta term, which Pinsker bounds by sqrt(2 ln2 eps) max delta
    double k = 0.0;
    for (std::size_t c = 0; c < r.rhats.size(); ++c) k -= d.stats().phat[c] * r.rhats[c];
    const auto parts = partition_by_context(d);
    double max_delta = 0.0;
    for (std::size_t c = 0; c < parts.size(); ++c) {
        max_delta = std::max(max_delta, nv.risk(r.theta.values, parts[c], {}) - r.rhats[c]);
    }
    CHECK(std::abs(r.objective - (e.objective + k)) <= std::sqrt(2.0 * std::log(2.0) * 1e-12) * max_delta + 1e-9);
}

TEST_CASE("full confidence equalizes the two context excess risks") {
    const auto d = gen_stock_two_context(desk_config(0));
    CHECK(d.stats().counts == std::vector<std::size_t>{90, 10});
    NewsvendorLoss nv(10.0, 100.0);
    const auto r = fit_robust(nv, d, 1.0, {});
    REQUIRE(r.inner.has_value());
    CHECK(r.inner->regime == Regime::point_mass);
    const auto parts = partition_by_context(d);
    const double d1 = nv.risk(r.theta.values, parts[0], {}) - r.rhats[0];
    const double d2 = nv.risk(r.theta.values, parts[1], {}) - r.rhats[1];
    CHECK(std::abs(d1 - d2) <= 1e-2 * std::max(std::abs(d1), std::abs(d2)));
    CHECK(r.objective == doctest::Approx(std::max(d1, d2)).epsilon(1e-12));
    CHECK(r.theta.values[0] == doctest::Approx(25.0).epsilon(0.1));
}

TEST_CASE("property: robust worst case never exceeds the ERM worst case") {
    const auto check = [](const LossModel& loss, const Dataset& d, double beta) {
        const auto r = fit_robust(loss, d, beta, {});
        const auto e = fit_erm(loss, d, {});
        const double eps = epsilon_bits(d.size(), static_cast<std::uint64_t>(d.num_contexts()), beta);
        const auto wc = worst_case_excess(loss, partition_by_context(d), d.stats().phat, r.rhats, e.theta.values, eps);
        CHECK(r.objective <= wc.objective + 1e-12);
    };
    for (std::uint64_t s : {1ULL, 2ULL}) {
        check(NewsvendorLoss(10.0, 100.0), gen_stock_two_context(desk_config(s)), 0.99);
        StockGenConfig sc;
        sc.seed = s;
        check(NewsvendorLoss(200.0, 100.0), gen_stock(sc), 0.99);
        ClassifyGenConfig cc;
        cc.seed = s;
        check(LogisticLoss(), gen_classify(cc), 0.9);
    }
}

TEST_CASE("single context robust fit equals ERM") {
    const auto d = one_dim({{1, -2, 0}, {1, -1, 1}, {1, 1, 0}, {1, 2, 1}, {1, 3, 1}}, 1);
    const auto r = fit_robust(LogisticLoss(), d, 0.99, {});
    const auto e = fit_erm(LogisticLoss(), d, {});
    for (std::size_t j = 0; j < e.theta.size(); ++j) CHECK(std::abs(r.theta.values[j] - e.theta.values[j]) <= 1e-6);

    const auto dn = one_dim({{1, 0.5, 1}, {1, 0.4, 2}, {1, 0.5, 7}, {1, 0.2, 4}}, 1);
    const auto rn = fit_robust(NewsvendorLoss(2, 10), dn, 0.99, {});
    CHECK(std::abs(rn.theta.values[0] - fit_erm(NewsvendorLoss(2, 10), dn, {}).theta.values[0]) <= 1e-6);
}

TEST_CASE("Danskin gradient matches finite differences of the worst case") {
    ClassifyGenConfig cfg;
    cfg.seed = 5;
    const auto d = gen_classify(cfg);
    LogisticLoss lg;
    const auto parts = partition_by_context(d);
    const auto mins = per_context_min(lg, d, {});
    const double eps = epsilon_bits(d.size(), 3, 0.99);
    std::mt19937_64 gen(6);
    std::normal_distribution<double> nd(0.0, 1.0);
    int checked = 0;
    for (int t = 0; t < 200 && checked < 20; ++t) {
        oracle::Vec th{nd(gen), nd(gen), nd(gen)};
        std::vector<Vector> grads;
        const auto lf = worst_case_excess(lg, parts, d.stats().phat, mins.rhats, th, eps, &grads);
        if (lf.regime != Regime::interior) continue;
        // keep to points where the logit clamp is inactive on every sample
        bool clamped = false;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto x = d.samples().x(i);
            clamped = clamped || std::abs(th[0] * x[0] + th[1] * x[1] + th[2]) >= kLogitClamp;
        }
        if (clamped) continue;
        ++checked;
        oracle::Vec dir{nd(gen), nd(gen), nd(gen)};
        const double norm = std::sqrt(oracle::dot(dir, dir));
        for (double& v : dir) v /= norm;
        double analytic = 0.0;
        for (std::size_t c = 0; c < parts.size(); ++c) analytic += lf.p_star[c] * oracle::dot(grads[c], dir);
        const auto f = [&](const oracle::Vec& x) {
            return worst_case_excess(lg, parts, d.stats().phat, mins.rhats, x, eps).objective;
        };
        const double fd = oracle::directional_fd(f, th, dir, 1e-5);
        CHECK(oracle::relative_error(fd, analytic) <= 1e-3);
    }
    CHECK(checked == 20);
}

TEST_CASE("robust objective never rises above the starting point") {
    ClassifyGenConfig cfg;
    cfg.seed = 8;
    const auto d = gen_classify(cfg);
    LogisticLoss lg;
    const auto r = fit_robust(lg, d, 0.99, {});
    const auto e = fit_erm(lg, d, {});
    const auto start = worst_case_excess(lg, partition_by_context(d), d.stats().phat, r.rhats, e.theta.values,
                                          *r.eps_bits);
    CHECK(r.objective <= start.objective);
    REQUIRE(r.inner.has_value());
    double s = 0.0;
    for (double v : r.inner->p_star) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-10);
    CHECK(std::abs(r.inner->divergence_bits - *r.eps_bits) <= 1e-8);
    CHECK(r.step_size == doctest::Approx(0.05));
}
