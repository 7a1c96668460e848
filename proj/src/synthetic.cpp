#include "cbrl/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "cbrl/error.hpp"
#include "cbrl/json_util.hpp"

namespace cbrl {

namespace {

using json_util::read;
using json_util::reject_unknown;

// stream tag for dataset generation, so generation never shares a stream with its seed's other uses
constexpr std::uint64_t kDataStream = 0x64617461; // "data"

double spread_to_sd(double spread, bool is_variance, const char* what) {
    if (!(spread >= 0.0) || !std::isfinite(spread)) throw InputError(std::string(what) + " must be nonnegative");
    return is_variance ? std::sqrt(spread) : spread;
}

void check_simplex(const Vector& p, const char* what) {
    if (p.empty()) throw InputError(std::string(what) + " must be nonempty");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw InputError(std::string(what) + " must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError(std::string(what) + " must sum to 1");
}

Vector cumulative(const Vector& p) {
    Vector cdf(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = acc += p[i];
    cdf.back() = 1.0;
    return cdf;
}

void check_context(int c, std::size_t k) {
    if (c < 1 || static_cast<std::size_t>(c) > k) throw InputError("context " + std::to_string(c) + " out of range");
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

Dataset ContextGenerator::sample(std::size_t n, Rng& rng) const {
    if (n == 0) throw InputError("sample size must be positive");
    const Vector cdf = cumulative(probs());
    SampleSet samples(dim());
    samples.reserve(n);
    std::vector<int> contexts;
    contexts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(rng.categorical(cdf)) + 1;
        draw(c, 1, rng, samples);
        contexts.push_back(c);
    }
    return Dataset(std::move(samples), std::move(contexts), static_cast<int>(num_contexts()));
}

StockCoefficients stock_coefficients(int num_contexts) {
    if (num_contexts < 1) throw InputError("num_contexts must be positive");
    StockCoefficients out;
    for (int c = 1; c <= num_contexts; ++c) {
        const double s = num_contexts == 1 ? 0.0 : static_cast<double>(c - 1) / (num_contexts - 1);
        out.mu.push_back(6.0 * s + 1.0);
        out.a.push_back(6.9 * s + 0.1);
        out.b.push_back(15.0 * s + 15.0);
    }
    return out;
}

namespace {

Vector stock_probs(const StockGenConfig& config) {
    if (config.num_contexts < 1) throw InputError("num_contexts must be positive");
    if (config.num_contexts == 1) return {1.0};
    if (!(config.p1 > 0.0 && config.p1 <= 1.0)) throw InputError("p1 must lie in (0, 1]");
    Vector p(static_cast<std::size_t>(config.num_contexts), (1.0 - config.p1) / (config.num_contexts - 1));
    p[0] = config.p1;
    return p;
}

} // namespace

StockGenerator::StockGenerator(const StockGenConfig& config)
    : StockGenerator(config, stock_coefficients(config.num_contexts), stock_probs(config), "stock",
                     to_json(config)) {}

StockGenerator::StockGenerator(const StockGenConfig& config, StockCoefficients coefficients, Vector probs,
                               std::string name, nlohmann::json config_snapshot)
    : name_(std::move(name)), config_json_(std::move(config_snapshot)),
      spreads_are_variances_(config.spreads_are_variances), coef_(std::move(coefficients)),
      probs_(std::move(probs)),
      sd_x_(spread_to_sd(config.lognormal_scale_sq, config.spreads_are_variances, "lognormal_scale_sq")),
      sd_y_(spread_to_sd(config.demand_var, config.spreads_are_variances, "demand_var")) {
    check_simplex(probs_, "context probabilities");
    const std::size_t k = probs_.size();
    if (coef_.mu.size() != k || coef_.a.size() != k || coef_.b.size() != k) {
        throw InputError("stock coefficients must have one entry per context");
    }
}

void StockGenerator::draw(int c, std::size_t m, Rng& rng, SampleSet& out) const {
    check_context(c, probs_.size());
    const auto i = static_cast<std::size_t>(c - 1);
    for (std::size_t s = 0; s < m; ++s) {
        const double x = std::exp(rng.normal(coef_.mu[i], sd_x_));
        const double y = std::max(0.0, rng.normal(coef_.a[i] * x + coef_.b[i], sd_y_));
        const double feature[1] = {x};
        out.add(feature, y);
    }
}

nlohmann::json StockGenerator::metadata() const {
    return {{"generator", name_},
            {"config", config_json_},
            {"true_p", probs_},
            {"coefficients", {{"mu", coef_.mu}, {"a", coef_.a}, {"b", coef_.b}}},
            {"spread_convention", spreads_are_variances_ ? "variance" : "stddev"},
            {"log_price_sd", sd_x_},
            {"demand_sd", sd_y_},
            {"demand_clamped_at_zero", true},
            {"rng", kRngAlgorithm}};
}

ClassifyGenerator::ClassifyGenerator(const ClassifyGenConfig& config)
    : config_(config), probs_(config.probs),
      sd_x2_(spread_to_sd(config.x2_var, config.spreads_are_variances, "x2_var")) {
    check_simplex(probs_, "probs");
    if (config_.mus.size() != probs_.size() || config_.as.size() != probs_.size()) {
        throw InputError("classification coefficients must have one entry per context");
    }
}

void ClassifyGenerator::draw(int c, std::size_t m, Rng& rng, SampleSet& out) const {
    check_context(c, probs_.size());
    const auto i = static_cast<std::size_t>(c - 1);
    const double mu = config_.mus[i];
    for (std::size_t s = 0; s < m; ++s) {
        const double x1 = rng.uniform(mu - 5.0, mu + 5.0);
        const double y = rng.uniform() < sigmoid(x1) ? 1.0 : 0.0;
        const double shift = y == 0.0 ? 2.0 : -2.0;
        const double x2 = rng.normal(x1 + config_.as[i] + shift, sd_x2_);
        const double feature[2] = {x1, x2};
        out.add(feature, y);
    }
}

nlohmann::json ClassifyGenerator::metadata() const {
    return {{"generator", "classify"},
            {"config", to_json(config_)},
            {"true_p", probs_},
            {"coefficients", {{"mu", config_.mus}, {"a", config_.as}}},
            {"spread_convention", config_.spreads_are_variances ? "variance" : "stddev"},
            {"x2_sd", sd_x2_},
            {"rng", kRngAlgorithm}};
}

StockGenerator two_context_generator(const TwoContextConfig& config) {
    if (config.n1 < 1 || config.n2 < 1) throw InputError("both context counts must be positive");
    StockGenConfig spreads;
    spreads.num_contexts = 2;
    spreads.lognormal_scale_sq = config.lognormal_scale_sq;
    spreads.demand_var = config.demand_var;
    spreads.spreads_are_variances = config.spreads_are_variances;
    const double n = static_cast<double>(config.n1 + config.n2);
    const Vector probs{static_cast<double>(config.n1) / n, static_cast<double>(config.n2) / n};
    return StockGenerator(spreads, {config.mu, config.a, config.b}, probs, "stock-two-context", to_json(config));
}

Dataset gen_stock(const StockGenConfig& config) {
    Rng rng(derive_seed(config.seed, {kDataStream}));
    return StockGenerator(config).sample(config.n, rng);
}

Dataset gen_classify(const ClassifyGenConfig& config) {
    Rng rng(derive_seed(config.seed, {kDataStream}));
    return ClassifyGenerator(config).sample(config.n, rng);
}

Dataset gen_stock_two_context(const TwoContextConfig& config) {
    const StockGenerator gen = two_context_generator(config);
    Rng rng(derive_seed(config.seed, {kDataStream}));
    SampleSet samples(1);
    samples.reserve(config.n1 + config.n2);
    gen.draw(1, config.n1, rng, samples);
    gen.draw(2, config.n2, rng, samples);
    std::vector<int> contexts(config.n1, 1);
    contexts.resize(config.n1 + config.n2, 2);
    return Dataset(std::move(samples), std::move(contexts), 2);
}

nlohmann::json to_json(const StockGenConfig& c) {
    return {{"num_contexts", c.num_contexts},     {"n", c.n},
            {"p1", c.p1},                         {"lognormal_scale_sq", c.lognormal_scale_sq},
            {"demand_var", c.demand_var},         {"spreads_are_variances", c.spreads_are_variances},
            {"seed", c.seed}};
}

nlohmann::json to_json(const ClassifyGenConfig& c) {
    return {{"n", c.n},         {"probs", c.probs},   {"mus", c.mus},
            {"as", c.as},       {"x2_var", c.x2_var}, {"spreads_are_variances", c.spreads_are_variances},
            {"seed", c.seed}};
}

nlohmann::json to_json(const TwoContextConfig& c) {
    return {{"n1", c.n1},
            {"n2", c.n2},
            {"mu", c.mu},
            {"a", c.a},
            {"b", c.b},
            {"lognormal_scale_sq", c.lognormal_scale_sq},
            {"demand_var", c.demand_var},
            {"spreads_are_variances", c.spreads_are_variances},
            {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, StockGenConfig& c) {
    reject_unknown(j, {"num_contexts", "n", "p1", "lognormal_scale_sq", "demand_var", "spreads_are_variances", "seed"},
                   "stock generator config");
    read(j, "num_contexts", c.num_contexts);
    read(j, "n", c.n);
    read(j, "p1", c.p1);
    read(j, "lognormal_scale_sq", c.lognormal_scale_sq);
    read(j, "demand_var", c.demand_var);
    read(j, "spreads_are_variances", c.spreads_are_variances);
    read(j, "seed", c.seed);
}

void from_json(const nlohmann::json& j, ClassifyGenConfig& c) {
    reject_unknown(j, {"n", "probs", "mus", "as", "x2_var", "spreads_are_variances", "seed"},
                   "classification generator config");
    read(j, "n", c.n);
    read(j, "probs", c.probs);
    read(j, "mus", c.mus);
    read(j, "as", c.as);
    read(j, "x2_var", c.x2_var);
    read(j, "spreads_are_variances", c.spreads_are_variances);
    read(j, "seed", c.seed);
}

void from_json(const nlohmann::json& j, TwoContextConfig& c) {
    reject_unknown(j, {"n1", "n2", "mu", "a", "b", "lognormal_scale_sq", "demand_var", "spreads_are_variances", "seed"},
                   "two-context generator config");
    read(j, "n1", c.n1);
    read(j, "n2", c.n2);
    read(j, "mu", c.mu);
    read(j, "a", c.a);
    read(j, "b", c.b);
    read(j, "lognormal_scale_sq", c.lognormal_scale_sq);
    read(j, "demand_var", c.demand_var);
    read(j, "spreads_are_variances", c.spreads_are_variances);
    read(j, "seed", c.seed);
}

} // namespace cbrl
