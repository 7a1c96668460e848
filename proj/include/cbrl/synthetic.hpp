#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "json.hpp"

#include "cbrl/model.hpp"
#include "cbrl/rng.hpp"

namespace cbrl {

/// A family of context-conditional laws p(x, y | c) with a true context distribution.
class ContextGenerator {
  public:
    virtual ~ContextGenerator() = default;

    virtual std::size_t num_contexts() const = 0;
    /// True context probabilities, indexed by c - 1.
    virtual const Vector& probs() const = 0;
    virtual std::size_t dim() const = 0;

    /// Appends m draws from context c (1-based) to `out`.
    virtual void draw(int c, std::size_t m, Rng& rng, SampleSet& out) const = 0;

    /// Config, true probabilities and per-context coefficients.
    virtual nlohmann::json metadata() const = 0;

    /// n samples with c ~ Categorical(probs()) drawn first, then (x, y) | c.
    Dataset sample(std::size_t n, Rng& rng) const;
};

struct StockGenConfig {
    int num_contexts = 10;
    std::size_t n = 400;
    double p1 = 0.70;
    /// Spread of ln x; a variance unless `spreads_are_variances` is false.
    double lognormal_scale_sq = 0.25;
    /// Spread of demand around a_c x + b_c, same convention.
    double demand_var = 4.0;
    bool spreads_are_variances = true;
    std::uint64_t seed = 0;
};

/// Per-context coefficients of the stock generator.
struct StockCoefficients {
    Vector mu; ///< mean of ln x
    Vector a;  ///< demand slope in x
    Vector b;  ///< demand intercept
};

/// mu_c = 6 (c-1)/(K-1) + 1, a_c = 6.9 (c-1)/(K-1) + 0.1, b_c = 15 (c-1)/(K-1) + 15; K = 1 uses c = 1 values.
StockCoefficients stock_coefficients(int num_contexts);

/**
x | c ~ LogNormal(mu_c, s_x), y | x, c ~ Normal(a_c x + b_c, s_y), y clamped at 0.

Context 1 has probability p1 and the rest share 1 - p1 equally.
*/
class StockGenerator final : public ContextGenerator {
  public:
    explicit StockGenerator(const StockGenConfig& config);
    /// Arbitrary coefficients and probabilities; spreads follow `config`.
    /// `name` and `config_snapshot` are what metadata() reports.
    StockGenerator(const StockGenConfig& config, StockCoefficients coefficients, Vector probs,
                   std::string name, nlohmann::json config_snapshot);

    std::size_t num_contexts() const override { return probs_.size(); }
    const Vector& probs() const override { return probs_; }
    std::size_t dim() const override { return 1; }
    void draw(int c, std::size_t m, Rng& rng, SampleSet& out) const override;
    nlohmann::json metadata() const override;

    const StockCoefficients& coefficients() const noexcept { return coef_; }
    double log_price_sd() const noexcept { return sd_x_; }
    double demand_sd() const noexcept { return sd_y_; }

  private:
    std::string name_;
    nlohmann::json config_json_;
    bool spreads_are_variances_;
    StockCoefficients coef_;
    Vector probs_;
    double sd_x_;
    double sd_y_;
};

struct ClassifyGenConfig {
    std::size_t n = 1000;
    Vector probs{0.8, 0.1, 0.1};
    Vector mus{-1.0, 0.0, 1.0};
    Vector as{-8.0, 0.0, 8.0};
    double x2_var = 4.0;
    bool spreads_are_variances = true;
    std::uint64_t seed = 0;
};

/**
x1 | c ~ Uniform[mu_c - 5, mu_c + 5], y ~ Bernoulli(sigmoid(x1)),
x2 ~ Normal(x1 + a_c + 2 (1{y=0} - 1{y=1}), x2_var). Features are (x1, x2).
*/
class ClassifyGenerator final : public ContextGenerator {
  public:
    explicit ClassifyGenerator(const ClassifyGenConfig& config);

    std::size_t num_contexts() const override { return probs_.size(); }
    const Vector& probs() const override { return probs_; }
    std::size_t dim() const override { return 2; }
    void draw(int c, std::size_t m, Rng& rng, SampleSet& out) const override;
    nlohmann::json metadata() const override;

  private:
    ClassifyGenConfig config_;
    Vector probs_;
    double sd_x2_;
};

/**
Two-context stock instance with fixed counts n1, n2. The defaults put both
contexts at price ~5 (mu = ln 5, tiny spread) with demand centred on 15 and
35, so with r = 10 the per-context optima sit near the demand medians and the
empirical excess risks cross near theta = 25.
*/
struct TwoContextConfig {
    std::size_t n1 = 90;
    std::size_t n2 = 10;
    Vector mu{1.6094379124341003, 1.6094379124341003};
    Vector a{0.0, 0.0};
    Vector b{15.0, 35.0};
    double lognormal_scale_sq = 0.01;
    double demand_var = 4.0;
    bool spreads_are_variances = true;
    std::uint64_t seed = 0;
};

/// Generator for the two-context law; probabilities are n1/n and n2/n.
StockGenerator two_context_generator(const TwoContextConfig& config);

Dataset gen_stock(const StockGenConfig& config);
Dataset gen_classify(const ClassifyGenConfig& config);
/// Exactly n1 samples from context 1 followed by n2 from context 2.
Dataset gen_stock_two_context(const TwoContextConfig& config);

nlohmann::json to_json(const StockGenConfig& config);
nlohmann::json to_json(const ClassifyGenConfig& config);
nlohmann::json to_json(const TwoContextConfig& config);
/// Missing keys keep defaults; unknown keys are rejected with InputError.
void from_json(const nlohmann::json& j, StockGenConfig& config);
void from_json(const nlohmann::json& j, ClassifyGenConfig& config);
void from_json(const nlohmann::json& j, TwoContextConfig& config);

} // namespace cbrl
