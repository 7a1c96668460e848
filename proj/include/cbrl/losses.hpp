#pragma once

#include <memory>
#include <string>

#include "cbrl/model.hpp"

namespace cbrl {

/// Stock-control loss theta * x - r * min(theta, y); x is the unit cost, y the demand.
double newsvendor_loss(double theta, double x, double y, double r);

/// x - r * 1{theta < y}; at the kink theta == y this is the right derivative x.
double newsvendor_subgradient(double theta, double x, double y, double r);

/**
Exact minimizer of the empirical newsvendor risk over [0, theta_max].

If mean(x) >= r stocking never pays and theta* = 0. Otherwise theta* is the
k-th smallest demand with k = ceil(n (1 - mean(x) / r)), clipped to the
domain; on a flat segment the smallest minimizer is returned.
*/
ContextMinimum newsvendor_context_min(const SampleSet& samples, double r, double theta_max);

class NewsvendorLoss final : public LossModel {
  public:
    NewsvendorLoss(double r, double theta_max);

    double price() const noexcept { return r_; }
    double theta_max() const noexcept { return theta_max_; }

    std::string name() const override { return "newsvendor"; }
    std::size_t num_params(std::size_t) const override { return 1; }
    Bounds domain(std::size_t) const override { return {{0.0}, {theta_max_}}; }

    double loss(std::span<const double> theta, std::span<const double> x, double y) const override;
    void add_subgradient(std::span<const double> theta, std::span<const double> x, double y, double scale,
                         std::span<double> grad) const override;
    double risk(std::span<const double> theta, const SampleSet& samples, std::span<double> grad) const override;

    std::optional<ContextMinimum> closed_form_min(const SampleSet& samples) const override {
        return newsvendor_context_min(samples, r_, theta_max_);
    }
    double step_scale() const override { return 1.0 / r_; }
    double default_step_size() const override { return 0.01; }

  private:
    double r_;
    double theta_max_;
};

/// Logits are clamped to [-kLogitClamp, kLogitClamp] before use.
inline constexpr double kLogitClamp = 35.0;

/// Cross-entropy of a linear logistic model. With `add_bias` a constant
/// feature 1 is appended, so theta has d + 1 entries with the bias last.
class LogisticLoss final : public LossModel {
  public:
    explicit LogisticLoss(bool add_bias = true) : add_bias_(add_bias) {}

    bool add_bias() const noexcept { return add_bias_; }

    /// Clamped x~^T theta.
    double logit(std::span<const double> theta, std::span<const double> x) const;

    std::string name() const override { return "logistic"; }
    std::size_t num_params(std::size_t feature_dim) const override { return feature_dim + (add_bias_ ? 1 : 0); }
    Bounds domain(std::size_t feature_dim) const override { return Bounds::unbounded(num_params(feature_dim)); }

    double loss(std::span<const double> theta, std::span<const double> x, double y) const override;
    void add_subgradient(std::span<const double> theta, std::span<const double> x, double y, double scale,
                         std::span<double> grad) const override;
    double risk(std::span<const double> theta, const SampleSet& samples, std::span<double> grad) const override;

    double default_step_size() const override { return 0.05; }
    bool is_classifier() const override { return true; }
    double error_rate(std::span<const double> theta, const SampleSet& samples) const override;

  private:
    bool add_bias_;
};

/// Loss by name: "newsvendor" (uses r, theta_max) or "logistic" (uses add_bias).
std::unique_ptr<LossModel> make_loss(const std::string& name, double r = 10.0, double theta_max = 100.0,
                                     bool add_bias = true);

} // namespace cbrl
