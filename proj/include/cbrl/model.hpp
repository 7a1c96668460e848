#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cbrl {

using Vector = std::vector<double>;

/// Row-major block of samples sharing one feature dimension.
class SampleSet {
  public:
    explicit SampleSet(std::size_t dim = 0) : dim_(dim) {}

    void add(std::span<const double> x, double y);
    void reserve(std::size_t n);
    void clear() noexcept {
        features_.clear();
        responses_.clear();
    }

    std::size_t size() const noexcept { return responses_.size(); }
    bool empty() const noexcept { return responses_.empty(); }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const double> x(std::size_t i) const noexcept {
        return {features_.data() + i * dim_, dim_};
    }
    double y(std::size_t i) const noexcept { return responses_[i]; }

    std::span<const double> features() const noexcept { return features_; }
    std::span<const double> responses() const noexcept { return responses_; }

  private:
    std::size_t dim_;
    Vector features_;
    Vector responses_;
};

/// Per-context sample counts and empirical context frequencies.
struct ContextStats {
    std::vector<std::size_t> counts;
    Vector phat; ///< phat[c] = counts[c] / n
};

/**
Samples tagged with 1-based context ids.

Construction enforces that every retained context is observed at least once:
declared-but-unobserved contexts are dropped, surviving ids are re-indexed
contiguously, and a warning is recorded. `original_labels()[c-1]` gives the
label that context c carried before re-indexing.
*/
class Dataset {
  public:
    /// `contexts[i]` must lie in [1, num_contexts].
    Dataset(SampleSet samples, std::vector<int> contexts, int num_contexts);

    /// Maps arbitrary integer labels to 1..K in ascending label order.
    static Dataset from_labels(SampleSet samples, const std::vector<long long>& labels);

    std::size_t size() const noexcept { return samples_.size(); }
    std::size_t dim() const noexcept { return samples_.dim(); }
    int num_contexts() const noexcept { return num_contexts_; }

    const SampleSet& samples() const noexcept { return samples_; }
    int context(std::size_t i) const noexcept { return contexts_[i]; }
    const std::vector<int>& contexts() const noexcept { return contexts_; }

    const ContextStats& stats() const noexcept { return stats_; }
    const std::vector<long long>& original_labels() const noexcept { return original_labels_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  private:
    Dataset() = default;
    void finalize(std::vector<long long> labels_for_ids, int declared);

    SampleSet samples_;
    std::vector<int> contexts_;
    int num_contexts_ = 0;
    ContextStats stats_;
    std::vector<long long> original_labels_;
    std::vector<std::string> warnings_;
};

/// Box constraints; infinite entries mean unbounded.
struct Bounds {
    Vector lower;
    Vector upper;

    static Bounds unbounded(std::size_t k) {
        return {Vector(k, -std::numeric_limits<double>::infinity()),
                Vector(k, std::numeric_limits<double>::infinity())};
    }
    std::size_t size() const noexcept { return lower.size(); }
    void project(std::span<double> values) const noexcept;
    bool contains(std::span<const double> values) const noexcept;
};

/// Parameter values together with the box they must stay in.
struct ParameterVector {
    Vector values;
    Bounds bounds;

    /// Builds a feasible vector by projecting `values` onto `bounds`.
    static ParameterVector projected(Vector values, Bounds bounds);
    std::size_t size() const noexcept { return values.size(); }
};

/// Closed-form minimizer of an empirical risk.
struct ContextMinimum {
    Vector theta;
    double value;
};

/**
Pointwise loss with subgradient and parameter domain.

Implementations must be convex in theta in expectation; the robust descent
relies on it. All methods are const and thread-safe.
*/
class LossModel {
  public:
    virtual ~LossModel() = default;

    virtual std::string name() const = 0;
    virtual std::size_t num_params(std::size_t feature_dim) const = 0;
    virtual Bounds domain(std::size_t feature_dim) const = 0;

    virtual double loss(std::span<const double> theta, std::span<const double> x, double y) const = 0;

    /// grad += scale * d loss / d theta.
    virtual void add_subgradient(std::span<const double> theta, std::span<const double> x, double y,
                                 double scale, std::span<double> grad) const = 0;

    /// Mean loss over `samples`; if `grad` is nonempty it receives the mean
    /// subgradient (overwritten, not accumulated).
    virtual double risk(std::span<const double> theta, const SampleSet& samples,
                        std::span<double> grad) const;

    /// Exact empirical minimizer, for losses that have one.
    virtual std::optional<ContextMinimum> closed_form_min(const SampleSet&) const { return std::nullopt; }

    /// Multiplier applied to descent step sizes to normalize slope magnitude.
    virtual double step_scale() const { return 1.0; }

    /// Step size used by the robust descent when none is configured.
    virtual double default_step_size() const { return 0.01; }

    /// 0-1 error of thresholded predictions; only classifiers support it.
    virtual bool is_classifier() const { return false; }
    virtual double error_rate(std::span<const double> theta, const SampleSet& samples) const;
};

/// Splits a dataset into per-context sample sets, indexed by context id - 1.
/// Input order is preserved within each part.
std::vector<SampleSet> partition_by_context(const Dataset& dataset);

/// Mean pointwise loss over one context's samples. Throws InputError on an empty part.
double empirical_conditional_risk(const LossModel& loss, std::span<const double> theta,
                                  const SampleSet& part);

} // namespace cbrl
