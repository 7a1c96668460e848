#include "cbrl/model.hpp"

#include <algorithm>
#include <map>

#include "cbrl/error.hpp"

namespace cbrl {

void SampleSet::add(std::span<const double> x, double y) {
    if (x.size() != dim_) {
        throw InputError("feature dimension mismatch: expected " + std::to_string(dim_) + ", got " +
                         std::to_string(x.size()));
    }
    features_.insert(features_.end(), x.begin(), x.end());
    responses_.push_back(y);
}

void SampleSet::reserve(std::size_t n) {
    features_.reserve(n * dim_);
    responses_.reserve(n);
}

Dataset::Dataset(SampleSet samples, std::vector<int> contexts, int num_contexts)
    : samples_(std::move(samples)), contexts_(std::move(contexts)) {
    if (num_contexts < 1) throw InputError("num_contexts must be positive");
    if (contexts_.size() != samples_.size()) throw InputError("context label count differs from sample count");
    for (int c : contexts_) {
        if (c < 1 || c > num_contexts) {
            throw InputError("context id " + std::to_string(c) + " outside [1, " + std::to_string(num_contexts) +
                             "]");
        }
    }
    std::vector<long long> labels(static_cast<std::size_t>(num_contexts));
    for (int c = 1; c <= num_contexts; ++c) labels[static_cast<std::size_t>(c - 1)] = c;
    finalize(std::move(labels), num_contexts);
}

Dataset Dataset::from_labels(SampleSet samples, const std::vector<long long>& labels) {
    if (labels.size() != samples.size()) throw InputError("context label count differs from sample count");
    std::map<long long, int> ids;
    for (long long l : labels) ids.emplace(l, 0);
    std::vector<long long> sorted;
    int next = 1;
    for (auto& [label, id] : ids) {
        id = next++;
        sorted.push_back(label);
    }
    Dataset d;
    d.samples_ = std::move(samples);
    d.contexts_.reserve(labels.size());
    for (long long l : labels) d.contexts_.push_back(ids.at(l));
    const int k = static_cast<int>(sorted.size());
    if (k == 0) throw InputError("dataset has no samples");
    d.finalize(std::move(sorted), k);
    return d;
}

void Dataset::finalize(std::vector<long long> labels_for_ids, int declared) {
    if (samples_.empty()) throw InputError("dataset has no samples");
    std::vector<std::size_t> counts(static_cast<std::size_t>(declared), 0);
    for (int c : contexts_) ++counts[static_cast<std::size_t>(c - 1)];

    // drop unobserved contexts and re-index the rest
    std::vector<int> remap(static_cast<std::size_t>(declared), 0);
    int next = 1;
    for (int c = 1; c <= declared; ++c) {
        const auto idx = static_cast<std::size_t>(c - 1);
        if (counts[idx] == 0) {
            warnings_.push_back("context " + std::to_string(labels_for_ids[idx]) +
                                " has no samples and was dropped");
            continue;
        }
        remap[idx] = next++;
        original_labels_.push_back(labels_for_ids[idx]);
        stats_.counts.push_back(counts[idx]);
    }
    for (int& c : contexts_) c = remap[static_cast<std::size_t>(c - 1)];
    num_contexts_ = next - 1;

    const double n = static_cast<double>(samples_.size());
    stats_.phat.reserve(stats_.counts.size());
    for (std::size_t cnt : stats_.counts) stats_.phat.push_back(static_cast<double>(cnt) / n);
}

void Bounds::project(std::span<double> values) const noexcept {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::clamp(values[i], lower[i], upper[i]);
}

bool Bounds::contains(std::span<const double> values) const noexcept {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= lower[i] && values[i] <= upper[i])) return false;
    }
    return true;
}

ParameterVector ParameterVector::projected(Vector values, Bounds bounds) {
    if (values.size() != bounds.size()) throw InputError("parameter and bounds dimension mismatch");
    bounds.project(values);
    return {std::move(values), std::move(bounds)};
}

double LossModel::risk(std::span<const double> theta, const SampleSet& samples, std::span<double> grad) const {
    if (samples.empty()) throw InputError("empty context");
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        total += loss(theta, samples.x(i), samples.y(i));
        if (!grad.empty()) add_subgradient(theta, samples.x(i), samples.y(i), inv_n, grad);
    }
    return total * inv_n;
}

double LossModel::error_rate(std::span<const double>, const SampleSet&) const {
    throw InputError("loss '" + name() + "' does not define an error rate");
}

std::vector<SampleSet> partition_by_context(const Dataset& dataset) {
    std::vector<SampleSet> parts;
    parts.reserve(static_cast<std::size_t>(dataset.num_contexts()));
    for (int c = 0; c < dataset.num_contexts(); ++c) {
        parts.emplace_back(dataset.dim());
        parts.back().reserve(dataset.stats().counts[static_cast<std::size_t>(c)]);
    }
    const SampleSet& s = dataset.samples();
    for (std::size_t i = 0; i < s.size(); ++i) {
        parts[static_cast<std::size_t>(dataset.context(i) - 1)].add(s.x(i), s.y(i));
    }
    return parts;
}

double empirical_conditional_risk(const LossModel& loss, std::span<const double> theta, const SampleSet& part) {
    if (part.empty()) throw InputError("empty context");
    return loss.risk(theta, part, {});
}

} // namespace cbrl
