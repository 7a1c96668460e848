#include "cbrl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cbrl/error.hpp"

namespace cbrl {

double newsvendor_loss(double theta, double x, double y, double r) {
    if (!(theta >= 0.0)) throw InputError("stock level outside the domain");
    return theta * x - r * std::min(theta, y);
}

double newsvendor_subgradient(double theta, double x, double y, double r) {
    if (!(theta >= 0.0)) throw InputError("stock level outside the domain");
    return theta < y ? x - r : x;
}

ContextMinimum newsvendor_context_min(const SampleSet& samples, double r, double theta_max) {
    if (samples.empty()) throw InputError("empty context");
    const std::size_t n = samples.size();
    double mean_x = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_x += samples.x(i)[0];
    mean_x /= static_cast<double>(n);

    double theta = 0.0;
    if (mean_x < r) {
        const double target = static_cast<double>(n) * (1.0 - mean_x / r);
        // shave round-off so an exact integer target is not bumped up a rank
        const auto k = static_cast<std::size_t>(std::ceil(target - 1e-12 * static_cast<double>(n)));
        if (k >= 1) {
            Vector demand(samples.responses().begin(), samples.responses().end());
            const auto kth = demand.begin() + static_cast<std::ptrdiff_t>(std::min(k, n) - 1);
            std::nth_element(demand.begin(), kth, demand.end());
            theta = std::clamp(*kth, 0.0, theta_max);
        }
    }
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += theta * samples.x(i)[0] - r * std::min(theta, samples.y(i));
    return {{theta}, value / static_cast<double>(n)};
}

NewsvendorLoss::NewsvendorLoss(double r, double theta_max) : r_(r), theta_max_(theta_max) {
    if (!(r > 0.0)) throw InputError("newsvendor price r must be positive");
    if (!(theta_max > 0.0)) throw InputError("newsvendor theta_max must be positive");
}

double NewsvendorLoss::loss(std::span<const double> theta, std::span<const double> x, double y) const {
    if (theta[0] > theta_max_) throw InputError("stock level outside the domain");
    return newsvendor_loss(theta[0], x[0], y, r_);
}

void NewsvendorLoss::add_subgradient(std::span<const double> theta, std::span<const double> x, double y,
                                     double scale, std::span<double> grad) const {
    if (theta[0] > theta_max_) throw InputError("stock level outside the domain");
    grad[0] += scale * newsvendor_subgradient(theta[0], x[0], y, r_);
}

double NewsvendorLoss::risk(std::span<const double> theta, const SampleSet& samples, std::span<double> grad) const {
    if (samples.empty()) throw InputError("empty context");
    const double t = theta[0];
    if (!(t >= 0.0 && t <= theta_max_)) throw InputError("stock level outside the domain");
    double total = 0.0;
    double slope = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = samples.x(i)[0];
        const double y = samples.y(i);
        total += t * x - r_ * std::min(t, y);
        slope += t < y ? x - r_ : x;
    }
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    if (!grad.empty()) grad[0] = slope * inv_n;
    return total * inv_n;
}

double LogisticLoss::logit(std::span<const double> theta, std::span<const double> x) const {
    if (theta.size() != num_params(x.size())) throw InputError("logistic parameter dimension mismatch");
    double z = add_bias_ ? theta[x.size()] : 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) z += theta[j] * x[j];
    return std::clamp(z, -kLogitClamp, kLogitClamp);
}

namespace {

// -y log(sigma(z)) - (1 - y) log(1 - sigma(z)), stable for either sign of z
inline double cross_entropy(double z, double y) {
    return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

double LogisticLoss::loss(std::span<const double> theta, std::span<const double> x, double y) const {
    return cross_entropy(logit(theta, x), y);
}

void LogisticLoss::add_subgradient(std::span<const double> theta, std::span<const double> x, double y,
                                   double scale, std::span<double> grad) const {
    const double residual = scale * (sigmoid(logit(theta, x)) - y);
    for (std::size_t j = 0; j < x.size(); ++j) grad[j] += residual * x[j];
    if (add_bias_) grad[x.size()] += residual;
}

double LogisticLoss::risk(std::span<const double> theta, const SampleSet& samples, std::span<double> grad) const {
    if (samples.empty()) throw InputError("empty context");
    const std::size_t d = samples.dim();
    if (theta.size() != num_params(d)) throw InputError("logistic parameter dimension mismatch");
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto x = samples.x(i);
        double z = add_bias_ ? theta[d] : 0.0;
        for (std::size_t j = 0; j < d; ++j) z += theta[j] * x[j];
        z = std::clamp(z, -kLogitClamp, kLogitClamp);
        total += cross_entropy(z, samples.y(i));
        if (!grad.empty()) {
            const double residual = sigmoid(z) - samples.y(i);
            for (std::size_t j = 0; j < d; ++j) grad[j] += residual * x[j];
            if (add_bias_) grad[d] += residual;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (double& g : grad) g *= inv_n;
    return total * inv_n;
}

double LogisticLoss::error_rate(std::span<const double> theta, const SampleSet& samples) const {
    if (samples.empty()) throw InputError("empty context");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool predicted = logit(theta, samples.x(i)) >= 0.0;
        const bool actual = samples.y(i) >= 0.5;
        wrong += predicted != actual ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(samples.size());
}

std::unique_ptr<LossModel> make_loss(const std::string& name, double r, double theta_max, bool add_bias) {
    if (name == "newsvendor") return std::make_unique<NewsvendorLoss>(r, theta_max);
    if (name == "logistic") return std::make_unique<LogisticLoss>(add_bias);
    throw InputError("unknown loss '" + name + "' (expected newsvendor or logistic)");
}

} // namespace cbrl
