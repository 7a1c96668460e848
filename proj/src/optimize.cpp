#include "cbrl/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbrl/confidence.hpp"
#include "cbrl/error.hpp"

namespace cbrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// max-norm of x - P(x - g): zero exactly at constrained stationary points
double projected_gradient_norm(const Bounds& box, std::span<const double> x, std::span<const double> g) {
    Vector probe(x.begin(), x.end());
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] -= g[i];
    box.project(probe);
    return max_abs_diff(x, probe);
}

void check_options(const OptimizerOptions& opts) {
    if (opts.step_size && !(*opts.step_size > 0.0 && std::isfinite(*opts.step_size))) {
        throw InputError("step size must be positive");
    }
    if (opts.max_iters < 0) throw InputError("max_iters must be nonnegative");
    if (!(opts.grad_tol >= 0.0)) throw InputError("grad_tol must be nonnegative");
    if (!(opts.obj_rel_tol >= 0.0)) throw InputError("obj_rel_tol must be nonnegative");
}

double base_step(const LossModel& loss, const OptimizerOptions& opts) {
    return opts.step_size.value_or(loss.default_step_size()) * loss.step_scale();
}

} // namespace

std::string to_string(Method method) {
    switch (method) {
    case Method::erm:
        return "erm";
    case Method::minimax_group_dro:
        return "minimax-group-dro";
    case Method::robust:
        return "robust";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "erm") return Method::erm;
    if (name == "minimax" || name == "minimax-group-dro" || name == "group-dro") return Method::minimax_group_dro;
    if (name == "robust") return Method::robust;
    throw InputError("unknown method '" + name + "' (expected erm, minimax or robust)");
}

RiskMinimum minimize_risk(const LossModel& loss, const SampleSet& samples, const OptimizerOptions& opts) {
    check_options(opts);
    if (samples.empty()) throw InputError("empty context");
    if (auto exact = loss.closed_form_min(samples)) return {std::move(exact->theta), exact->value, 0, true};

    const std::size_t k = loss.num_params(samples.dim());
    const Bounds box = loss.domain(samples.dim());
    Vector x(k, 0.0);
    box.project(x);
    Vector g(k), x_new(k), g_new(k);
    double f = loss.risk(x, samples, g);

    double alpha = base_step(loss, opts);
    RiskMinimum out;
    for (int it = 0;; ++it) {
        if (projected_gradient_norm(box, x, g) <= opts.grad_tol) {
            out.converged = true;
            out.iterations = it;
            break;
        }
        if (it >= opts.max_iters) {
            out.iterations = it;
            break;
        }
        double f_new = kInf;
        bool accepted = false;
        for (int halvings = 0; halvings < 100; ++halvings) {
            for (std::size_t j = 0; j < k; ++j) x_new[j] = x[j] - alpha * g[j];
            box.project(x_new);
            f_new = loss.risk(x_new, samples, g_new);
            double decrease_bound = 0.0;
            double step_sq = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double s = x_new[j] - x[j];
                decrease_bound += g[j] * s;
                step_sq += s * s;
            }
            // the slack absorbs rounding in f, which otherwise stalls the search near the optimum
            const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
            if (std::isfinite(f_new) && f_new <= f + decrease_bound + step_sq / (2.0 * alpha) + slack) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted || x_new == x) {
            // no representable descent step left; the iterate is as good as it gets
            out.iterations = it;
            break;
        }
        double ss = 0.0, sy = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double s = x_new[j] - x[j];
            const double y = g_new[j] - g[j];
            ss += s * s;
            sy += s * y;
        }
        alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : std::min(2.0 * alpha, 1e12);
        std::swap(x, x_new);
        std::swap(g, g_new);
        f = f_new;
    }
    out.theta = std::move(x);
    out.value = f;
    return out;
}

ContextMinima per_context_min(const LossModel& loss, const Dataset& dataset, const OptimizerOptions& opts) {
    const auto parts = partition_by_context(dataset);
    ContextMinima out;
    out.rhats.reserve(parts.size());
    for (std::size_t c = 0; c < parts.size(); ++c) {
        RiskMinimum m = minimize_risk(loss, parts[c], opts);
        if (!m.converged) {
            out.warnings.push_back("context " + std::to_string(c + 1) + " minimization stopped after " +
                                   std::to_string(m.iterations) + " iterations without converging");
        }
        out.rhats.push_back(m.value);
        out.thetas.push_back(std::move(m.theta));
        out.converged.push_back(m.converged);
    }
    return out;
}

FitResult fit_erm(const LossModel& loss, const Dataset& dataset, const OptimizerOptions& opts) {
    RiskMinimum m = minimize_risk(loss, dataset.samples(), opts);
    FitResult out;
    out.method = Method::erm;
    out.theta = ParameterVector::projected(std::move(m.theta), loss.domain(dataset.dim()));
    out.objective = m.value;
    out.iterations = m.iterations;
    out.converged = m.converged;
    out.stop_reason = m.iterations == 0 && m.converged ? "closed-form" : (m.converged ? "gradient" : "max-iters");
    out.step_size = base_step(loss, opts);
    out.warnings = dataset.warnings();
    if (!m.converged) out.warnings.push_back("ERM stopped after " + std::to_string(m.iterations) + " iterations");
    return out;
}

FitResult fit_group_dro(const LossModel& loss, const Dataset& dataset, const OptimizerOptions& opts,
                        double step_size_q, int iterations) {
    check_options(opts);
    if (!(step_size_q > 0.0)) throw InputError("group-DRO weight step must be positive");
    if (iterations < 0) throw InputError("group-DRO iteration count must be nonnegative");

    const auto parts = partition_by_context(dataset);
    const std::size_t K = parts.size();
    const std::size_t k = loss.num_params(dataset.dim());
    const Bounds box = loss.domain(dataset.dim());
    const double eta = opts.step_size.value_or(0.1) * loss.step_scale();

    Vector theta(k, 0.0);
    box.project(theta);
    Vector log_q(K, -std::log(static_cast<double>(K)));
    Vector risks(K), grad(k), q(K);
    std::vector<Vector> grads(K, Vector(k));

    Vector best_theta = theta;
    double best_value = kInf;
    for (int it = 0; it <= iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t c = 0; c < K; ++c) risks[c] = loss.risk(theta, parts[c], grads[c]);
        const double worst = *std::max_element(risks.begin(), risks.end());
        if (worst < best_value) {
            best_value = worst;
            best_theta = theta;
        }
        if (it == iterations) break;

        for (std::size_t c = 0; c < K; ++c) log_q[c] += step_size_q * risks[c];
        const double peak = *std::max_element(log_q.begin(), log_q.end());
        double z = 0.0;
        for (std::size_t c = 0; c < K; ++c) z += std::exp(log_q[c] - peak);
        const double log_z = peak + std::log(z);
        for (std::size_t c = 0; c < K; ++c) {
            log_q[c] -= log_z;
            q[c] = std::exp(log_q[c]);
        }
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t j = 0; j < k; ++j) grad[j] += q[c] * grads[c][j];
        }
        for (std::size_t j = 0; j < k; ++j) theta[j] -= eta * grad[j];
        box.project(theta);
    }

    FitResult out;
    out.method = Method::minimax_group_dro;
    out.theta = ParameterVector::projected(std::move(best_theta), box);
    out.objective = best_value;
    out.iterations = iterations;
    out.converged = true;
    out.stop_reason = "iterations";
    out.step_size = eta;
    out.warnings = dataset.warnings();
    return out;
}

LeastFavorable worst_case_excess(const LossModel& loss, const std::vector<SampleSet>& parts, const Vector& phat,
                                 const Vector& rhats, std::span<const double> theta, double eps_bits,
                                 std::vector<Vector>* grads) {
    const std::size_t K = parts.size();
    if (phat.size() != K || rhats.size() != K) throw InputError("context count mismatch");
    Vector deltas(K);
    if (grads) grads->resize(K);
    for (std::size_t c = 0; c < K; ++c) {
        std::span<double> g;
        if (grads) {
            (*grads)[c].resize(theta.size());
            g = (*grads)[c];
        }
        deltas[c] = loss.risk(theta, parts[c], g) - rhats[c];
    }
    return solve_least_favorable(ExcessProfile::make(phat, std::move(deltas), rhats), eps_bits);
}

FitResult fit_robust(const LossModel& loss, const Dataset& dataset, double beta, const OptimizerOptions& opts) {
    check_options(opts);
    const auto& stats = dataset.stats();
    const std::size_t K = stats.phat.size();
    double eps;
    if (opts.eps_override) {
        if (!(*opts.eps_override >= 0.0)) throw InputError("radius must be nonnegative");
        eps = *opts.eps_override;
    } else {
        eps = epsilon_bits(dataset.size(), K, beta);
    }

    const auto parts = partition_by_context(dataset);
    const ContextMinima minima = per_context_min(loss, dataset, opts);
    const FitResult erm = fit_erm(loss, dataset, opts);
    const Bounds box = loss.domain(dataset.dim());
    const std::size_t k = loss.num_params(dataset.dim());
    const double eta = base_step(loss, opts);

    Vector theta = erm.theta.values;
    Vector grad(k);
    std::vector<Vector> grads(K);

    FitResult out;
    out.method = Method::robust;
    if (!opts.eps_override) out.beta = beta;
    out.eps_bits = eps;
    out.rhats = minima.rhats;
    out.step_size = eta;
    out.warnings = dataset.warnings();
    out.warnings.insert(out.warnings.end(), minima.warnings.begin(), minima.warnings.end());
    out.stop_reason = "max-iters";

    Vector best_theta = theta;
    LeastFavorable best_inner;
    double best_value = kInf;
    double previous = kInf;
    int it = 0;
    for (;; ++it) {
        LeastFavorable lf;
        try {
            lf = worst_case_excess(loss, parts, stats.phat, minima.rhats, theta, eps, &grads);
        } catch (const std::exception& e) {
            throw SolverError("inner problem failed at iteration " + std::to_string(it) + ": " + e.what());
        }
        const double value = lf.objective;
        if (value < best_value) {
            best_value = value;
            best_theta = theta;
            best_inner = lf;
        }
        if (it > 0 && std::abs(previous - value) <= opts.obj_rel_tol * std::max(1.0, std::abs(previous))) {
            out.converged = true;
            out.stop_reason = "objective";
            break;
        }
        if (it >= opts.max_iters) break;
        previous = value;

        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t j = 0; j < k; ++j) grad[j] += lf.p_star[c] * grads[c][j];
        }
        Vector next = theta;
        for (std::size_t j = 0; j < k; ++j) next[j] -= eta * grad[j];
        box.project(next);
        const double moved = max_abs_diff(next, theta);
        theta = std::move(next);
        if (moved <= opts.grad_tol) {
            // evaluate the final point once more so it can compete for best
            ++it;
            try {
                lf = worst_case_excess(loss, parts, stats.phat, minima.rhats, theta, eps, nullptr);
            } catch (const std::exception& e) {
                throw SolverError("inner problem failed at iteration " + std::to_string(it) + ": " + e.what());
            }
            if (lf.objective < best_value) {
                best_value = lf.objective;
                best_theta = theta;
                best_inner = lf;
            }
            out.converged = true;
            out.stop_reason = "step";
            break;
        }
    }
    if (!out.converged) out.warnings.push_back("robust descent hit the iteration limit");

    out.theta = ParameterVector::projected(std::move(best_theta), box);
    out.objective = best_value;
    out.inner = std::move(best_inner);
    out.iterations = it;
    return out;
}

} // namespace cbrl
