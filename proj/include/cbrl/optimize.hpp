#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbrl/inner_solver.hpp"
#include "cbrl/model.hpp"

namespace cbrl {

struct OptimizerOptions {
    /// Descent step; when unset the loss model's default is used.
    std::optional<double> step_size;
    int max_iters = 50000;
    double grad_tol = 1e-8;
    double obj_rel_tol = 1e-10;
    /// Fixed KL radius for fit_robust, bypassing the one derived from beta.
    std::optional<double> eps_override;
};

enum class Method { erm, minimax_group_dro, robust };

std::string to_string(Method method);
/// Accepts "erm", "minimax" / "minimax-group-dro" / "group-dro", "robust".
Method parse_method(const std::string& name);

struct FitResult {
    ParameterVector theta;
    Method method = Method::erm;
    std::optional<double> beta;
    std::optional<double> eps_bits;
    double objective = 0.0;
    /// Inner solution at theta (robust only).
    std::optional<LeastFavorable> inner;
    Vector rhats; ///< per-context minimum risks (robust only)
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
    double step_size = 0.0; ///< effective step after loss scaling
    std::vector<std::string> warnings;
};

/// Result of minimizing one empirical risk.
struct RiskMinimum {
    Vector theta;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/**
Minimizes the mean loss over `samples` from theta = 0 (projected).

Uses the loss model's closed form when available. Otherwise runs projected
gradient descent: each trial step is the Barzilai-Borwein length (the
configured step for the first iteration), halved until a sufficient-decrease
test holds, so accepted objectives never increase. Stops when the projected
gradient's max-norm is <= grad_tol or after max_iters iterations.
*/
RiskMinimum minimize_risk(const LossModel& loss, const SampleSet& samples, const OptimizerOptions& opts);

struct ContextMinima {
    Vector rhats;
    std::vector<Vector> thetas;
    std::vector<bool> converged;
    std::vector<std::string> warnings;
};

ContextMinima per_context_min(const LossModel& loss, const Dataset& dataset, const OptimizerOptions& opts);

/// Minimizes sum_c phat_c R_c(theta), i.e. the pooled mean loss.
FitResult fit_erm(const LossModel& loss, const Dataset& dataset, const OptimizerOptions& opts);

/**
Group-DRO baseline for min_theta max_c R_c(theta).

Each iteration updates the context weights multiplicatively in log space,
q_c <- q_c exp(step_size_q R_c(theta)) normalized, then takes a projected
step theta <- theta - eta * step_scale * sum_c q_c grad R_c(theta) with
eta = opts.step_size (default 0.1). Starts at theta = 0 and returns the
visited iterate with the smallest max_c R_c.
*/
FitResult fit_group_dro(const LossModel& loss, const Dataset& dataset, const OptimizerOptions& opts,
                        double step_size_q = 0.1, int iterations = 20000);

/// Inner solution of the worst-case excess risk at `theta`, with per-context
/// risk gradients written to `grads` when it is non-null.
LeastFavorable worst_case_excess(const LossModel& loss, const std::vector<SampleSet>& parts, const Vector& phat,
                                 const Vector& rhats, std::span<const double> theta, double eps_bits,
                                 std::vector<Vector>* grads = nullptr);

/**
Robust fit minimizing the worst-case excess risk over the KL confidence set.

Starts from the ERM solution, computes the per-context minima once, then
iterates: solve the least-favorable distribution p* at theta, step along
the Danskin gradient sum_c p*_c grad R_c(theta) with a fixed step, project.
Stops when the objective changes by at most obj_rel_tol relative, when the
step is at most grad_tol, or at max_iters; returns the visited iterate with
the smallest objective.
*/
FitResult fit_robust(const LossModel& loss, const Dataset& dataset, double beta, const OptimizerOptions& opts);

} // namespace cbrl
