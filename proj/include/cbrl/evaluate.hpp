#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbrl/losses.hpp"
#include "cbrl/optimize.hpp"
#include "cbrl/synthetic.hpp"

namespace cbrl {

/// What a context "risk" means during evaluation: mean training loss, or 0-1 error.
enum class Metric { loss, error_rate };

std::string to_string(Metric metric);

/// Mean metric over m fresh draws from context c; deterministic in seed.
double mc_context_risk(const LossModel& loss, std::span<const double> theta, const ContextGenerator& gen, int c,
                       std::size_t m, std::uint64_t seed, Metric metric = Metric::loss);

struct ContextMinRisk {
    double value = 0.0;   ///< metric of the fitted minimizer on a held-out m-sample
    Vector theta;
    bool converged = true;
};

/// Fits the empirical risk minimizer on one m-sample of context c and
/// evaluates it on an independent second m-sample.
ContextMinRisk mc_context_min_risk(const LossModel& loss, const ContextGenerator& gen, int c, std::size_t m,
                                   std::uint64_t seed, const OptimizerOptions& opts, Metric metric = Metric::loss);

struct ExcessReport {
    Vector per_context_risk;
    Vector per_context_min_risk;
    Vector per_context_excess;
    double nominal_excess = 0.0;    ///< sum_c p_true(c) excess_c
    double worst_case_excess = 0.0; ///< max_c excess_c
    std::size_t m = 0;
    std::uint64_t seed = 0;
    Metric metric = Metric::loss;
};

/// Evaluates theta in every context of `gen`. When `min_risks` is absent they
/// are estimated with mc_context_min_risk from a stream derived from seed.
ExcessReport excess_report(const LossModel& loss, std::span<const double> theta, const ContextGenerator& gen,
                           std::size_t m, std::uint64_t seed, Metric metric = Metric::loss,
                           const OptimizerOptions& opts = {}, const std::optional<Vector>& min_risks = std::nullopt);

nlohmann::json to_json(const ExcessReport& report);

/// Box-plot statistics; quartiles by linear interpolation between order statistics.
struct Quartiles {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

Quartiles quartiles(std::vector<double> values);

nlohmann::json to_json(const OptimizerOptions& opts);
/// Missing keys keep defaults; unknown keys are rejected with InputError.
void from_json(const nlohmann::json& j, OptimizerOptions& opts);

enum class Experiment { stock, classify };

std::string to_string(Experiment experiment);
Experiment parse_experiment(const std::string& name);

struct ExperimentConfig {
    Experiment experiment = Experiment::stock;
    std::vector<Method> methods{Method::erm, Method::minimax_group_dro, Method::robust};
    int runs = 50;
    double beta = 0.99;
    std::uint64_t seed = 0;
    /// Evaluation draws per context; 0 selects 100000 (stock) or 10000 (classify).
    std::size_t m = 0;
    /// Newsvendor price and stock cap (stock only).
    double r = 200.0;
    double theta_max = 100.0;
    StockGenConfig stock;
    ClassifyGenConfig classify;
    OptimizerOptions optimizer;
    double group_dro_step_q = 0.1;
    double group_dro_step_theta = 0.1;
    int group_dro_iterations = 20000;

    std::size_t eval_samples() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep defaults; unknown keys are rejected with InputError.
void from_json(const nlohmann::json& j, ExperimentConfig& config);

struct ExperimentRecord {
    int run;
    Method method;
    std::string scenario; ///< "nominal" or "worst"
    double excess;
};

struct ExperimentSummary {
    ExperimentConfig config;
    int runs = 0;            ///< requested
    int successful_runs = 0;
    std::vector<std::string> failures; ///< one entry per excluded run
    std::vector<std::string> warnings;
    Vector min_risks;        ///< per-context minimum (loss or error rate)
    std::vector<ExperimentRecord> records;
    /// method name -> scenario -> statistics
    std::map<std::string, std::map<std::string, Quartiles>> stats;
};

nlohmann::json to_json(const ExperimentSummary& summary);

/**
Monte Carlo experiment. Each run draws a fresh training set from stream
(seed, train, run), fits every method, and evaluates each fit with stream
(seed, eval, run, method) so adding, removing or reordering methods leaves
the other methods' numbers unchanged. Per-context minimum risks are
estimated once from stream (seed, min). A run in which any method fails is
excluded and its error recorded.
*/
ExperimentSummary run_experiment(const ExperimentConfig& config);

/// The loss and generator an experiment uses.
std::unique_ptr<LossModel> experiment_loss(const ExperimentConfig& config);
std::unique_ptr<ContextGenerator> experiment_generator(const ExperimentConfig& config);

/// Fits one method with the experiment's settings.
FitResult fit_method(Method method, const LossModel& loss, const Dataset& data, const ExperimentConfig& config);

} // namespace cbrl
