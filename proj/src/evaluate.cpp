#include "cbrl/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "cbrl/error.hpp"
#include "cbrl/json_util.hpp"

namespace cbrl {

namespace {

using json_util::read;
using json_util::reject_unknown;
using nlohmann::json;

// stream tags
constexpr std::uint64_t kEvalStream = 0x6576616c;  // "eval"
constexpr std::uint64_t kFitStream = 0x666974;     // "fit"
constexpr std::uint64_t kHoldout = 0x686f6c64;     // "hold"
constexpr std::uint64_t kMinRisk = 0x6d696e;       // "min"
constexpr std::uint64_t kTrainStream = 0x747261696e; // "train"

constexpr std::size_t kChunk = 8192;

std::uint64_t method_tag(Method m) { return static_cast<std::uint64_t>(m) + 1; }

double metric_total(const LossModel& loss, std::span<const double> theta, const SampleSet& block, Metric metric) {
    const double n = static_cast<double>(block.size());
    return n * (metric == Metric::loss ? loss.risk(theta, block, {}) : loss.error_rate(theta, block));
}

} // namespace

std::string to_string(Metric metric) { return metric == Metric::loss ? "loss" : "error-rate"; }

double mc_context_risk(const LossModel& loss, std::span<const double> theta, const ContextGenerator& gen, int c,
                       std::size_t m, std::uint64_t seed, Metric metric) {
    if (m < 1) throw InputError("m must be at least 1");
    Rng rng(derive_seed(seed, {kEvalStream, static_cast<std::uint64_t>(c)}));
    SampleSet block(gen.dim());
    block.reserve(std::min(m, kChunk));
    double total = 0.0;
    for (std::size_t done = 0; done < m;) {
        const std::size_t take = std::min(kChunk, m - done);
        block.clear();
        gen.draw(c, take, rng, block);
        total += metric_total(loss, theta, block, metric);
        done += take;
    }
    return total / static_cast<double>(m);
}

ContextMinRisk mc_context_min_risk(const LossModel& loss, const ContextGenerator& gen, int c, std::size_t m,
                                   std::uint64_t seed, const OptimizerOptions& opts, Metric metric) {
    if (m < 1) throw InputError("m must be at least 1");
    Rng rng(derive_seed(seed, {kFitStream, static_cast<std::uint64_t>(c)}));
    SampleSet fit_sample(gen.dim());
    fit_sample.reserve(m);
    gen.draw(c, m, rng, fit_sample);
    RiskMinimum fitted = minimize_risk(loss, fit_sample, opts);
    ContextMinRisk out;
    out.value = mc_context_risk(loss, fitted.theta, gen, c, m, derive_seed(seed, {kHoldout}), metric);
    out.theta = std::move(fitted.theta);
    out.converged = fitted.converged;
    return out;
}

ExcessReport excess_report(const LossModel& loss, std::span<const double> theta, const ContextGenerator& gen,
                           std::size_t m, std::uint64_t seed, Metric metric, const OptimizerOptions& opts,
                           const std::optional<Vector>& min_risks) {
    const std::size_t k = gen.num_contexts();
    ExcessReport out;
    out.m = m;
    out.seed = seed;
    out.metric = metric;
    if (min_risks) {
        if (min_risks->size() != k) throw InputError("one minimum risk per context is required");
        out.per_context_min_risk = *min_risks;
    } else {
        for (std::size_t c = 1; c <= k; ++c) {
            out.per_context_min_risk.push_back(
                mc_context_min_risk(loss, gen, static_cast<int>(c), m, derive_seed(seed, {kMinRisk}), opts, metric)
                    .value);
        }
    }
    const Vector& p = gen.probs();
    out.worst_case_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c <= k; ++c) {
        const double risk = mc_context_risk(loss, theta, gen, static_cast<int>(c), m, seed, metric);
        const double excess = risk - out.per_context_min_risk[c - 1];
        out.per_context_risk.push_back(risk);
        out.per_context_excess.push_back(excess);
        out.nominal_excess += p[c - 1] * excess;
        out.worst_case_excess = std::max(out.worst_case_excess, excess);
    }
    return out;
}

json to_json(const ExcessReport& r) {
    return {{"per_context_risk", r.per_context_risk},
            {"per_context_min_risk", r.per_context_min_risk},
            {"per_context_excess", r.per_context_excess},
            {"nominal_excess", r.nominal_excess},
            {"worst_case_excess", r.worst_case_excess},
            {"m", r.m},
            {"seed", r.seed},
            {"metric", to_string(r.metric)}};
}

Quartiles quartiles(std::vector<double> values) {
    if (values.empty()) throw InputError("no values to summarize");
    std::sort(values.begin(), values.end());
    const auto at = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

json to_json(const OptimizerOptions& o) {
    return {{"step_size", o.step_size ? json(*o.step_size) : json(nullptr)},
            {"max_iters", o.max_iters},
            {"grad_tol", o.grad_tol},
            {"obj_rel_tol", o.obj_rel_tol},
            {"eps_override", o.eps_override ? json(*o.eps_override) : json(nullptr)}};
}

void from_json(const json& j, OptimizerOptions& o) {
    reject_unknown(j, {"step_size", "max_iters", "grad_tol", "obj_rel_tol", "eps_override"}, "optimizer options");
    const auto optional_number = [&](const char* key, std::optional<double>& out) {
        const auto it = j.find(key);
        if (it == j.end()) return;
        if (it->is_null()) {
            out.reset();
        } else if (it->is_number()) {
            out = it->get<double>();
        } else {
            throw InputError(std::string("invalid value for '") + key + "'");
        }
    };
    optional_number("step_size", o.step_size);
    read(j, "max_iters", o.max_iters);
    read(j, "grad_tol", o.grad_tol);
    read(j, "obj_rel_tol", o.obj_rel_tol);
    optional_number("eps_override", o.eps_override);
}

std::string to_string(Experiment e) { return e == Experiment::stock ? "stock" : "classify"; }

Experiment parse_experiment(const std::string& name) {
    if (name == "stock") return Experiment::stock;
    if (name == "classify") return Experiment::classify;
    throw InputError("unknown experiment '" + name + "' (expected stock or classify)");
}

std::size_t ExperimentConfig::eval_samples() const {
    if (m > 0) return m;
    return experiment == Experiment::stock ? 100000 : 10000;
}

json to_json(const ExperimentConfig& c) {
    json methods = json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    json stock = to_json(c.stock);
    json classify = to_json(c.classify);
    // per-run generator seeds are derived from the experiment seed
    stock.erase("seed");
    classify.erase("seed");
    return {{"experiment", to_string(c.experiment)},
            {"methods", methods},
            {"runs", c.runs},
            {"beta", c.beta},
            {"seed", c.seed},
            {"m", c.eval_samples()},
            {"r", c.r},
            {"theta_max", c.theta_max},
            {"stock", stock},
            {"classify", classify},
            {"optimizer", to_json(c.optimizer)},
            {"group_dro", {{"step_size_q", c.group_dro_step_q},
                           {"step_size_theta", c.group_dro_step_theta},
                           {"iterations", c.group_dro_iterations}}}};
}

void from_json(const json& j, ExperimentConfig& c) {
    reject_unknown(j, {"experiment", "methods", "runs", "beta", "seed", "m", "r", "theta_max", "stock", "classify",
                       "optimizer", "group_dro"},
                   "experiment config");
    if (j.contains("experiment")) {
        std::string name;
        read(j, "experiment", name);
        c.experiment = parse_experiment(name);
    }
    if (j.contains("methods")) {
        std::vector<std::string> names;
        read(j, "methods", names);
        c.methods.clear();
        for (const auto& n : names) c.methods.push_back(parse_method(n));
    }
    read(j, "runs", c.runs);
    read(j, "beta", c.beta);
    read(j, "seed", c.seed);
    read(j, "m", c.m);
    read(j, "r", c.r);
    read(j, "theta_max", c.theta_max);
    if (j.contains("stock")) from_json(j.at("stock"), c.stock);
    if (j.contains("classify")) from_json(j.at("classify"), c.classify);
    if (j.contains("optimizer")) from_json(j.at("optimizer"), c.optimizer);
    if (j.contains("group_dro")) {
        const json& g = j.at("group_dro");
        reject_unknown(g, {"step_size_q", "step_size_theta", "iterations"}, "group_dro");
        read(g, "step_size_q", c.group_dro_step_q);
        read(g, "step_size_theta", c.group_dro_step_theta);
        read(g, "iterations", c.group_dro_iterations);
    }
}

json to_json(const ExperimentSummary& s) {
    json stats = json::object();
    for (const auto& [method, scenarios] : s.stats) {
        for (const auto& [scenario, q] : scenarios) {
            stats[method][scenario] = {
                {"median", q.median}, {"q1", q.q1}, {"q3", q.q3}, {"min", q.min}, {"max", q.max}};
        }
    }
    return {{"config", to_json(s.config)},
            {"runs", s.runs},
            {"successful_runs", s.successful_runs},
            {"failed_runs", s.runs - s.successful_runs},
            {"failures", s.failures},
            {"warnings", s.warnings},
            {"metric", s.config.experiment == Experiment::stock ? "loss" : "error-rate"},
            {"per_context_min_risk", s.min_risks},
            {"summary", stats}};
}

std::unique_ptr<LossModel> experiment_loss(const ExperimentConfig& config) {
    if (config.experiment == Experiment::stock) return std::make_unique<NewsvendorLoss>(config.r, config.theta_max);
    return std::make_unique<LogisticLoss>(true);
}

std::unique_ptr<ContextGenerator> experiment_generator(const ExperimentConfig& config) {
    if (config.experiment == Experiment::stock) return std::make_unique<StockGenerator>(config.stock);
    return std::make_unique<ClassifyGenerator>(config.classify);
}

FitResult fit_method(Method method, const LossModel& loss, const Dataset& data, const ExperimentConfig& config) {
    switch (method) {
    case Method::erm:
        return fit_erm(loss, data, config.optimizer);
    case Method::minimax_group_dro: {
        OptimizerOptions opts = config.optimizer;
        opts.step_size = config.group_dro_step_theta;
        return fit_group_dro(loss, data, opts, config.group_dro_step_q, config.group_dro_iterations);
    }
    case Method::robust:
        return fit_robust(loss, data, config.beta, config.optimizer);
    }
    throw InputError("unknown method");
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
    if (config.runs < 1) throw InputError("runs must be at least 1");
    if (config.methods.empty()) throw InputError("at least one method is required");
    const auto loss = experiment_loss(config);
    const auto gen = experiment_generator(config);
    const Metric metric = config.experiment == Experiment::stock ? Metric::loss : Metric::error_rate;
    const std::size_t m = config.eval_samples();
    const std::size_t n = config.experiment == Experiment::stock ? config.stock.n : config.classify.n;

    ExperimentSummary out;
    out.config = config;
    out.runs = config.runs;
    for (std::size_t c = 1; c <= gen->num_contexts(); ++c) {
        const ContextMinRisk min = mc_context_min_risk(*loss, *gen, static_cast<int>(c), m,
                                                       derive_seed(config.seed, {kMinRisk}), config.optimizer, metric);
        if (!min.converged) out.warnings.push_back("context " + std::to_string(c) + " minimum did not converge");
        out.min_risks.push_back(min.value);
    }

    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    for (int run = 0; run < config.runs; ++run) {
        std::vector<ExperimentRecord> rows;
        try {
            Rng rng(derive_seed(config.seed, {kTrainStream, static_cast<std::uint64_t>(run)}));
            const Dataset data = gen->sample(n, rng);
            for (Method method : config.methods) {
                const FitResult fit = fit_method(method, *loss, data, config);
                const std::uint64_t eval_seed =
                    derive_seed(config.seed, {kEvalStream, static_cast<std::uint64_t>(run), method_tag(method)});
                const ExcessReport report =
                    excess_report(*loss, fit.theta.values, *gen, m, eval_seed, metric, config.optimizer, out.min_risks);
                rows.push_back({run, method, "nominal", report.nominal_excess});
                rows.push_back({run, method, "worst", report.worst_case_excess});
            }
        } catch (const std::exception& e) {
            out.failures.push_back("run " + std::to_string(run) + ": " + e.what());
            continue;
        }
        ++out.successful_runs;
        for (const auto& row : rows) {
            values[to_string(row.method)][row.scenario].push_back(row.excess);
            out.records.push_back(row);
        }
    }
    for (auto& [method, scenarios] : values) {
        for (auto& [scenario, v] : scenarios) out.stats[method][scenario] = quartiles(std::move(v));
    }
    return out;
}

} // namespace cbrl
