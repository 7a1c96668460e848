#include "cbrl/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cbrl/confidence.hpp"
#include "cbrl/error.hpp"
#include "cbrl/evaluate.hpp"
#include "cbrl/inner_solver.hpp"
#include "cbrl/json_util.hpp"
#include "cbrl/losses.hpp"
#include "cbrl/synthetic.hpp"

namespace cbrl {

using nlohmann::json;
using json_util::number;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

json vector_json(const Vector& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("invalid JSON in " + path + ": " + e.what());
    }
}

/// A config file may be a bare config or any output that embeds one under "config".
json load_config(const std::string& path, const std::string& command) {
    json j = read_json_file(path);
    if (j.is_object() && !j.contains("command") && j.contains("config")) j = j.at("config");
    if (!j.is_object()) throw InputError("config in " + path + " must be a JSON object");
    if (j.contains("command") && j.at("command") != command) {
        throw InputError("config in " + path + " is for command '" + j.at("command").dump() + "'");
    }
    j.erase("command");
    return j;
}

/// Recursive overlay: objects merge key by key, anything else (null included) replaces.
void overlay(json& base, const json& patch) {
    if (!base.is_object() || !patch.is_object()) {
        base = patch;
        return;
    }
    for (const auto& [key, value] : patch.items()) {
        if (base.contains(key)) {
            overlay(base[key], value);
        } else {
            base[key] = value;
        }
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << content;
    if (!out) throw InputError("failed writing " + path);
}

void emit(const std::string& path, const json& j, std::ostream& out) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_file(path, text);
    }
}

Vector parse_list(const std::string& text, const char* what) {
    Vector out;
    for (auto field : split(text, ',')) {
        double v;
        if (!parse_number(field, v)) throw InputError(std::string("invalid number in ") + what + ": '" +
                                                      std::string(field) + "'");
        out.push_back(v);
    }
    return out;
}

template <class T>
T get(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string("missing '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("invalid value for '") + key + "'");
    }
}

void check_beta(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InputError("confidence level out of range");
}

// ---- fit -------------------------------------------------------------------

struct FitFlags {
    std::string data, loss, method, config, out;
    double beta = 0.0, r = 0.0, theta_max = 0.0, step = 0.0, grad_tol = 0.0, obj_rel_tol = 0.0, eps = 0.0;
    double gdro_step_q = 0.0, gdro_step_theta = 0.0;
    int max_iters = 0, gdro_iters = 0;
    bool no_bias = false;
};

json fit_defaults() {
    return {{"command", "fit"},
            {"data", nullptr},
            {"loss", {{"name", "newsvendor"}, {"r", 10.0}, {"theta_max", 100.0}, {"add_bias", true}}},
            {"method", "robust"},
            {"beta", 0.99},
            {"optimizer", to_json(OptimizerOptions{})},
            {"group_dro", {{"step_size_q", 0.1}, {"step_size_theta", 0.1}, {"iterations", 20000}}}};
}

json data_summary(const Dataset& data) {
    return {{"n", data.size()},
            {"dim", data.dim()},
            {"counts", data.stats().counts},
            {"phat", data.stats().phat},
            {"context_labels", data.original_labels()}};
}

int run_fit(const json& cfg, const std::string& out_path, std::ostream& out) {
    json_util::reject_unknown(cfg, {"command", "data", "loss", "method", "beta", "optimizer", "group_dro"},
                              "fit config");
    if (!cfg.contains("data") || cfg.at("data").is_null()) throw InputError("--data is required");
    const auto data_path = get<std::string>(cfg, "data");
    const json& lc = cfg.at("loss");
    json_util::reject_unknown(lc, {"name", "r", "theta_max", "add_bias"}, "loss config");
    const double beta = get<double>(cfg, "beta");
    check_beta(beta);
    const Method method = parse_method(get<std::string>(cfg, "method"));
    OptimizerOptions opts;
    from_json(cfg.at("optimizer"), opts);
    const json& gc = cfg.at("group_dro");
    json_util::reject_unknown(gc, {"step_size_q", "step_size_theta", "iterations"}, "group_dro config");

    const auto loss = make_loss(get<std::string>(lc, "name"), get<double>(lc, "r"), get<double>(lc, "theta_max"),
                                get<bool>(lc, "add_bias"));
    const Dataset data = read_dataset_csv_file(data_path);
    if (loss->name() == "newsvendor" && data.dim() != 1) {
        throw InputError("newsvendor loss needs exactly one feature column (the unit cost)");
    }

    FitResult fit;
    switch (method) {
    case Method::erm:
        fit = fit_erm(*loss, data, opts);
        break;
    case Method::minimax_group_dro: {
        OptimizerOptions g = opts;
        g.step_size = get<double>(gc, "step_size_theta");
        fit = fit_group_dro(*loss, data, g, get<double>(gc, "step_size_q"), get<int>(gc, "iterations"));
        break;
    }
    case Method::robust:
        fit = fit_robust(*loss, data, beta, opts);
        break;
    }
    json result = fit_result_json(fit);
    result["data_summary"] = data_summary(data);
    result["config"] = cfg;
    emit(out_path, result, out);
    return kExitOk;
}

// ---- solve-inner -----------------------------------------------------------

json inner_defaults() {
    return {{"command", "solve-inner"},
            {"profile", nullptr},
            {"eps", nullptr},
            {"beta", nullptr},
            {"n", nullptr},
            {"contexts", nullptr}};
}

json least_favorable_json(const LeastFavorable& lf) {
    return {{"p_star", vector_json(lf.p_star)},
            {"nu_star", number(lf.nu_star)},
            {"nu_gap", number(lf.nu_gap)},
            {"lambda0", number(lf.lambda0)},
            {"weights", vector_json(lf.weights)},
            {"objective", number(lf.objective)},
            {"divergence_bits", number(lf.divergence_bits)},
            {"regime", to_string(lf.regime)}};
}

int run_solve_inner(const json& cfg, const std::string& out_path, std::ostream& out) {
    json_util::reject_unknown(cfg, {"command", "profile", "eps", "beta", "n", "contexts"}, "solve-inner config");
    if (cfg.at("profile").is_null()) throw InputError("--profile is required");
    const json& pj = cfg.at("profile");
    json_util::reject_unknown(pj, {"phat", "deltas", "rhats"}, "profile");
    Vector rhats;
    if (pj.contains("rhats")) rhats = get<Vector>(pj, "rhats");
    const ExcessProfile profile = ExcessProfile::make(get<Vector>(pj, "phat"), get<Vector>(pj, "deltas"), rhats);

    double eps;
    if (!cfg.at("eps").is_null()) {
        eps = get<double>(cfg, "eps");
        if (!(eps >= 0.0)) throw InputError("radius must be nonnegative");
    } else if (!cfg.at("beta").is_null()) {
        if (cfg.at("n").is_null()) throw InputError("--beta needs --n");
        const auto n = get<std::uint64_t>(cfg, "n");
        const std::uint64_t k =
            cfg.at("contexts").is_null() ? profile.size() : get<std::uint64_t>(cfg, "contexts");
        eps = epsilon_bits(n, k, get<double>(cfg, "beta"));
    } else {
        throw InputError("either --eps or --beta with --n is required");
    }

    const LeastFavorable lf = solve_least_favorable(profile, eps);
    json result = least_favorable_json(lf);
    result["eps_bits"] = number(eps);
    if (lf.regime == Regime::interior) {
        result["nu_residual_bits"] = nu_residual_at_gap(profile, eps, lf.nu_gap);
    }
    result["config"] = cfg;
    emit(out_path, result, out);
    return kExitOk;
}

// ---- coverage --------------------------------------------------------------

json coverage_defaults() {
    return {{"command", "coverage"}, {"p", nullptr}, {"n", 100}, {"beta", 0.99}, {"trials", 2000}, {"seed", 0}};
}

int run_coverage(const json& cfg, const std::string& out_path, std::ostream& out) {
    json_util::reject_unknown(cfg, {"command", "p", "n", "beta", "trials", "seed"}, "coverage config");
    if (cfg.at("p").is_null()) throw InputError("--p is required");
    const auto p = get<Vector>(cfg, "p");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw InputError("p must be a probability vector");
        sum += v;
    }
    if (p.empty() || std::abs(sum - 1.0) > 1e-9) throw InputError("p must be a probability vector");
    const auto n = get<std::uint64_t>(cfg, "n");
    const double beta = get<double>(cfg, "beta");
    check_beta(beta);
    const auto trials = get<std::uint64_t>(cfg, "trials");
    const auto seed = get<std::uint64_t>(cfg, "seed");
    const double coverage = simulate_coverage(p, n, beta, trials, seed);
    json result = {{"coverage", coverage},
                   {"trials", trials},
                   {"beta", beta},
                   {"n", n},
                   {"p", p},
                   {"eps_bits", number(epsilon_bits(n, p.size(), beta))},
                   {"seed", seed},
                   {"config", cfg}};
    emit(out_path, result, out);
    return kExitOk;
}

// ---- experiment ------------------------------------------------------------

std::string experiment_csv(const ExperimentSummary& s) {
    std::string text = "run,method,scenario,excess\n";
    for (const auto& row : s.records) {
        text += std::to_string(row.run) + "," + to_string(row.method) + "," + row.scenario + "," +
                format_double(row.excess) + "\n";
    }
    return text;
}

int run_experiment_command(const json& cfg, const std::string& out_dir, std::ostream& out) {
    if (out_dir.empty()) throw InputError("--out directory is required");
    json body = cfg;
    body.erase("command");
    ExperimentConfig config;
    from_json(body, config);
    check_beta(config.beta);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw InputError("cannot create " + out_dir + ": " + ec.message());

    const ExperimentSummary summary = run_experiment(config);
    json sj = to_json(summary);
    sj["config"] = cfg;
    const auto dir = std::filesystem::path(out_dir);
    write_file((dir / "runs.csv").string(), experiment_csv(summary));
    write_file((dir / "summary.json").string(), sj.dump(2) + "\n");
    write_file((dir / "config.json").string(), cfg.dump(2) + "\n");
    out << sj.at("summary").dump(2) << "\n";
    for (const auto& f : summary.failures) out << "failed: " << f << "\n";
    // tolerate up to 20% failed runs
    return 5 * summary.successful_runs >= 4 * summary.runs ? kExitOk : kExitSolver;
}

// ---- gen -------------------------------------------------------------------

json generator_defaults(const std::string& name) {
    if (name == "stock") return to_json(StockGenConfig{});
    if (name == "classify") return to_json(ClassifyGenConfig{});
    if (name == "two-context") return to_json(TwoContextConfig{});
    throw InputError("unknown generator '" + name + "' (expected stock, classify or two-context)");
}

int run_gen(const json& cfg, const std::string& out_path) {
    json_util::reject_unknown(cfg, {"command", "name", "generator"}, "gen config");
    if (out_path.empty()) throw InputError("--out is required");
    const auto name = get<std::string>(cfg, "name");
    const json& gj = cfg.at("generator");

    std::optional<Dataset> data;
    json metadata;
    if (name == "stock") {
        StockGenConfig c;
        from_json(gj, c);
        data = gen_stock(c);
        metadata = StockGenerator(c).metadata();
    } else if (name == "classify") {
        ClassifyGenConfig c;
        from_json(gj, c);
        data = gen_classify(c);
        metadata = ClassifyGenerator(c).metadata();
    } else if (name == "two-context") {
        TwoContextConfig c;
        from_json(gj, c);
        data = gen_stock_two_context(c);
        metadata = two_context_generator(c).metadata();
    } else {
        throw InputError("unknown generator '" + name + "'");
    }
    std::ostringstream csv;
    write_dataset_csv(csv, *data);
    write_file(out_path, csv.str());
    json sidecar = {{"metadata", metadata}, {"data_summary", data_summary(*data)}, {"config", cfg}};
    write_file(out_path + ".meta.json", sidecar.dump(2) + "\n");
    return kExitOk;
}

void apply_optimizer_flags(json& opt, CLI::App* cmd, const FitFlags& f) {
    if (cmd->count("--step-size")) opt["step_size"] = f.step;
    if (cmd->count("--max-iters")) opt["max_iters"] = f.max_iters;
    if (cmd->count("--grad-tol")) opt["grad_tol"] = f.grad_tol;
    if (cmd->count("--obj-rel-tol")) opt["obj_rel_tol"] = f.obj_rel_tol;
    if (cmd->count("--eps")) opt["eps_override"] = f.eps;
}

void add_optimizer_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--step-size", f.step, "Descent step size (default: loss-specific)");
    cmd->add_option("--max-iters", f.max_iters, "Iteration cap");
    cmd->add_option("--grad-tol", f.grad_tol, "Gradient / step tolerance");
    cmd->add_option("--obj-rel-tol", f.obj_rel_tol, "Relative objective tolerance");
    cmd->add_option("--eps", f.eps, "Fixed KL radius in bits for the robust fit");
}

} // namespace

// ---- public helpers ---------------------------------------------------------

std::string format_double(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Dataset read_dataset_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& msg) -> InputError {
        return InputError(source + ": line " + std::to_string(line_no) + ": " + msg);
    };

    std::size_t columns = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto header = split(line, ',');
        if (header.size() < 2 || header.front() != "context" || header.back() != "y") {
            throw fail("header must be context,x1,...,xd,y");
        }
        columns = header.size();
        break;
    }
    if (columns == 0) throw InputError(source + ": no header line");
    const std::size_t dim = columns - 2;

    SampleSet samples(dim);
    std::vector<long long> labels;
    Vector x(dim);
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != columns) {
            throw fail("expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
        }
        long long label;
        if (!parse_number(fields[0], label)) throw fail("context '" + std::string(fields[0]) + "' is not an integer");
        for (std::size_t j = 0; j < dim; ++j) {
            if (!parse_number(fields[j + 1], x[j]) || !std::isfinite(x[j])) {
                throw fail("feature '" + std::string(fields[j + 1]) + "' is not a finite number");
            }
        }
        double y;
        if (!parse_number(fields.back(), y) || !std::isfinite(y)) {
            throw fail("response '" + std::string(fields.back()) + "' is not a finite number");
        }
        samples.add(x, y);
        labels.push_back(label);
    }
    if (samples.empty()) throw InputError(source + ": no data rows");
    return Dataset::from_labels(std::move(samples), labels);
}

Dataset read_dataset_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    return read_dataset_csv(in, path);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    out << "context";
    for (std::size_t j = 1; j <= data.dim(); ++j) out << ",x" << j;
    out << ",y\n";
    const auto& labels = data.original_labels();
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << labels[static_cast<std::size_t>(data.context(i) - 1)];
        for (double v : data.samples().x(i)) out << ',' << format_double(v);
        out << ',' << format_double(data.samples().y(i)) << '\n';
    }
}

json fit_result_json(const FitResult& fit) {
    json j = {{"method", to_string(fit.method)},
              {"beta", fit.beta ? json(*fit.beta) : json(nullptr)},
              {"eps_bits", fit.eps_bits ? number(*fit.eps_bits) : json(nullptr)},
              {"theta", vector_json(fit.theta.values)},
              {"objective", number(fit.objective)},
              {"p_star", nullptr},
              {"nu_star", nullptr},
              {"weights", nullptr},
              {"iterations", fit.iterations},
              {"converged", fit.converged},
              {"stop_reason", fit.stop_reason},
              {"step_size", fit.step_size},
              {"warnings", fit.warnings}};
    if (fit.inner) {
        const LeastFavorable& lf = *fit.inner;
        j["p_star"] = vector_json(lf.p_star);
        j["nu_star"] = number(lf.nu_star);
        j["nu_gap"] = number(lf.nu_gap);
        j["lambda0"] = number(lf.lambda0);
        j["weights"] = vector_json(lf.weights);
        j["divergence_bits"] = number(lf.divergence_bits);
        j["regime"] = to_string(lf.regime);
        j["rhats"] = vector_json(fit.rhats);
    }
    return j;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, out, err);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Confidence-set robust learning across contexts"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cbrl 1.0.0");

    FitFlags ff;
    auto* fit = app.add_subcommand("fit", "Fit erm, minimax or robust parameters to a CSV dataset");
    fit->add_option("--data", ff.data, "Dataset CSV (context,x1,...,xd,y)");
    fit->add_option("--loss", ff.loss, "newsvendor or logistic");
    fit->add_option("--r", ff.r, "Newsvendor unit price");
    fit->add_option("--theta-max", ff.theta_max, "Newsvendor stock cap");
    fit->add_flag("--no-bias", ff.no_bias, "Logistic model without intercept");
    fit->add_option("--beta", ff.beta, "Confidence level in (0, 1]");
    fit->add_option("--method", ff.method, "erm, minimax or robust");
    fit->add_option("--gdro-step-q", ff.gdro_step_q, "Group-DRO weight step");
    fit->add_option("--gdro-step-theta", ff.gdro_step_theta, "Group-DRO parameter step");
    fit->add_option("--gdro-iters", ff.gdro_iters, "Group-DRO iterations");
    add_optimizer_flags(fit, ff);
    fit->add_option("--config", ff.config, "JSON config or previous output");
    fit->add_option("--out", ff.out, "Output JSON path (default stdout)");

    std::string profile, inner_config, inner_out;
    double inner_eps = 0.0, inner_beta = 0.0;
    std::uint64_t inner_n = 0, inner_k = 0;
    auto* inner = app.add_subcommand("solve-inner", "Solve the least-favorable context distribution");
    inner->add_option("--profile", profile, "Profile JSON file or inline {\"phat\":[..],\"deltas\":[..]}");
    inner->add_option("--eps", inner_eps, "KL radius in bits");
    inner->add_option("--beta", inner_beta, "Confidence level (with --n)");
    inner->add_option("--n", inner_n, "Sample count for --beta");
    inner->add_option("--contexts", inner_k, "Context count for --beta (default: profile length)");
    inner->add_option("--config", inner_config, "JSON config or previous output");
    inner->add_option("--out", inner_out, "Output JSON path (default stdout)");

    std::string cov_p, cov_config, cov_out;
    std::uint64_t cov_n = 0, cov_trials = 0, cov_seed = 0;
    double cov_beta = 0.0;
    auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage of the confidence set");
    cov->add_option("--p", cov_p, "True context distribution, comma separated");
    cov->add_option("--n", cov_n, "Sample size");
    cov->add_option("--beta", cov_beta, "Confidence level");
    cov->add_option("--trials", cov_trials, "Number of trials");
    cov->add_option("--seed", cov_seed, "Seed");
    cov->add_option("--config", cov_config, "JSON config or previous output");
    cov->add_option("--out", cov_out, "Output JSON path (default stdout)");

    std::string ex_name, ex_config, ex_out, ex_methods;
    int ex_runs = 0;
    double ex_beta = 0.0, ex_r = 0.0, ex_theta_max = 0.0;
    std::uint64_t ex_seed = 0;
    std::size_t ex_m = 0, ex_n = 0;
    auto* ex = app.add_subcommand("experiment", "Run the stock or classification Monte Carlo study");
    ex->add_option("--name", ex_name, "stock or classify");
    ex->add_option("--runs", ex_runs, "Monte Carlo runs");
    ex->add_option("--beta", ex_beta, "Confidence level of the robust method");
    ex->add_option("--seed", ex_seed, "Seed");
    ex->add_option("--methods", ex_methods, "Comma-separated subset of erm,minimax,robust");
    ex->add_option("--m", ex_m, "Evaluation draws per context");
    ex->add_option("--n", ex_n, "Training samples per run");
    ex->add_option("--r", ex_r, "Newsvendor unit price (stock)");
    ex->add_option("--theta-max", ex_theta_max, "Newsvendor stock cap (stock)");
    ex->add_option("--config", ex_config, "JSON config or previous output");
    ex->add_option("--out", ex_out, "Output directory");

    std::string gen_name, gen_config, gen_out;
    std::uint64_t gen_seed = 0;
    std::size_t gen_n = 0, gen_n1 = 0, gen_n2 = 0;
    auto* gen = app.add_subcommand("gen", "Write a synthetic dataset as CSV plus a metadata sidecar");
    gen->add_option("--name", gen_name, "stock, classify or two-context");
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_option("--n", gen_n, "Sample count (stock, classify)");
    gen->add_option("--n1", gen_n1, "Context 1 count (two-context)");
    gen->add_option("--n2", gen_n2, "Context 2 count (two-context)");
    gen->add_option("--config", gen_config, "JSON config or previous output");
    gen->add_option("--out", gen_out, "Output CSV path; metadata goes to <out>.meta.json");

    try {
        std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
        std::reverse(rev.begin(), rev.end());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*fit) {
            json cfg = fit_defaults();
            if (!ff.config.empty()) overlay(cfg, load_config(ff.config, "fit"));
            if (fit->count("--data")) cfg["data"] = ff.data;
            if (fit->count("--loss")) cfg["loss"]["name"] = ff.loss;
            if (fit->count("--r")) cfg["loss"]["r"] = ff.r;
            if (fit->count("--theta-max")) cfg["loss"]["theta_max"] = ff.theta_max;
            if (ff.no_bias) cfg["loss"]["add_bias"] = false;
            if (fit->count("--beta")) cfg["beta"] = ff.beta;
            if (fit->count("--method")) cfg["method"] = ff.method;
            if (fit->count("--gdro-step-q")) cfg["group_dro"]["step_size_q"] = ff.gdro_step_q;
            if (fit->count("--gdro-step-theta")) cfg["group_dro"]["step_size_theta"] = ff.gdro_step_theta;
            if (fit->count("--gdro-iters")) cfg["group_dro"]["iterations"] = ff.gdro_iters;
            apply_optimizer_flags(cfg["optimizer"], fit, ff);
            return run_fit(cfg, ff.out, out);
        }
        if (*inner) {
            json cfg = inner_defaults();
            if (!inner_config.empty()) overlay(cfg, load_config(inner_config, "solve-inner"));
            if (inner->count("--profile")) {
                cfg["profile"] = trim(profile).starts_with("{") ? json::parse(profile) : read_json_file(profile);
            }
            if (inner->count("--eps")) cfg["eps"] = inner_eps;
            if (inner->count("--beta")) cfg["beta"] = inner_beta;
            if (inner->count("--n")) cfg["n"] = inner_n;
            if (inner->count("--contexts")) cfg["contexts"] = inner_k;
            if (inner->count("--eps") && !inner->count("--beta")) cfg["beta"] = nullptr;
            if (inner->count("--beta") && !inner->count("--eps")) cfg["eps"] = nullptr;
            return run_solve_inner(cfg, inner_out, out);
        }
        if (*cov) {
            json cfg = coverage_defaults();
            if (!cov_config.empty()) overlay(cfg, load_config(cov_config, "coverage"));
            if (cov->count("--p")) cfg["p"] = parse_list(cov_p, "--p");
            if (cov->count("--n")) cfg["n"] = cov_n;
            if (cov->count("--beta")) cfg["beta"] = cov_beta;
            if (cov->count("--trials")) cfg["trials"] = cov_trials;
            if (cov->count("--seed")) cfg["seed"] = cov_seed;
            return run_coverage(cfg, cov_out, out);
        }
        if (*ex) {
            json file_cfg = ex_config.empty() ? json::object() : load_config(ex_config, "experiment");
            // defaults depend on the experiment (evaluation sample size), so resolve its name first
            ExperimentConfig base;
            if (file_cfg.contains("experiment")) base.experiment = parse_experiment(get<std::string>(file_cfg, "experiment"));
            if (ex->count("--name")) base.experiment = parse_experiment(ex_name);
            json cfg = to_json(base);
            overlay(cfg, file_cfg);
            if (ex->count("--name")) cfg["experiment"] = ex_name;
            if (ex->count("--runs")) cfg["runs"] = ex_runs;
            if (ex->count("--beta")) cfg["beta"] = ex_beta;
            if (ex->count("--seed")) cfg["seed"] = ex_seed;
            if (ex->count("--m")) cfg["m"] = ex_m;
            if (ex->count("--r")) cfg["r"] = ex_r;
            if (ex->count("--theta-max")) cfg["theta_max"] = ex_theta_max;
            if (ex->count("--methods")) {
                json methods = json::array();
                for (auto name : split(ex_methods, ',')) methods.push_back(std::string(name));
                cfg["methods"] = methods;
            }
            if (ex->count("--n")) {
                cfg[get<std::string>(cfg, "experiment") == "stock" ? "stock" : "classify"]["n"] = ex_n;
            }
            // canonicalize through the typed config so every key is present and validated
            json body = cfg;
            ExperimentConfig typed;
            from_json(body, typed);
            json resolved = to_json(typed);
            resolved["command"] = "experiment";
            return run_experiment_command(resolved, ex_out, out);
        }
        if (*gen) {
            json cfg = {{"command", "gen"}, {"name", "stock"}};
            json file_cfg;
            if (!gen_config.empty()) file_cfg = load_config(gen_config, "gen");
            if (file_cfg.contains("name")) cfg["name"] = file_cfg.at("name");
            if (gen->count("--name")) cfg["name"] = gen_name;
            cfg["generator"] = generator_defaults(get<std::string>(cfg, "name"));
            if (file_cfg.contains("generator")) overlay(cfg["generator"], file_cfg.at("generator"));
            for (const auto& [key, value] : file_cfg.items()) {
                if (key != "name" && key != "generator") throw InputError("unknown key '" + key + "' in gen config");
            }
            if (gen->count("--seed")) cfg["generator"]["seed"] = gen_seed;
            if (gen->count("--n")) cfg["generator"]["n"] = gen_n;
            if (gen->count("--n1")) cfg["generator"]["n1"] = gen_n1;
            if (gen->count("--n2")) cfg["generator"]["n2"] = gen_n2;
            return run_gen(cfg, gen_out);
        }
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitInput;
}

} // namespace cbrl
