// fofreg: simulate | fit | diagnose
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 non-identifiable.

#include "fofreg/fofreg.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace fofreg;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kNonIdentifiable = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SmoothingGrid parse_lambda_grid(const std::string& spec)
{
    const auto a = spec.find(':');
    const auto b = spec.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos)
        throw UsageError("--lambda-grid must look like min:max:n");
    try {
        return SmoothingGrid::log_spaced(std::stod(spec.substr(0, a)), std::stod(spec.substr(a + 1, b - a - 1)),
                                         std::stoi(spec.substr(b + 1)));
    } catch (const std::exception&) {
        throw UsageError("--lambda-grid must look like min:max:n with 0 < min <= max and n >= 1");
    }
}

void write_json(const std::string& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    if (!out)
        throw std::invalid_argument("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::invalid_argument("cannot write " + path);
    return out;
}

void warn_flagged(const DiagnosticReport& r, PenaltyChoice p)
{
    std::cerr << "warning: persistent non-identifiability for penalty " << to_string(p)
              << " (kappa=" << format_number(r.kappa) << ", overlap=" << format_number(r.overlap)
              << "); the coefficient surface is not identified. Consider " << to_string(p)
              << "c, ridge or a full-rank penalty.\n";
}

struct SimulateArgs {
    std::string config, out, plot_dir;
    int jobs = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_simulate(const SimulateArgs& a)
{
    std::ifstream in(a.config);
    if (!in)
        throw std::invalid_argument("cannot open " + a.config);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    StudyConfig cfg = study_config_from_json(j);
    if (a.seed_set)
        cfg.settings.seed = a.seed;
    const int jobs = a.jobs > 0 ? a.jobs : cfg.jobs;
    const auto results = run_study(cfg, jobs);

    auto out = open_out(a.out);
    write_results_csv(out, results);
    if (!a.plot_dir.empty()) {
        std::filesystem::create_directories(a.plot_dir);
        const std::filesystem::path dir(a.plot_dir);
        auto f2 = open_out((dir / "by_process.csv").string());
        auto f5 = open_out((dir / "low_snr.csv").string());
        auto f6 = open_out((dir / "low_snr_flagged.csv").string());
        write_plot_data(results, f2, f5, f6);
    }
    std::size_t failed = 0;
    for (const auto& r : results)
        failed += r.status == "failed";
    std::cerr << results.size() << " rows written to " << a.out;
    if (failed)
        std::cerr << " (" << failed << " failed fits)";
    std::cerr << '\n';
    return kOk;
}

struct FitArgs {
    std::string x, y, out, surface, penalty, lambda_grid;
    int ks = 12, kt = 10;
    double epsilon = 0.1, fame_floor = 1e-10;
    bool full = false, no_center = false;
};

int run_fit(const FitArgs& a)
{
    FitSettings cfg;
    cfg.penalty = penalty_choice_from_string(a.penalty);
    cfg.K_s = a.ks;
    cfg.K_t = a.kt;
    cfg.recipe.epsilon = a.epsilon;
    cfg.recipe.fame_floor = a.fame_floor;
    if (!a.lambda_grid.empty())
        cfg.grid = parse_lambda_grid(a.lambda_grid);

    LabelledSample x = read_functional_csv(a.x, "X");
    LabelledSample y = read_functional_csv(a.y, "Y");
    if (x.sample.N() != y.sample.N())
        throw std::invalid_argument("X and Y have different numbers of curves");
    if (x.ids != y.ids)
        throw std::invalid_argument("X and Y curve ids differ");
    if (!a.no_center) {
        x.sample = center_mean_function(x.sample);
        y.sample = center_mean_function(y.sample);
    }
    const QuadratureWeights w = quadrature_weights(x.sample.grid);

    ModelFit m;
    try {
        m = fit_model(x.sample, w, y.sample.grid, y.sample.values, cfg);
    } catch (const NonIdentifiableError& e) {
        nlohmann::json j{{"error", e.what()}};
        if (e.report())
            j["diagnostics"] = to_json(*e.report());
        write_json(a.out, j);
        std::cerr << "error: " << e.what() << '\n';
        return kNonIdentifiable;
    }
    write_json(a.out, to_json(m.fit, a.full));
    if (!a.surface.empty()) {
        auto s = open_out(a.surface);
        write_surface_csv(s, m.fit);
    }
    if (is_plain_difference(cfg.penalty) && m.report.flagged) {
        warn_flagged(m.report, cfg.penalty);
        return kNonIdentifiable;
    }
    return kOk;
}

struct DiagnoseArgs {
    std::string x, out, penalty;
    int ks = 12;
    bool no_center = false;
};

int run_diagnose(const DiagnoseArgs& a)
{
    const PenaltyChoice p = penalty_choice_from_string(a.penalty);
    if (!is_plain_difference(p))
        throw UsageError("diagnose: --penalty must be d1 or d2");
    LabelledSample x = read_functional_csv(a.x, "X");
    if (!a.no_center)
        x.sample = center_mean_function(x.sample);
    const QuadratureWeights w = quadrature_weights(x.sample.grid);
    const BasisMatrix B_s = bspline_basis(x.sample.grid, a.ks, 3);
    const DiagnosticReport r = diagnose(x.sample, w, B_s, difference_penalty(a.ks, difference_order(p)));
    nlohmann::json j = to_json(r);
    j["penalty"] = to_string(p);
    j["K_s"] = a.ks;
    write_json(a.out, j);
    if (r.flagged)
        warn_flagged(r, p);
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Identifiability diagnostics and penalized fits for function-on-function regression"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation study from a JSON config");
    simulate->add_option("--config", sim.config, "JSON study configuration")->required();
    simulate->add_option("--out", sim.out, "results CSV")->required();
    simulate->add_option("--jobs", sim.jobs, "worker threads (default: config value)")->check(CLI::PositiveNumber);
    auto* seed_opt = simulate->add_option("--seed", sim.seed, "base seed (overrides config)");
    simulate->add_option("--plot-data", sim.plot_dir, "directory for long-format plot CSVs");

    FitArgs fit;
    const std::vector<std::string> penalties{"d1", "d2", "ridge", "d1c", "d2c", "fullrank-d1", "fullrank-d2", "fame"};
    auto* fitc = app.add_subcommand("fit", "Fit a penalized tensor-product model");
    fitc->add_option("--x", fit.x, "covariate CSV")->required();
    fitc->add_option("--y", fit.y, "response CSV")->required();
    fitc->add_option("--ks", fit.ks, "basis size in s")->check(CLI::Range(4, 1000));
    fitc->add_option("--kt", fit.kt, "basis size in t")->check(CLI::Range(4, 1000));
    fitc->add_option("--penalty", fit.penalty, "s-direction penalty")->required()->check(CLI::IsMember(penalties));
    fitc->add_option("--epsilon", fit.epsilon, "full-rank shrinkage factor")->check(CLI::PositiveNumber);
    fitc->add_option("--fame-floor", fit.fame_floor, "FAME eigenvalue floor factor")->check(CLI::PositiveNumber);
    fitc->add_option("--lambda-grid", fit.lambda_grid, "log grid min:max:n for both directions");
    fitc->add_option("--out", fit.out, "fit JSON")->required();
    fitc->add_option("--surface", fit.surface, "surface CSV (s, t, beta_hat)");
    fitc->add_flag("--full", fit.full, "include coefficients in the JSON");
    fitc->add_flag("--no-center", fit.no_center, "do not subtract mean functions");

    DiagnoseArgs dia;
    auto* diag = app.add_subcommand("diagnose", "Identifiability diagnostics for a covariate");
    diag->add_option("--x", dia.x, "covariate CSV")->required();
    diag->add_option("--ks", dia.ks, "basis size in s")->check(CLI::Range(4, 1000));
    diag->add_option("--penalty", dia.penalty, "d1 or d2")->required()->check(CLI::IsMember({"d1", "d2"}));
    diag->add_option("--out", dia.out, "report JSON")->required();
    diag->add_flag("--no-center", dia.no_center, "do not subtract the mean function");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*simulate) {
            sim.seed_set = seed_opt->count() > 0;
            return run_simulate(sim);
        }
        if (*fitc)
            return run_fit(fit);
        return run_diagnose(dia);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NonIdentifiableError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNonIdentifiable;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    }
}
