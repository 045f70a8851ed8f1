#pragma once

/**
 * @file harness.hpp
 * @brief Simulation study: scenarios, metrics, flag scoring and results CSV.
 *
 * Every replicate draws its data from an RNG stream keyed by the data cell
 * (process, M, SNR, generator basis size, generator lambda, replicate, seed).
 * Penalty and K_s are not part of the key, so all penalties in a cell see the
 * same covariates, surface and noise, and results can be joined across them.
 */

#include "fofreg/dgp.hpp"
#include "fofreg/fit.hpp"
#include "fofreg/penalize.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace fofreg {

// ---------------------------------------------------------------------------
// metrics

/// Quadrature-weighted integral of (beta_hat - beta)^2 relative to that of beta^2.
inline double rimse_beta(const Matrix& beta_hat, const Matrix& beta_true, const Vector& w_s, const Vector& w_t)
{
    if (beta_hat.rows() != beta_true.rows() || beta_hat.cols() != beta_true.cols() ||
        w_s.size() != beta_true.rows() || w_t.size() != beta_true.cols())
        throw std::invalid_argument("rimse_beta: dimension mismatch");
    const double den = w_s.transpose() * beta_true.array().square().matrix() * w_t;
    if (!(den > 0.0))
        throw std::invalid_argument("rimse_beta: true surface is identically zero");
    const double num = w_s.transpose() * (beta_hat - beta_true).array().square().matrix() * w_t;
    return num / den;
}

/// Mean over curves of int (y_hat_i - signal_i)^2 dt / int (y_i - mean_t y_i)^2 dt.
inline double rimse_y(const Matrix& y_hat, const Matrix& signal, const Matrix& y_obs, const Vector& w_t)
{
    if (y_hat.rows() != y_obs.rows() || signal.rows() != y_obs.rows() || y_hat.cols() != y_obs.cols() ||
        signal.cols() != y_obs.cols() || w_t.size() != y_obs.cols())
        throw std::invalid_argument("rimse_y: dimension mismatch");
    const Index n = y_obs.rows();
    if (n == 0)
        throw std::invalid_argument("rimse_y: no curves");
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd y = y_obs.row(i);
        const double centred = ((y.array() - y.mean()).square().matrix() * w_t).value();
        if (!(centred > 0.0))
            throw std::invalid_argument("rimse_y: observed curve is constant");
        const double err = ((y_hat.row(i) - signal.row(i)).array().square().matrix() * w_t).value();
        total += err / centred;
    }
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// penalty choices

enum class PenaltyChoice { D1, D2, Ridge, D1C, D2C, FullrankD1, FullrankD2, Fame };

inline std::string to_string(PenaltyChoice p)
{
    switch (p) {
    case PenaltyChoice::D1: return "d1";
    case PenaltyChoice::D2: return "d2";
    case PenaltyChoice::Ridge: return "ridge";
    case PenaltyChoice::D1C: return "d1c";
    case PenaltyChoice::D2C: return "d2c";
    case PenaltyChoice::FullrankD1: return "fullrank-d1";
    case PenaltyChoice::FullrankD2: return "fullrank-d2";
    case PenaltyChoice::Fame: return "fame";
    }
    return "unknown";
}

inline const std::vector<PenaltyChoice>& all_penalty_choices()
{
    static const std::vector<PenaltyChoice> all{PenaltyChoice::D1,  PenaltyChoice::D2,         PenaltyChoice::Ridge,
                                                PenaltyChoice::D1C, PenaltyChoice::D2C,        PenaltyChoice::FullrankD1,
                                                PenaltyChoice::FullrankD2, PenaltyChoice::Fame};
    return all;
}

inline PenaltyChoice penalty_choice_from_string(std::string_view s)
{
    for (PenaltyChoice p : all_penalty_choices())
        if (to_string(p) == s)
            return p;
    throw std::invalid_argument("unknown penalty: " + std::string(s));
}

/// Difference order behind the choice; 0 for ridge and FAME.
inline int difference_order(PenaltyChoice p)
{
    switch (p) {
    case PenaltyChoice::D1:
    case PenaltyChoice::D1C:
    case PenaltyChoice::FullrankD1: return 1;
    case PenaltyChoice::D2:
    case PenaltyChoice::D2C:
    case PenaltyChoice::FullrankD2: return 2;
    default: return 0;
    }
}

inline bool uses_constraints(PenaltyChoice p) { return p == PenaltyChoice::D1C || p == PenaltyChoice::D2C; }

inline bool is_plain_difference(PenaltyChoice p) { return p == PenaltyChoice::D1 || p == PenaltyChoice::D2; }

struct FitSettings {
    int K_s = 12;
    int K_t = 10;
    PenaltyChoice penalty = PenaltyChoice::D1;
    PenaltyRecipe recipe;
    SmoothingGrid grid = SmoothingGrid::log_spaced();
    DiagnosticThresholds thresholds;
};

/// s-direction penalty for the choice. FAME needs the covariate.
inline MarginalPenalty make_s_penalty(const FitSettings& cfg, const FunctionalSample& X, const QuadratureWeights& W,
                                      const BasisMatrix& B_s)
{
    switch (cfg.penalty) {
    case PenaltyChoice::D1:
    case PenaltyChoice::D1C: return difference_penalty(cfg.K_s, 1);
    case PenaltyChoice::D2:
    case PenaltyChoice::D2C: return difference_penalty(cfg.K_s, 2);
    case PenaltyChoice::FullrankD1: return fullrank_shrinkage(difference_penalty(cfg.K_s, 1), cfg.recipe.epsilon);
    case PenaltyChoice::FullrankD2: return fullrank_shrinkage(difference_penalty(cfg.K_s, 2), cfg.recipe.epsilon);
    case PenaltyChoice::Ridge: return ridge_penalty(cfg.K_s);
    case PenaltyChoice::Fame: return fame_penalty(empirical_fpc(X, W), B_s, W, cfg.recipe.fame_floor);
    }
    throw std::invalid_argument("make_s_penalty: unknown penalty");
}

struct ModelFit {
    FitResult fit;
    DiagnosticReport report;
};

/// Rescales P so that its tensor term has the Frobenius norm of the data term
/// (B_t^T B_t) kron (D_s^T D_s); `other` is the dimension of the other margin.
inline MarginalPenalty scale_to_design(MarginalPenalty P, const TensorDesign& design, Index other)
{
    const double data = design.gram_s().norm() * design.gram_t().norm();
    const double pen = std::sqrt(static_cast<double>(other)) * P.matrix.norm();
    if (data > 0.0 && pen > 0.0 && std::isfinite(data / pen))
        P.matrix *= data / pen;
    return P;
}

/// Diagnose, then select smoothing by GCV. Both penalties are scaled to the
/// design first, so the grid is relative and the reported lambdas refer to the
/// scaled penalties. Constrained choices apply the overlap constraints only
/// when the specification is flagged.
inline ModelFit fit_model(const FunctionalSample& X, const QuadratureWeights& W, const Grid& grid_t, const Matrix& Y,
                          const FitSettings& cfg)
{
    const BasisMatrix B_s = bspline_basis(X.grid, cfg.K_s, 3);
    const BasisMatrix B_t = bspline_basis(grid_t, cfg.K_t, 3);
    const TensorDesign design = assemble_design(X, W, B_s, B_t, grid_t);
    const MarginalPenalty P_s = scale_to_design(make_s_penalty(cfg, X, W, B_s), design, cfg.K_t);
    const MarginalPenalty P_t = scale_to_design(difference_penalty(cfg.K_t, 1), design, cfg.K_s);

    ModelFit out;
    const int order = difference_order(cfg.penalty);
    const bool diff_null_space = is_plain_difference(cfg.penalty) || uses_constraints(cfg.penalty);
    out.report = diagnose(X, W, B_s, diff_null_space ? difference_penalty(cfg.K_s, order) : P_s, cfg.thresholds);

    SmoothingOptions opt;
    opt.grid = cfg.grid;
    if (uses_constraints(cfg.penalty) && out.report.flagged)
        opt.constraint_basis = out.report.constraint_basis;
    try {
        out.fit = select_smoothing(design, P_s, P_t, Y, opt);
    } catch (const NonIdentifiableError& e) {
        throw NonIdentifiableError(e.what(), out.report);
    }
    out.fit.diagnostics = out.report;
    return out;
}

// ---------------------------------------------------------------------------
// scenarios

struct StudySettings {
    Index n = 50;
    Index S = 100;
    Index T = 50;
    int K_t = 10;
    PenaltyRecipe recipe;
    double lambda_min = 1e-4;
    double lambda_max = 1e4;
    int lambda_n = 7;
    std::uint64_t seed = 1;
    bool timing = false;
};

struct SimScenario {
    ProcessKind process = ProcessKind::PolyLin;
    Index M = 5;
    int K_s = 12;
    PenaltyChoice penalty = PenaltyChoice::D1;
    double snr = 1000.0;
    int gen_K = 4;
    double gen_lambda = 1.0;
    StudySettings settings;

    /// RNG key of the data cell; excludes penalty and K_s.
    std::string data_key() const
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s|M=%lld|snr=%.17g|genK=%d|genL=%.17g|n=%lld|S=%lld|T=%lld",
                      to_string(process).c_str(), static_cast<long long>(M), snr, gen_K, gen_lambda,
                      static_cast<long long>(settings.n), static_cast<long long>(settings.S),
                      static_cast<long long>(settings.T));
        return buf;
    }
};

struct SimResult {
    ProcessKind process = ProcessKind::PolyLin;
    Index M = 0;
    int K_s = 0;
    PenaltyChoice penalty = PenaltyChoice::D1;
    double snr = 0.0;
    int gen_K = 0;
    double gen_lambda = 0.0;
    int rep = 0;
    double rimse_beta = std::numeric_limits<double>::quiet_NaN();
    double rimse_y = std::numeric_limits<double>::quiet_NaN();
    double kappa = std::numeric_limits<double>::quiet_NaN();
    double overlap = std::numeric_limits<double>::quiet_NaN();
    bool flagged = false;
    double lambda_s = std::numeric_limits<double>::quiet_NaN();
    double lambda_t = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok"; ///< ok | failed | skipped
    double runtime_ms = 0.0;
    std::string smoother = "gcv-grid";
    double normal_condition = std::numeric_limits<double>::quiet_NaN();
    Index n_constraints = 0;
};

inline SimResult result_stub(const SimScenario& sc, int rep)
{
    SimResult r;
    r.process = sc.process;
    r.M = sc.M;
    r.K_s = sc.K_s;
    r.penalty = sc.penalty;
    r.snr = sc.snr;
    r.gen_K = sc.gen_K;
    r.gen_lambda = sc.gen_lambda;
    r.rep = rep;
    return r;
}

/// One replicate. Fit failures are recorded with status "failed",
/// rimse_beta = inf and rimse_y = NaN; they never propagate.
inline SimResult run_replicate(const SimScenario& sc, int rep)
{
    SimResult r = result_stub(sc, rep);
    if (sc.gen_K > sc.K_s) {
        r.status = "skipped";
        return r;
    }
    const auto start = std::chrono::steady_clock::now();
    const StudySettings& st = sc.settings;

    Rng rng = stream_rng(sc.data_key(), static_cast<std::uint64_t>(rep), st.seed);
    const Grid grid_s = make_equidistant_grid(static_cast<int>(st.S), {0.0, 1.0});
    const Grid grid_t = make_equidistant_grid(static_cast<int>(st.T), {0.0, 1.0});
    const QuadratureWeights w_s = quadrature_weights(grid_s);
    const QuadratureWeights w_t = quadrature_weights(grid_t);
    const EigenSystem system = eigen_system(sc.process, sc.M, grid_s, w_s);
    const FunctionalSample X = sample_covariate(system, st.n, grid_s, rng);
    const CoefSurface beta = sample_coef_surface(sc.gen_K, sc.gen_lambda, grid_s, grid_t, rng);
    const GeneratedResponse data = gen_response(X, beta.values, grid_t, w_s, sc.snr, rng);

    FitSettings cfg;
    cfg.K_s = sc.K_s;
    cfg.K_t = st.K_t;
    cfg.penalty = sc.penalty;
    cfg.recipe = st.recipe;
    cfg.grid = SmoothingGrid::log_spaced(st.lambda_min, st.lambda_max, st.lambda_n);
    try {
        const ModelFit m = fit_model(X, w_s, grid_t, data.Y.values, cfg);
        r.kappa = m.report.kappa;
        r.overlap = m.report.overlap;
        r.flagged = m.report.flagged;
        r.rimse_beta = rimse_beta(m.fit.surface, beta.values, w_s.w, w_t.w);
        r.rimse_y = rimse_y(m.fit.fitted, data.signal.values, data.Y.values, w_t.w);
        r.lambda_s = m.fit.lambda_s;
        r.lambda_t = m.fit.lambda_t;
        r.normal_condition = m.fit.normal_condition;
        r.n_constraints = m.fit.n_constraints;
    } catch (const NonIdentifiableError& e) {
        r.status = "failed";
        r.rimse_beta = kInfinity;
        if (e.report()) {
            r.kappa = e.report()->kappa;
            r.overlap = e.report()->overlap;
            r.flagged = e.report()->flagged;
        }
    }
    if (st.timing)
        r.runtime_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

inline std::vector<SimResult> run_scenario(const SimScenario& scenario, int n_replicates)
{
    if (n_replicates < 1)
        throw std::invalid_argument("run_scenario: need at least one replicate");
    std::vector<SimResult> out;
    out.reserve(static_cast<std::size_t>(n_replicates));
    for (int rep = 0; rep < n_replicates; ++rep)
        out.push_back(run_replicate(scenario, rep));
    return out;
}

// ---------------------------------------------------------------------------
// study configuration

struct StudyConfig {
    std::vector<ProcessKind> processes{ProcessKind::PolyLin,    ProcessKind::PolyExp,   ProcessKind::FourierConst,
                                       ProcessKind::FourierExp, ProcessKind::Wiener,    ProcessKind::BrownBridge,
                                       ProcessKind::Poly1Plus,  ProcessKind::Poly2Plus, ProcessKind::PolyMinus1};
    std::vector<Index> M{3, 5, 8};
    std::vector<int> K_s{5, 12};
    std::vector<PenaltyChoice> penalties = all_penalty_choices();
    std::vector<double> snr{10.0, 1000.0};
    std::vector<int> gen_K{4, 8};
    std::vector<double> gen_lambda{0.1, 1.0};
    int replicates = 10;
    int jobs = 1;
    StudySettings settings;
};

/// Reads a JSON config; absent keys keep the desk-scale defaults.
inline StudyConfig study_config_from_json(const nlohmann::json& j)
{
    StudyConfig c;
    if (!j.is_object())
        throw std::invalid_argument("config must be a JSON object");
    if (j.contains("processes")) {
        c.processes.clear();
        for (const auto& p : j.at("processes"))
            c.processes.push_back(process_from_string(p.get<std::string>()));
    }
    if (j.contains("penalties")) {
        c.penalties.clear();
        for (const auto& p : j.at("penalties"))
            c.penalties.push_back(penalty_choice_from_string(p.get<std::string>()));
    }
    if (j.contains("M"))
        c.M = j.at("M").get<std::vector<Index>>();
    if (j.contains("Ks"))
        c.K_s = j.at("Ks").get<std::vector<int>>();
    if (j.contains("snr"))
        c.snr = j.at("snr").get<std::vector<double>>();
    if (j.contains("genK"))
        c.gen_K = j.at("genK").get<std::vector<int>>();
    if (j.contains("genLambda"))
        c.gen_lambda = j.at("genLambda").get<std::vector<double>>();
    c.replicates = j.value("replicates", c.replicates);
    c.jobs = j.value("jobs", c.jobs);

    StudySettings& s = c.settings;
    s.n = j.value("n", s.n);
    s.S = j.value("S", s.S);
    s.T = j.value("T", s.T);
    s.K_t = j.value("Kt", s.K_t);
    s.recipe.epsilon = j.value("epsilon", s.recipe.epsilon);
    s.recipe.fame_floor = j.value("fameFloor", s.recipe.fame_floor);
    s.seed = j.value("seed", s.seed);
    s.timing = j.value("timing", s.timing);
    if (j.contains("lambdaGrid")) {
        const auto& g = j.at("lambdaGrid");
        s.lambda_min = g.value("min", s.lambda_min);
        s.lambda_max = g.value("max", s.lambda_max);
        s.lambda_n = g.value("n", s.lambda_n);
    }

    auto nonempty = [](bool ok, const char* what) {
        if (!ok)
            throw std::invalid_argument(std::string("config: empty or invalid ") + what);
    };
    nonempty(!c.processes.empty(), "processes");
    nonempty(!c.penalties.empty(), "penalties");
    nonempty(!c.M.empty() && *std::min_element(c.M.begin(), c.M.end()) >= 1, "M");
    nonempty(!c.K_s.empty() && *std::min_element(c.K_s.begin(), c.K_s.end()) >= 4, "Ks");
    nonempty(!c.snr.empty() && *std::min_element(c.snr.begin(), c.snr.end()) > 0.0, "snr");
    nonempty(!c.gen_K.empty() && *std::min_element(c.gen_K.begin(), c.gen_K.end()) >= 4, "genK");
    nonempty(!c.gen_lambda.empty() && *std::min_element(c.gen_lambda.begin(), c.gen_lambda.end()) >= 0.0,
             "genLambda");
    nonempty(c.replicates >= 1, "replicates");
    nonempty(c.jobs >= 1, "jobs");
    nonempty(s.n >= 2 && s.S >= 4 && s.T >= 4 && s.K_t >= 4, "n/S/T/Kt");
    nonempty(s.lambda_n >= 1 && s.lambda_min > 0.0 && s.lambda_max >= s.lambda_min, "lambdaGrid");
    return c;
}

/// Cells in fixed order: process, M, K_s, penalty, snr, genK, genLambda.
inline std::vector<SimScenario> expand_scenarios(const StudyConfig& c)
{
    std::vector<SimScenario> out;
    for (ProcessKind p : c.processes)
        for (Index m : c.M)
            for (int ks : c.K_s)
                for (PenaltyChoice pen : c.penalties)
                    for (double snr : c.snr)
                        for (int gk : c.gen_K)
                            for (double gl : c.gen_lambda)
                                out.push_back({p, m, ks, pen, snr, gk, gl, c.settings});
    return out;
}

/// All cells x replicates on `jobs` threads. Each task writes to its own
/// slot, so the output order is the scenario order regardless of scheduling.
inline std::vector<SimResult> run_study(const StudyConfig& c, int jobs)
{
    const std::vector<SimScenario> cells = expand_scenarios(c);
    const std::size_t reps = static_cast<std::size_t>(c.replicates);
    std::vector<SimResult> results(cells.size() * reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < results.size(); i = next++)
            results[i] = run_replicate(cells[i / reps], static_cast<int>(i % reps));
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(results.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    return results;
}

// ---------------------------------------------------------------------------
// flag scoring

struct FlagScore {
    double threshold = 1.0;
    Index true_positive = 0;  ///< flagged, rimse_beta > threshold
    Index false_positive = 0; ///< flagged, rimse_beta <= threshold
    Index false_negative = 0; ///< not flagged, rimse_beta > threshold
    Index true_negative = 0;
    std::optional<double> sensitivity, specificity, accuracy, ppv, npv;

    Index total() const { return true_positive + false_positive + false_negative + true_negative; }
};

inline std::optional<double> ratio(Index num, Index den)
{
    if (den == 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

/// 2x2 table of flag vs (rimse_beta > threshold). Skipped rows are ignored;
/// failed fits count as flagged and extreme.
inline FlagScore score_flags(const std::vector<SimResult>& results, double threshold)
{
    FlagScore s;
    s.threshold = threshold;
    for (const SimResult& r : results) {
        if (r.status == "skipped")
            continue;
        const bool failed = r.status != "ok";
        const bool pred = failed || r.flagged;
        const bool truth = failed || r.rimse_beta > threshold;
        if (pred && truth)
            ++s.true_positive;
        else if (pred)
            ++s.false_positive;
        else if (truth)
            ++s.false_negative;
        else
            ++s.true_negative;
    }
    if (s.total() == 0)
        throw std::invalid_argument("score_flags: no scorable results");
    s.sensitivity = ratio(s.true_positive, s.true_positive + s.false_negative);
    s.specificity = ratio(s.true_negative, s.true_negative + s.false_positive);
    s.accuracy = ratio(s.true_positive + s.true_negative, s.total());
    s.ppv = ratio(s.true_positive, s.true_positive + s.false_positive);
    s.npv = ratio(s.true_negative, s.true_negative + s.false_negative);
    return s;
}

// ---------------------------------------------------------------------------
// results CSV

inline const std::vector<std::string>& results_columns()
{
    static const std::vector<std::string> cols{
        "process",  "M",       "Ks",      "penalty",  "snr",    "genK",       "genLambda",
        "rep",      "rimse_beta", "rimse_y", "kappa", "overlap", "flagged", "lambda_s",
        "lambda_t", "status",  "runtime_ms", "smoother", "normal_condition", "n_constraints"};
    return cols;
}

inline std::string format_number(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_number(const std::string& s)
{
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf")
        return kInfinity;
    if (s == "-inf")
        return -kInfinity;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size())
        throw std::invalid_argument("not a number: " + s);
    return v;
}

inline void write_results_csv(std::ostream& os, const std::vector<SimResult>& results)
{
    const auto& cols = results_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const SimResult& r : results) {
        os << to_string(r.process) << ',' << r.M << ',' << r.K_s << ',' << to_string(r.penalty) << ','
           << format_number(r.snr) << ',' << r.gen_K << ',' << format_number(r.gen_lambda) << ',' << r.rep << ','
           << format_number(r.rimse_beta) << ',' << format_number(r.rimse_y) << ',' << format_number(r.kappa)
           << ',' << format_number(r.overlap) << ',' << (r.flagged ? "true" : "false") << ','
           << format_number(r.lambda_s) << ',' << format_number(r.lambda_t) << ',' << r.status << ','
           << format_number(r.runtime_ms) << ',' << r.smoother << ',' << format_number(r.normal_condition) << ','
           << r.n_constraints << '\n';
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline std::vector<SimResult> read_results_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw std::invalid_argument("results CSV: missing header");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (split_csv_line(line) != results_columns())
        throw std::invalid_argument("results CSV: unexpected header");
    std::vector<SimResult> out;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != results_columns().size())
            throw std::invalid_argument("results CSV: wrong field count");
        SimResult r;
        r.process = process_from_string(f[0]);
        r.M = std::stoll(f[1]);
        r.K_s = std::stoi(f[2]);
        r.penalty = penalty_choice_from_string(f[3]);
        r.snr = parse_number(f[4]);
        r.gen_K = std::stoi(f[5]);
        r.gen_lambda = parse_number(f[6]);
        r.rep = std::stoi(f[7]);
        r.rimse_beta = parse_number(f[8]);
        r.rimse_y = parse_number(f[9]);
        r.kappa = parse_number(f[10]);
        r.overlap = parse_number(f[11]);
        r.flagged = f[12] == "true";
        r.lambda_s = parse_number(f[13]);
        r.lambda_t = parse_number(f[14]);
        r.status = f[15];
        r.runtime_ms = parse_number(f[16]);
        r.smoother = f[17];
        r.normal_condition = parse_number(f[18]);
        r.n_constraints = std::stoll(f[19]);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// plot data

/// Identifies the data a row was fitted on, independent of the penalty.
inline auto data_cell(const SimResult& r)
{
    return std::make_tuple(static_cast<int>(r.process), r.M, r.K_s, r.snr, r.gen_K, r.gen_lambda, r.rep);
}

/// Data cells flagged under a plain difference penalty.
inline std::map<decltype(data_cell(SimResult{})), bool> pathological_cells(const std::vector<SimResult>& results)
{
    std::map<decltype(data_cell(SimResult{})), bool> out;
    for (const SimResult& r : results)
        if (is_plain_difference(r.penalty) && r.status != "skipped")
            out[data_cell(r)] = out[data_cell(r)] || r.flagged || r.status == "failed";
    return out;
}

/// Long-format rows for three groupings: difference penalties across all
/// processes (by_process), all penalties at the lowest SNR (low_snr), and the same
/// restricted to flagged data (low_snr_flagged).
inline void write_plot_data(const std::vector<SimResult>& results, std::ostream& by_process, std::ostream& low_snr,
                            std::ostream& low_snr_flagged)
{
    const char* header = "process,M,Ks,penalty,snr,genK,genLambda,rep,rimse_beta,rimse_y,flagged,status\n";
    by_process << header;
    low_snr << header;
    low_snr_flagged << header;
    double lowest = kInfinity;
    for (const SimResult& r : results)
        lowest = std::min(lowest, r.snr);
    const auto bad = pathological_cells(results);
    for (const SimResult& r : results) {
        if (r.status == "skipped")
            continue;
        std::ostringstream row;
        row << to_string(r.process) << ',' << r.M << ',' << r.K_s << ',' << to_string(r.penalty) << ','
            << format_number(r.snr) << ',' << r.gen_K << ',' << format_number(r.gen_lambda) << ',' << r.rep << ','
            << format_number(r.rimse_beta) << ',' << format_number(r.rimse_y) << ','
            << (r.flagged ? "true" : "false") << ',' << r.status << '\n';
        if (is_plain_difference(r.penalty))
            by_process << row.str();
        if (r.snr == lowest) {
            low_snr << row.str();
            const auto it = bad.find(data_cell(r));
            if (it != bad.end() && it->second)
                low_snr_flagged << row.str();
        }
    }
}

} // namespace fofreg
