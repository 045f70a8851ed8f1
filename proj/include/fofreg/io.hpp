#pragma once

// Functional-data CSV (wide: `id` column, header row of grid points) and JSON
// views of diagnostic reports and fits.

#include "fofreg/fit.hpp"
#include "fofreg/harness.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace fofreg {

struct LabelledSample {
    FunctionalSample sample;
    std::vector<std::string> ids;
};

/// Grid points come from the header; the interval is [first, last].
inline LabelledSample read_functional_csv(std::istream& is, std::string label = "X")
{
    std::string line;
    if (!std::getline(is, line))
        throw std::invalid_argument("functional CSV: empty input");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "id")
        throw std::invalid_argument("functional CSV: header must be id followed by at least two grid points");
    Vector pts(static_cast<Index>(header.size() - 1));
    for (std::size_t j = 1; j < header.size(); ++j)
        pts[static_cast<Index>(j - 1)] = parse_number(header[j]);

    std::vector<std::vector<double>> rows;
    LabelledSample out;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("functional CSV: row " + std::to_string(rows.size() + 1) +
                                        " has the wrong number of fields");
        out.ids.push_back(f[0]);
        std::vector<double> r;
        for (std::size_t j = 1; j < f.size(); ++j)
            r.push_back(parse_number(f[j]));
        rows.push_back(std::move(r));
    }
    if (rows.empty())
        throw std::invalid_argument("functional CSV: no curves");
    Matrix m(static_cast<Index>(rows.size()), pts.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Index j = 0; j < pts.size(); ++j)
            m(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    out.sample = {std::move(m), Grid(pts, pts[0], pts[pts.size() - 1]), std::move(label)};
    validate(out.sample);
    return out;
}

inline LabelledSample read_functional_csv(const std::string& path, std::string label = "X")
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open " + path);
    return read_functional_csv(in, std::move(label));
}

inline void write_functional_csv(std::ostream& os, const FunctionalSample& x, const std::vector<std::string>& ids = {})
{
    os << "id";
    for (Index j = 0; j < x.G(); ++j)
        os << ',' << format_number(x.grid[j]);
    os << '\n';
    for (Index i = 0; i < x.N(); ++i) {
        os << (ids.empty() ? std::to_string(i + 1) : ids[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < x.G(); ++j)
            os << ',' << format_number(x.values(i, j));
        os << '\n';
    }
}

/// Infinite values become the string "inf"; JSON has no literal for them.
inline nlohmann::json json_number(double x)
{
    if (std::isfinite(x))
        return x;
    return format_number(x);
}

inline nlohmann::json to_json(const DiagnosticReport& r)
{
    return {{"kappa", json_number(r.kappa)},
            {"overlap", json_number(r.overlap)},
            {"flagged", r.flagged},
            {"n_constraints", r.n_constraints()},
            {"thresholds", {{"kappa", r.thresholds.kappa}, {"overlap", r.thresholds.overlap}}},
            {"rank_tolerance", r.rank_tolerance}};
}

inline nlohmann::json to_json(const FitResult& f, bool full)
{
    nlohmann::json j{{"lambda_s", f.lambda_s},
                     {"lambda_t", f.lambda_t},
                     {"gcv", json_number(f.gcv)},
                     {"edf", f.edf},
                     {"rss", f.rss},
                     {"normal_condition", json_number(f.normal_condition)},
                     {"penalty_s", to_string(f.penalty_s)},
                     {"penalty_t", to_string(f.penalty_t)},
                     {"constrained", f.constrained},
                     {"n_constraints", f.n_constraints},
                     {"singular_grid_points", f.singular_grid_points},
                     {"smoother", "gcv-grid"},
                     {"K_s", f.Theta.rows()},
                     {"K_t", f.Theta.cols()}};
    if (f.diagnostics)
        j["diagnostics"] = to_json(*f.diagnostics);
    if (full)
        j["theta"] = std::vector<double>(f.theta.data(), f.theta.data() + f.theta.size());
    return j;
}

/// Long format: s, t, beta_hat.
inline void write_surface_csv(std::ostream& os, const FitResult& f)
{
    os << "s,t,beta_hat\n";
    for (Index i = 0; i < f.surface.rows(); ++i)
        for (Index j = 0; j < f.surface.cols(); ++j)
            os << format_number(f.grid_s[i]) << ',' << format_number(f.grid_t[j]) << ','
               << format_number(f.surface(i, j)) << '\n';
}

} // namespace fofreg
