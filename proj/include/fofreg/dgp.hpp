#pragma once

/**
 * @file dgp.hpp
 * @brief Data-generating processes for the simulation study.
 *
 * Covariates follow a truncated Karhunen-Loeve expansion
 * X_i(s) = sum_m xi_im phi_m(s), xi_im ~ N(0, nu_m), with eigenfunctions that
 * are orthonormalised on the quadrature-weighted grid. Coefficient surfaces
 * are drawn from a Gaussian prior whose precision is a first-order difference
 * tensor penalty plus a small ridge.
 */

#include "fofreg/fpc.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

namespace fofreg {

using Rng = std::mt19937_64;

enum class ProcessKind {
    PolyLin,
    PolyExp,
    FourierConst,
    FourierExp,
    Wiener,
    BrownBridge,
    Poly1Plus,
    Poly2Plus,
    PolyMinus1
};

inline std::string to_string(ProcessKind k)
{
    switch (k) {
    case ProcessKind::PolyLin: return "PolyLin";
    case ProcessKind::PolyExp: return "PolyExp";
    case ProcessKind::FourierConst: return "FourierConst";
    case ProcessKind::FourierExp: return "FourierExp";
    case ProcessKind::Wiener: return "Wiener";
    case ProcessKind::BrownBridge: return "BrownBridge";
    case ProcessKind::Poly1Plus: return "Poly1Plus";
    case ProcessKind::Poly2Plus: return "Poly2Plus";
    case ProcessKind::PolyMinus1: return "PolyMinus1";
    }
    return "unknown";
}

inline ProcessKind process_from_string(std::string_view s)
{
    for (auto k : {ProcessKind::PolyLin, ProcessKind::PolyExp, ProcessKind::FourierConst,
                   ProcessKind::FourierExp, ProcessKind::Wiener, ProcessKind::BrownBridge,
                   ProcessKind::Poly1Plus, ProcessKind::Poly2Plus, ProcessKind::PolyMinus1})
        if (to_string(k) == s)
            return k;
    throw std::invalid_argument("unknown process kind: " + std::string(s));
}

struct EigenSystem {
    ProcessKind kind = ProcessKind::PolyLin;
    Index M = 0;
    Matrix functions; ///< M x S, rows orthonormal under the quadrature weights
    Vector eigenvalues;
};

struct EigenSystemOptions {
    /// Fourier systems start with the constant function.
    bool fourier_include_constant = true;
};

namespace detail {

/// Orthonormalise the columns of `f` (S x M) under the weighted inner product,
/// in order (Gram-Schmidt semantics via Householder QR), signs fixed so the
/// triangular factor has a positive diagonal.
inline Matrix weighted_orthonormalize(const Matrix& f, const QuadratureWeights& weights)
{
    const Vector sw = weights.w.array().sqrt();
    const Matrix a = sw.asDiagonal() * f;
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    for (Index j = 0; j < q.cols(); ++j)
        if (r(j, j) < 0.0)
            q.col(j) *= -1.0;
    return sw.cwiseInverse().asDiagonal() * q;
}

/// Weighted-orthonormal polynomials of degrees 0..max_degree (S x (max_degree+1)),
/// from the monomial Vandermonde in the interval mapped to [-1, 1].
inline Matrix orthonormal_polynomials(const Grid& grid, const QuadratureWeights& weights,
                                      int max_degree)
{
    Matrix v(grid.size(), max_degree + 1);
    for (Index i = 0; i < grid.size(); ++i) {
        const double u = 2.0 * (grid[i] - grid.a()) / grid.length() - 1.0;
        double p = 1.0;
        for (int d = 0; d <= max_degree; ++d) {
            v(i, d) = p;
            p *= u;
        }
    }
    return weighted_orthonormalize(v, weights);
}

} // namespace detail

inline EigenSystem eigen_system(ProcessKind kind, Index M, const Grid& grid,
                                const QuadratureWeights& weights, EigenSystemOptions options = {})
{
    if (M < 1)
        throw std::invalid_argument("eigen_system: M must be >= 1");
    if (weights.size() != grid.size())
        throw std::invalid_argument("eigen_system: weights do not match grid");

    const Index S = grid.size();
    const double pi = std::numbers::pi;
    Matrix f(S, M);
    Vector nu(M);
    auto linear = [&](Index m) { return static_cast<double>(M + 1 - m) / static_cast<double>(M); };
    auto expo = [](Index m) { return std::exp(-static_cast<double>(m - 1) / 2.0); };

    auto pick_degrees = [&](const std::vector<int>& degrees) {
        int top = 0;
        for (int d : degrees)
            top = std::max(top, d);
        if (top + 1 > S)
            throw std::invalid_argument("eigen_system: grid too coarse for polynomial degree");
        const Matrix poly = detail::orthonormal_polynomials(grid, weights, top);
        for (Index m = 0; m < M; ++m)
            f.col(m) = poly.col(degrees[m]);
    };

    switch (kind) {
    case ProcessKind::PolyLin:
    case ProcessKind::PolyExp:
    case ProcessKind::Poly1Plus:
    case ProcessKind::Poly2Plus:
    case ProcessKind::PolyMinus1: {
        std::vector<int> degrees(M);
        for (Index m = 0; m < M; ++m) {
            const int mi = static_cast<int>(m);
            switch (kind) {
            case ProcessKind::Poly1Plus: degrees[m] = mi + 1; break;
            case ProcessKind::Poly2Plus: degrees[m] = mi + 2; break;
            case ProcessKind::PolyMinus1: degrees[m] = mi == 0 ? 0 : mi + 1; break;
            default: degrees[m] = mi; break;
            }
        }
        pick_degrees(degrees);
        for (Index m = 1; m <= M; ++m)
            nu[m - 1] = kind == ProcessKind::PolyExp ? expo(m) : linear(m);
        break;
    }
    case ProcessKind::FourierConst:
    case ProcessKind::FourierExp: {
        Index col = 0;
        if (options.fourier_include_constant)
            f.col(col++).setOnes();
        for (int freq = 1; col < M; ++freq) {
            for (int phase = 0; phase < 2 && col < M; ++phase, ++col)
                for (Index i = 0; i < S; ++i) {
                    const double u = (grid[i] - grid.a()) / grid.length();
                    const double arg = 2.0 * pi * freq * u;
                    f(i, col) = std::sqrt(2.0) * (phase == 0 ? std::sin(arg) : std::cos(arg));
                }
        }
        for (Index m = 1; m <= M; ++m)
            nu[m - 1] = kind == ProcessKind::FourierConst ? 1.0 : expo(m);
        break;
    }
    case ProcessKind::Wiener:
        for (Index m = 1; m <= M; ++m) {
            const double md = static_cast<double>(m);
            for (Index i = 0; i < S; ++i)
                f(i, m - 1) = std::sqrt(2.0) * std::sin(pi * (md - 0.5) * grid[i]);
            nu[m - 1] = std::pow(pi / 2.0 * (2.0 * md + 1.0), -2.0);
        }
        break;
    case ProcessKind::BrownBridge:
        for (Index m = 1; m <= M; ++m) {
            const double md = static_cast<double>(m);
            for (Index i = 0; i < S; ++i)
                f(i, m - 1) = std::sqrt(2.0) * std::sin(pi * md * grid[i]);
            nu[m - 1] = 1.0 / (pi * md);
        }
        break;
    default:
        throw std::invalid_argument("eigen_system: unknown kind");
    }

    EigenSystem sys;
    sys.kind = kind;
    sys.M = M;
    sys.functions = detail::weighted_orthonormalize(f, weights).transpose();
    sys.eigenvalues = nu;
    return sys;
}

/// Draws N curves X = Xi * Phi with independent N(0, nu_m) scores.
inline FunctionalSample sample_covariate(const EigenSystem& system, Index N, const Grid& grid, Rng& rng)
{
    if (N < 1)
        throw std::invalid_argument("sample_covariate: N must be >= 1");
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix scores(N, system.M);
    for (Index i = 0; i < N; ++i)
        for (Index m = 0; m < system.M; ++m)
            scores(i, m) = z(rng) * std::sqrt(std::max(system.eigenvalues[m], 0.0));
    return {scores * system.functions, grid, "X"};
}

struct CoefSurface {
    Matrix theta;  ///< K_gen x K_gen
    Matrix values; ///< S x T
    BasisMatrix basis_s;
    BasisMatrix basis_t;
};

/// Precision matrix of the coefficient prior: 0.1 I + P(lambda, lambda) with
/// first-order difference marginals.
inline Matrix coef_prior_precision(int K_gen, double lambda)
{
    const MarginalPenalty d1 = difference_penalty(K_gen, 1);
    Matrix q = tensor_penalty_matrix(d1.matrix, d1.matrix, lambda, lambda);
    q.diagonal().array() += 0.1;
    return q;
}

inline CoefSurface sample_coef_surface(int K_gen, double lambda, const Grid& grid_s, const Grid& grid_t,
                                       Rng& rng)
{
    if (!(lambda >= 0.0))
        throw std::invalid_argument("sample_coef_surface: lambda must be >= 0");
    const Matrix q = coef_prior_precision(K_gen, lambda);
    Eigen::LLT<Matrix> llt(q);
    std::normal_distribution<double> z(0.0, 1.0);
    Vector e(q.rows());
    for (Index i = 0; i < e.size(); ++i)
        e[i] = z(rng);
    // Q = L L^T  =>  L^{-T} e ~ N(0, Q^{-1})
    const Vector theta = llt.matrixU().solve(e);

    CoefSurface c;
    c.basis_s = bspline_basis(grid_s, K_gen, 3);
    c.basis_t = bspline_basis(grid_t, K_gen, 3);
    c.theta = unvec(theta, K_gen, K_gen);
    c.values = c.basis_s.values * c.theta * c.basis_t.values.transpose();
    return c;
}

/// Sample standard deviation (n - 1 denominator) over all entries.
inline double sample_sd(const Matrix& m)
{
    const double n = static_cast<double>(m.size());
    if (n < 2)
        return 0.0;
    const double mean = m.mean();
    return std::sqrt((m.array() - mean).square().sum() / (n - 1.0));
}

struct GeneratedResponse {
    FunctionalSample Y;
    FunctionalSample signal;
};

/// Y_i(t_k) = sum_j w_j X_i(s_j) beta(s_j, t_k) + eps, with sd(eps) = sd(signal) / snr.
inline GeneratedResponse gen_response(const FunctionalSample& X, const Matrix& beta, const Grid& grid_t,
                                      const QuadratureWeights& weights, double snr, Rng& rng)
{
    if (!(snr > 0.0))
        throw std::invalid_argument("gen_response: snr must be > 0");
    if (beta.rows() != X.G() || weights.size() != X.G() || beta.cols() != grid_t.size())
        throw std::invalid_argument("gen_response: incompatible dimensions");
    GeneratedResponse out;
    out.signal = {X.values * weights.w.asDiagonal() * beta, grid_t, "signal"};
    const double sd = sample_sd(out.signal.values);
    if (!(sd > 0.0))
        throw std::invalid_argument("gen_response: zero signal, noise level undefined");
    const double sigma = sd / snr;
    std::normal_distribution<double> z(0.0, 1.0);
    out.Y = out.signal;
    out.Y.label = "Y";
    for (Index j = 0; j < out.Y.values.cols(); ++j)
        for (Index i = 0; i < out.Y.values.rows(); ++i)
            out.Y.values(i, j) += sigma * z(rng);
    return out;
}

/// splitmix64 finaliser.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms unlike std::hash.
inline std::uint64_t stable_hash(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent stream per (key, replicate, base seed).
inline Rng stream_rng(std::string_view key, std::uint64_t replicate, std::uint64_t base_seed)
{
    std::uint64_t s = mix64(stable_hash(key) ^ mix64(base_seed));
    s = mix64(s ^ mix64(replicate + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return Rng(seq);
}

} // namespace fofreg
