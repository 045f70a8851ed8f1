#pragma once

// Functional samples, centering, and the empirical FPC decomposition
// X = Xi * Phi obtained from an SVD of the (optionally weighted) data matrix.

#include "fofreg/funbasis.hpp"

#include <string>
#include <utility>

namespace fofreg {

/// N curves evaluated on a shared grid, one curve per row.
struct FunctionalSample {
    Matrix values;
    Grid grid;
    std::string label;

    Index N() const { return values.rows(); }
    Index G() const { return values.cols(); }
};

inline void validate(const FunctionalSample& x)
{
    if (x.values.cols() != x.grid.size())
        throw std::invalid_argument("FunctionalSample: column count must equal grid length");
    if (!x.values.allFinite())
        throw std::invalid_argument("FunctionalSample: non-finite entries");
}

inline FunctionalSample center_mean_function(const FunctionalSample& sample)
{
    validate(sample);
    if (sample.N() < 2)
        throw std::invalid_argument("center_mean_function: need at least 2 curves");
    FunctionalSample out = sample;
    const Eigen::RowVectorXd mean = sample.values.colwise().mean();
    out.values.rowwise() -= mean;
    return out;
}

/// Removes each curve's weighted mean so that sum_l w_l X_i(s_l) = 0.
inline std::pair<FunctionalSample, Vector> center_curvewise(const FunctionalSample& sample,
                                                            const QuadratureWeights& weights)
{
    validate(sample);
    if (weights.size() != sample.G())
        throw std::invalid_argument("center_curvewise: weights do not match grid");
    const double total = weights.w.sum();
    Vector means = sample.values * weights.w / total;
    FunctionalSample out = sample;
    out.values.colwise() -= means;
    // second pass mops up rounding so the weighted integral is zero to ~1e-16
    const Vector residual = out.values * weights.w / total;
    out.values.colwise() -= residual;
    means += residual;
    return {std::move(out), std::move(means)};
}

struct FpcOptions {
    /// SVD of X W^{1/2} (L2-orthonormal eigenfunctions). false: plain SVD of X.
    bool weighted = true;
};

/// Empirical Karhunen-Loeve decomposition. Components whose singular value is
/// below the rank tolerance are kept aside in the trailing_* members; some
/// consumers (the FAME penalty) need all min(N, G) of them.
struct FpcDecomposition {
    Matrix eigenvectors;          ///< M x G, Phi W Phi^T = I_M
    Vector eigenvalues;           ///< nu_m = sigma_m^2 / N, descending
    Matrix scores;                ///< N x M
    Index rank = 0;
    QuadratureWeights weights;
    bool weighted = true;
    Vector singular_values;       ///< sigma_1 .. sigma_M
    Matrix trailing_eigenvectors; ///< (min(N,G) - M) x G
    Vector trailing_eigenvalues;

    Matrix reconstruct() const { return scores * eigenvectors; }
};

inline FpcDecomposition empirical_fpc(const FunctionalSample& sample, const QuadratureWeights& weights,
                                      FpcOptions options = {})
{
    validate(sample);
    if (sample.N() < 1)
        throw std::invalid_argument("empirical_fpc: need at least one curve");
    if (weights.size() != sample.G())
        throw std::invalid_argument("empirical_fpc: weights do not match grid");
    if ((weights.w.array() <= 0.0).any())
        throw std::invalid_argument("empirical_fpc: weights must be positive");

    const Vector sqrt_w = options.weighted ? Vector(weights.w.array().sqrt())
                                           : Vector(Vector::Ones(sample.G()));
    const Vector inv_sqrt_w = sqrt_w.cwiseInverse();
    const Matrix xw = sample.values * sqrt_w.asDiagonal();

    Eigen::BDCSVD<Matrix> svd(xw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const Index total = sv.size();
    const Index m = count_above(sv, kRankTolerance);
    const double n = static_cast<double>(sample.N());

    FpcDecomposition d;
    d.weights = weights;
    d.weighted = options.weighted;
    d.rank = m;
    d.singular_values = sv.head(m);
    d.eigenvalues = sv.head(m).array().square() / n;
    d.eigenvectors = svd.matrixV().leftCols(m).transpose() * inv_sqrt_w.asDiagonal();
    d.scores = svd.matrixU().leftCols(m) * sv.head(m).asDiagonal();
    d.trailing_eigenvalues = sv.tail(total - m).array().square() / n;
    d.trailing_eigenvectors =
        svd.matrixV().rightCols(total - m).transpose() * inv_sqrt_w.asDiagonal();
    return d;
}

/// Reconstruction from the leading K components (presmoothing).
inline FunctionalSample truncate_fpc(const FpcDecomposition& decomp, Index K, const Grid& grid,
                                     std::string label = "X")
{
    if (K < 1 || K > decomp.rank)
        throw std::invalid_argument("truncate_fpc: K must be in [1, rank]");
    FunctionalSample out;
    out.values = decomp.scores.leftCols(K) * decomp.eigenvectors.topRows(K);
    out.grid = grid;
    out.label = std::move(label);
    return out;
}

} // namespace fofreg
