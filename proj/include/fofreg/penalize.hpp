#pragma once

// Remedial marginal penalties without a null space: ridge, full-rank
// shrinkage of a difference penalty, and the FPC-based (FAME) penalty.

#include "fofreg/fpc.hpp"

namespace fofreg {

struct PenaltyRecipe {
    double epsilon = 0.1;      ///< shrinkage factor for null-space eigenvalues
    double fame_floor = 1e-10; ///< eigenvalue floor relative to the largest FPC eigenvalue
};

inline MarginalPenalty ridge_penalty(int K)
{
    if (K < 1)
        throw std::invalid_argument("ridge_penalty: K must be >= 1");
    MarginalPenalty p;
    p.matrix = Matrix::Identity(K, K);
    p.kind = PenaltyKind::Ridge;
    p.nullspace_dim = 0;
    return p;
}

/// Replaces null-space eigenvalues by epsilon times the smallest positive one.
/// A penalty that is already full rank comes back unchanged with a note.
inline MarginalPenalty fullrank_shrinkage(const MarginalPenalty& P, double epsilon)
{
    if (!(epsilon > 0.0))
        throw std::invalid_argument("fullrank_shrinkage: epsilon must be > 0");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(P.matrix);
    Vector rho = eig.eigenvalues(); // ascending
    const double top = rho.cwiseAbs().maxCoeff();
    if (!(top > 0.0))
        throw std::invalid_argument("fullrank_shrinkage: zero penalty has no positive eigenvalue");

    Index n_null = 0;
    while (n_null < rho.size() && rho[n_null] < kRankTolerance * top)
        ++n_null;
    if (n_null == 0) {
        MarginalPenalty same = P;
        same.notes.push_back("fullrank_shrinkage: penalty already full rank, left unchanged");
        return same;
    }
    const double smallest_positive = rho[n_null];
    for (Index i = 0; i < n_null; ++i)
        rho[i] = epsilon * smallest_positive;

    const Matrix& g = eig.eigenvectors();
    Matrix m = g * rho.asDiagonal() * g.transpose();
    m = 0.5 * (m + m.transpose());
    MarginalPenalty out;
    out.matrix = std::move(m);
    out.kind = PenaltyKind::FullrankShrinkage;
    out.nullspace_dim = 0;
    out.notes.push_back("epsilon=" + std::to_string(epsilon));
    return out;
}

/// sum_m nu~_m^{-1} B_s^T diag(w . phi_m^2) B_s over all min(N, S) components,
/// with nu~_m = max(nu_m, floor * nu_1).
inline MarginalPenalty fame_penalty(const FpcDecomposition& decomp, const BasisMatrix& B_s,
                                    const QuadratureWeights& W, double floor)
{
    if (decomp.rank == 0)
        throw std::invalid_argument("fame_penalty: empty decomposition");
    if (!(floor > 0.0))
        throw std::invalid_argument("fame_penalty: floor must be > 0");
    const Index S = B_s.rows();
    if (decomp.eigenvectors.cols() != S || W.size() != S)
        throw std::invalid_argument("fame_penalty: decomposition, basis and weights disagree");

    const double nu1 = decomp.eigenvalues[0];
    const double min_nu = floor * nu1;
    Vector pointwise = Vector::Zero(S);
    auto add = [&](const Matrix& phi, const Vector& nu) {
        for (Index m = 0; m < phi.rows(); ++m)
            pointwise += phi.row(m).transpose().array().square().matrix() / std::max(nu[m], min_nu);
    };
    add(decomp.eigenvectors, decomp.eigenvalues);
    add(decomp.trailing_eigenvectors, decomp.trailing_eigenvalues);

    const Vector d = W.w.cwiseProduct(pointwise);
    Matrix m = B_s.values.transpose() * d.asDiagonal() * B_s.values;
    m = 0.5 * (m + m.transpose());
    MarginalPenalty out;
    out.matrix = std::move(m);
    out.kind = PenaltyKind::Fame;
    out.nullspace_dim = count_null_eigenvalues(out.matrix);
    return out;
}

} // namespace fofreg
