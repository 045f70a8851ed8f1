#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fofreg;

namespace {

Vector sorted_eigenvalues(const Matrix& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    return eig.eigenvalues();
}

} // namespace

TEST(Ridge, Identity)
{
    const MarginalPenalty p = ridge_penalty(3);
    EXPECT_EQ(p.matrix, Matrix::Identity(3, 3));
    EXPECT_EQ(p.nullspace_dim, 0);
    EXPECT_EQ(p.kind, PenaltyKind::Ridge);
    EXPECT_THROW(ridge_penalty(0), std::invalid_argument);
}

TEST(FullrankShrinkage, FirstOrderK3)
{
    const MarginalPenalty p = fullrank_shrinkage(difference_penalty(3, 1), 0.1);
    const Vector ev = sorted_eigenvalues(p.matrix);
    EXPECT_NEAR(ev[0], 0.1, 1e-10);
    EXPECT_NEAR(ev[1], 1.0, 1e-10);
    EXPECT_NEAR(ev[2], 3.0, 1e-10);
    EXPECT_EQ(p.nullspace_dim, 0);
    EXPECT_EQ(p.kind, PenaltyKind::FullrankShrinkage);
}

TEST(FullrankShrinkage, PreservesPositiveSpectrumAndEigenvectors)
{
    for (int K : {4, 6, 10, 12})
        for (int order : {1, 2})
            for (double eps : {0.1, 0.5, 1e-3}) {
                const MarginalPenalty base = difference_penalty(K, order);
                const MarginalPenalty p = fullrank_shrinkage(base, eps);
                const Vector before = sorted_eigenvalues(base.matrix);
                const Vector after = sorted_eigenvalues(p.matrix);
                for (Index i = order; i < K; ++i)
                    EXPECT_NEAR(after[i], before[i], 1e-10 * before[K - 1]);
                for (Index i = 0; i < order; ++i)
                    EXPECT_NEAR(after[i], eps * before[order], 1e-10 * before[K - 1]);
                EXPECT_GT(after[0], 0.0);
                EXPECT_TRUE(is_symmetric(p.matrix));

                Eigen::SelfAdjointEigenSolver<Matrix> eig(base.matrix);
                const Matrix g = eig.eigenvectors();
                Matrix rotated = g.transpose() * (p.matrix - base.matrix) * g;
                // within the (possibly degenerate) null block the difference is
                // eps * rho I; off the null block it vanishes
                rotated.topLeftCorner(order, order).diagonal().setZero();
                EXPECT_LT(rotated.cwiseAbs().maxCoeff(), 1e-10 * before[K - 1]);
            }
}

TEST(FullrankShrinkage, FullRankInputUnchanged)
{
    const MarginalPenalty r = ridge_penalty(4);
    const MarginalPenalty p = fullrank_shrinkage(r, 0.1);
    EXPECT_EQ(p.matrix, r.matrix);
    EXPECT_FALSE(p.notes.empty());
    EXPECT_THROW(fullrank_shrinkage(difference_penalty(4, 1), 0.0), std::invalid_argument);
}

TEST(FullrankShrinkage, RemovesOverlapFlag)
{
    const Grid g = make_equidistant_grid(100, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    Rng rng(1);
    const FunctionalSample x = sample_covariate(eigen_system(ProcessKind::Poly1Plus, 5, g, w), 50, g, rng);
    const BasisMatrix bs = bspline_basis(g, 12, 3);
    const DiagnosticReport r = diagnose(x, w, bs, fullrank_shrinkage(difference_penalty(12, 1), 0.1));
    EXPECT_EQ(r.overlap, 0.0);
    EXPECT_FALSE(r.flagged);
}

TEST(Fame, SingleConstantComponent)
{
    const Grid g = make_equidistant_grid(30, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    const BasisMatrix bs = bspline_basis(g, 6, 3);
    FpcDecomposition d;
    d.rank = 1;
    d.eigenvectors = Matrix::Ones(1, 30);
    d.eigenvalues = Vector::Ones(1);
    d.trailing_eigenvectors = Matrix(0, 30);
    d.trailing_eigenvalues = Vector(0);
    const MarginalPenalty p = fame_penalty(d, bs, w, 1e-10);
    const Matrix expected = bs.values.transpose() * w.w.asDiagonal() * bs.values;
    EXPECT_LT((p.matrix - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(p.kind, PenaltyKind::Fame);
}

TEST(Fame, MatchesLoopOracleWithTrailingComponents)
{
    const Grid g = make_equidistant_grid(60, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    Rng rng(2);
    const FunctionalSample x = sample_covariate(eigen_system(ProcessKind::PolyExp, 4, g, w), 25, g, rng);
    const FpcDecomposition d = empirical_fpc(x, w);
    ASSERT_EQ(d.rank, 4);
    ASSERT_EQ(d.trailing_eigenvectors.rows(), 21);
    const BasisMatrix bs = bspline_basis(g, 10, 3);
    for (double floor : {1e-10, 1e-4}) {
        const MarginalPenalty p = fame_penalty(d, bs, w, floor);
        Matrix phi(25, 60);
        phi << d.eigenvectors, d.trailing_eigenvectors;
        Vector nu(25);
        nu << d.eigenvalues, d.trailing_eigenvalues;
        const Matrix ref = oracle::fame_penalty(phi, nu, bs.values, w.w, floor);
        EXPECT_LT((p.matrix - ref).cwiseAbs().maxCoeff(), 1e-9 * ref.cwiseAbs().maxCoeff());
        EXPECT_TRUE(is_symmetric(p.matrix));
        const Vector ev = sorted_eigenvalues(p.matrix);
        EXPECT_GE(ev[0], -1e-10 * ev[ev.size() - 1]);
    }
}

TEST(Fame, QuadraticFormIsWeightedIntegral)
{
    // theta^T P theta = sum_m nu_m^{-1} int (phi_m(s) f(s))^2 ds with f = B_s theta
    const Grid g = make_equidistant_grid(50, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    Rng rng(3);
    const FunctionalSample x = sample_covariate(eigen_system(ProcessKind::Wiener, 3, g, w), 80, g, rng);
    const FpcDecomposition d = empirical_fpc(x, w);
    const BasisMatrix bs = bspline_basis(g, 8, 3);
    const MarginalPenalty p = fame_penalty(d, bs, w, 1e-10);
    std::mt19937_64 r(4);
    const Vector theta = oracle::random_matrix(8, 1, r);
    const Vector f = bs.values * theta;
    const double nu_min = 1e-10 * d.eigenvalues[0];
    double integral = 0.0;
    for (Index m = 0; m < d.rank; ++m)
        integral += d.eigenvectors.row(m).transpose().cwiseProduct(f).cwiseAbs2().dot(w.w) /
                    std::max(d.eigenvalues[m], nu_min);
    for (Index m = 0; m < d.trailing_eigenvectors.rows(); ++m)
        integral += d.trailing_eigenvectors.row(m).transpose().cwiseProduct(f).cwiseAbs2().dot(w.w) /
                    std::max(d.trailing_eigenvalues[m], nu_min);
    EXPECT_NEAR(theta.dot(p.matrix * theta), integral, 1e-9 * integral);
}

TEST(Fame, FloorMonotonicity)
{
    const Grid g = make_equidistant_grid(100, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    Rng rng(5);
    const FunctionalSample x = sample_covariate(eigen_system(ProcessKind::PolyLin, 3, g, w), 50, g, rng);
    const FpcDecomposition d = empirical_fpc(x, w);
    const BasisMatrix bs = bspline_basis(g, 12, 3);
    // a kernel direction: degree-5 orthonormal polynomial, fitted in the basis
    const Matrix poly = eigen_system(ProcessKind::PolyLin, 6, g, w).functions;
    const Vector theta = bs.values.colPivHouseholderQr().solve(Vector(poly.row(5).transpose()));
    for (double floor : {1e-10, 1e-6, 1e-3}) {
        const double q1 = theta.dot(fame_penalty(d, bs, w, floor).matrix * theta);
        const double q2 = theta.dot(fame_penalty(d, bs, w, 2.0 * floor).matrix * theta);
        EXPECT_LE(q2, q1 * (1.0 + 1e-12));
        EXPECT_GE(q2, 0.5 * q1 * (1.0 - 1e-12));
    }
}

TEST(Fame, Errors)
{
    const Grid g = make_equidistant_grid(10, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    const BasisMatrix bs = bspline_basis(g, 5, 3);
    FpcDecomposition empty;
    EXPECT_THROW(fame_penalty(empty, bs, w, 1e-10), std::invalid_argument);
    Rng rng(6);
    const FunctionalSample x = sample_covariate(eigen_system(ProcessKind::PolyLin, 2, g, w), 5, g, rng);
    const FpcDecomposition d = empirical_fpc(x, w);
    EXPECT_THROW(fame_penalty(d, bs, w, 0.0), std::invalid_argument);
    EXPECT_THROW(fame_penalty(d, bspline_basis(make_equidistant_grid(12, {0.0, 1.0}), 5, 3), w, 1e-10),
                 std::invalid_argument);
}
