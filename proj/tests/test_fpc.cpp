#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fofreg;

namespace {

FunctionalSample random_sample(Index n, Index g, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return {oracle::random_matrix(n, g, rng), make_equidistant_grid(static_cast<int>(g), {0.0, 1.0}), "X"};
}

} // namespace

TEST(Centering, MeanFunction)
{
    FunctionalSample two = random_sample(1, 6, 1);
    two.values = Matrix(2, 6);
    two.values.row(0) = Vector::LinSpaced(6, 0.0, 1.0).transpose();
    two.values.row(1) = two.values.row(0);
    EXPECT_EQ(center_mean_function(two).values, Matrix::Zero(2, 6));

    const FunctionalSample r = random_sample(5, 10, 2);
    const FunctionalSample c = center_mean_function(r);
    EXPECT_LT(c.values.colwise().mean().cwiseAbs().maxCoeff(), 1e-14);
    const FunctionalSample again = center_mean_function(c);
    EXPECT_LT((again.values - c.values).cwiseAbs().maxCoeff(), 1e-15);

    EXPECT_THROW(center_mean_function(random_sample(1, 4, 3)), std::invalid_argument);
}

TEST(Centering, Curvewise)
{
    const Grid g = make_equidistant_grid(30, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    FunctionalSample c{Matrix::Constant(1, 30, 2.5), g, "X"};
    auto [out, means] = center_curvewise(c, w);
    EXPECT_LT(out.values.cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(means[0], 2.5, 1e-14);

    FunctionalSample r = random_sample(7, 30, 4);
    auto [centred, m1] = center_curvewise(r, w);
    for (Index i = 0; i < 7; ++i)
        EXPECT_LT(std::abs(centred.values.row(i).dot(w.w)), 1e-12);
    auto [twice, m2] = center_curvewise(centred, w);
    EXPECT_LT((twice.values - centred.values).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(m2.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Centering, CurvewiseRaisesConstantOverlap)
{
    const Grid g = make_equidistant_grid(40, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    const FunctionalSample r = random_sample(10, 40, 5);
    const Matrix ones = Vector::Ones(40);
    const double before = lv_overlap(orthogonal_complement(r.values.transpose()), ones);
    const FunctionalSample c = center_curvewise(r, w).first;
    const double after = lv_overlap(orthogonal_complement(c.values.transpose()), w.w);
    EXPECT_LT(before, 0.9);
    EXPECT_GT(after, 1.0 - 1e-10);
}

TEST(Fpc, RankOneSample)
{
    const Grid g = make_equidistant_grid(25, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    Vector phi(25);
    for (Index i = 0; i < 25; ++i)
        phi[i] = std::sin(3.0 * g[i]) + 0.2;
    FunctionalSample x{Matrix(4, 25), g, "X"};
    for (Index i = 0; i < 4; ++i)
        x.values.row(i) = phi.transpose();
    const FpcDecomposition d = empirical_fpc(x, w);
    ASSERT_EQ(d.rank, 1);
    const Vector e = d.eigenvectors.row(0).transpose();
    EXPECT_NEAR(std::abs(e.dot(phi)) / (e.norm() * phi.norm()), 1.0, 1e-12);
}

TEST(Fpc, WeightedOrthonormalityAndReconstruction)
{
    const Grid g = make_equidistant_grid(30, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    for (bool weighted : {true, false}) {
        const FunctionalSample x = random_sample(12, 30, 6);
        const FpcDecomposition d = empirical_fpc(x, w, {weighted});
        EXPECT_EQ(d.rank, 12);
        const Matrix gram = weighted ? Matrix(d.eigenvectors * w.w.asDiagonal() * d.eigenvectors.transpose())
                                     : Matrix(d.eigenvectors * d.eigenvectors.transpose());
        EXPECT_LT((gram - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((d.reconstruct() - x.values).cwiseAbs().maxCoeff(), 1e-10);
        for (Index m = 1; m < d.rank; ++m)
            EXPECT_GT(d.eigenvalues[m - 1], d.eigenvalues[m]);
        // nu = sigma^2 / N
        EXPECT_NEAR(d.eigenvalues[0], d.singular_values[0] * d.singular_values[0] / 12.0, 1e-12);
        // eigenvalues equal those of the weighted covariance operator
        const Matrix root = weighted ? Matrix(w.w.array().sqrt().matrix().asDiagonal()) : Matrix::Identity(30, 30);
        const Matrix cov = root * x.values.transpose() * x.values * root / 12.0;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        EXPECT_NEAR(eig.eigenvalues().reverse()[0], d.eigenvalues[0], 1e-10 * d.eigenvalues[0]);
    }
}

TEST(Fpc, ZeroMatrixGivesEmptyDecomposition)
{
    const Grid g = make_equidistant_grid(10, {0.0, 1.0});
    const FpcDecomposition d = empirical_fpc({Matrix::Zero(3, 10), g, "X"}, quadrature_weights(g));
    EXPECT_EQ(d.rank, 0);
    EXPECT_EQ(d.eigenvectors.rows(), 0);
}

TEST(Fpc, RecoversSimulatedEigenvalues)
{
    const Grid g = make_equidistant_grid(100, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    const EigenSystem sys = eigen_system(ProcessKind::PolyLin, 3, g, w);
    Rng rng(17);
    const FunctionalSample x = sample_covariate(sys, 4000, g, rng);
    const FpcDecomposition d = empirical_fpc(x, w);
    ASSERT_EQ(d.rank, 3);
    for (Index m = 0; m < 3; ++m)
        EXPECT_NEAR(d.eigenvalues[m], sys.eigenvalues[m], 0.1 * sys.eigenvalues[m]);
}

TEST(Fpc, TruncationRankAndResidual)
{
    const Grid g = make_equidistant_grid(40, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    const FunctionalSample x = random_sample(15, 40, 8);
    for (bool weighted : {true, false}) {
        const FpcDecomposition d = empirical_fpc(x, w, {weighted});
        const FunctionalSample full = truncate_fpc(d, d.rank, g);
        EXPECT_LT((full.values - x.values).cwiseAbs().maxCoeff(), 1e-10);
        for (Index K : {1, 3, 6, 10}) {
            const FunctionalSample t = truncate_fpc(d, K, g);
            EXPECT_EQ(numerical_rank(t.values), K);
            // residual in the inner product the decomposition was built with
            const Vector root = weighted ? Vector(w.w.array().sqrt()) : Vector(Vector::Ones(40));
            const double resid = ((x.values - t.values) * root.asDiagonal()).norm();
            const double expected = d.singular_values.tail(d.rank - K).norm();
            EXPECT_NEAR(resid, expected, 1e-10 * expected);
        }
        EXPECT_THROW(truncate_fpc(d, 0, g), std::invalid_argument);
        EXPECT_THROW(truncate_fpc(d, d.rank + 1, g), std::invalid_argument);
    }
}

TEST(Fpc, RankOneTruncationExact)
{
    const Grid g = make_equidistant_grid(20, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    Matrix x = Vector::LinSpaced(5, 1.0, 5.0) * Vector::LinSpaced(20, -1.0, 2.0).transpose();
    const FpcDecomposition d = empirical_fpc({x, g, "X"}, w);
    ASSERT_EQ(d.rank, 1);
    EXPECT_LT((truncate_fpc(d, 1, g).values - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FunctionalSample, ValidateRejectsBadShapes)
{
    const Grid g = make_equidistant_grid(5, {0.0, 1.0});
    EXPECT_THROW(validate({Matrix::Zero(2, 4), g, "X"}), std::invalid_argument);
    Matrix bad = Matrix::Zero(2, 5);
    bad(1, 2) = std::nan("");
    EXPECT_THROW(validate({bad, g, "X"}), std::invalid_argument);
}
