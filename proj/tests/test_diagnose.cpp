#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fofreg;

namespace {

Matrix unit(Index n, Index i)
{
    Matrix e = Matrix::Zero(n, 1);
    e(i, 0) = 1.0;
    return e;
}

struct Env {
    Grid gs = make_equidistant_grid(100, {0.0, 1.0});
    QuadratureWeights ws = quadrature_weights(gs);
};

FunctionalSample draw(ProcessKind k, Index M, Index N, const Env& s, std::uint64_t seed)
{
    Rng rng(seed);
    return sample_covariate(eigen_system(k, M, s.gs, s.ws), N, s.gs, rng);
}

} // namespace

TEST(LvOverlap, TrivialCases)
{
    std::mt19937_64 rng(1);
    const Matrix a = oracle::random_matrix(8, 3, rng);
    EXPECT_NEAR(lv_overlap(a, a), 3.0, 1e-12);
    EXPECT_NEAR(lv_overlap(unit(3, 0), unit(3, 1)), 0.0, 1e-15);
    Matrix e12(3, 2);
    e12 << 1, 0, 0, 1, 0, 0;
    EXPECT_NEAR(lv_overlap(e12, unit(3, 0)), 1.0, 1e-15);
    EXPECT_EQ(lv_overlap(Matrix(3, 0), e12), 0.0);
    EXPECT_THROW(lv_overlap(Matrix::Ones(3, 1), Matrix::Ones(4, 1)), std::invalid_argument);
}

TEST(LvOverlap, MatchesProjectorOracleAndIsSymmetric)
{
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 50; ++rep) {
        const Index n = 6 + rep % 7, pa = 1 + rep % 4, pb = 1 + (rep / 4) % 4;
        const Matrix a = oracle::random_matrix(n, pa, rng);
        const Matrix b = oracle::random_matrix(n, pb, rng);
        const double ab = lv_overlap(a, b);
        EXPECT_NEAR(ab, lv_overlap(b, a), 1e-10);
        EXPECT_NEAR(ab, oracle::lv_overlap(a, b), 1e-10);
        EXPECT_GE(ab, -1e-10);
        EXPECT_LE(ab, std::min(pa, pb) + 1e-10);
    }
}

TEST(LvOverlap, UsesColumnSpaceNotColumns)
{
    std::mt19937_64 rng(3);
    const Matrix a = oracle::random_matrix(7, 2, rng);
    Matrix redundant(7, 4);
    redundant << a, a * 3.0; // rank 2
    EXPECT_NEAR(lv_overlap(redundant, redundant), 2.0, 1e-10);
}

TEST(OrthogonalComplement, Basics)
{
    const Matrix c = orthogonal_complement(unit(2, 0));
    ASSERT_EQ(c.cols(), 1);
    EXPECT_NEAR(std::abs(c(1, 0)), 1.0, 1e-15);
    EXPECT_NEAR(c(0, 0), 0.0, 1e-15);

    std::mt19937_64 rng(4);
    const Matrix a = oracle::random_matrix(9, 4, rng);
    const Matrix comp = orthogonal_complement(a);
    ASSERT_EQ(comp.cols(), 5);
    EXPECT_LT((comp.transpose() * comp - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((comp.transpose() * a).cwiseAbs().maxCoeff(), 1e-12);
    Matrix both(9, 9);
    both << a, comp;
    EXPECT_EQ(numerical_rank(both), 9);

    EXPECT_EQ(orthogonal_complement(oracle::random_matrix(4, 6, rng)).cols(), 0);
}

TEST(ConditionNumber, Values)
{
    EXPECT_DOUBLE_EQ(condition_number(Matrix::Identity(4, 4)), 1.0);
    Matrix d(2, 2);
    d << 2, 0, 0, 1;
    EXPECT_NEAR(condition_number(d), 4.0, 1e-14);
    EXPECT_EQ(condition_number(Matrix::Zero(3, 3)), kInfinity);
    EXPECT_EQ(condition_number(Matrix::Ones(2, 5)), kInfinity);

    Env s;
    const FunctionalSample x = draw(ProcessKind::PolyLin, 3, 50, s, 5);
    const BasisMatrix bs = bspline_basis(s.gs, 5, 3);
    EXPECT_EQ(condition_number(design_s(x, s.ws, bs)), kInfinity);
}

TEST(PenaltyNullspace, Bases)
{
    const Matrix n1 = penalty_nullspace_basis(difference_penalty(5, 1));
    ASSERT_EQ(n1.cols(), 1);
    EXPECT_LT((n1.col(0).cwiseAbs().array() - 1.0 / std::sqrt(5.0)).abs().maxCoeff(), 1e-12);

    const Matrix n2 = penalty_nullspace_basis(difference_penalty(5, 2));
    ASSERT_EQ(n2.cols(), 2);
    Matrix poly(5, 2);
    poly << Vector::Ones(5), Vector::LinSpaced(5, 0.0, 4.0);
    EXPECT_NEAR(lv_overlap(n2, poly), 2.0, 1e-10);

    EXPECT_EQ(penalty_nullspace_basis(ridge_penalty(5)).cols(), 0);
}

TEST(KernelOverlap, RidgeIsZero)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::Poly1Plus, 5, 50, s, 6);
    EXPECT_EQ(kernel_overlap_measure(x, s.ws, bspline_basis(s.gs, 12, 3), ridge_penalty(12)), 0.0);
}

TEST(KernelOverlap, CurvewiseCentredIsHigh)
{
    Env s;
    const FunctionalSample raw = draw(ProcessKind::FourierExp, 8, 50, s, 7);
    const FunctionalSample x = center_curvewise(raw, s.ws).first;
    const BasisMatrix bs = bspline_basis(s.gs, 12, 3);
    EXPECT_GE(kernel_overlap_measure(x, s.ws, bs, difference_penalty(12, 1)), 0.95);
    EXPECT_GE(kernel_overlap_measure(x, s.ws, bs, difference_penalty(12, 2)), 0.95);
}

TEST(KernelOverlap, PolyIsLow)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::PolyLin, 5, 50, s, 8);
    EXPECT_LT(kernel_overlap_measure(x, s.ws, bspline_basis(s.gs, 8, 3), difference_penalty(8, 1)), 0.95);
}

TEST(ConstraintBasis, FullRankCovariateHasNone)
{
    const Grid g = make_equidistant_grid(20, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    std::mt19937_64 rng(9);
    const FunctionalSample x{oracle::random_matrix(30, 20, rng), g, "X"};
    const BasisMatrix bs = bspline_basis(g, 6, 3);
    EXPECT_EQ(overlap_constraint_basis(x, w, bs, penalty_nullspace_basis(difference_penalty(6, 1))).cols(), 0);
}

TEST(ConstraintBasis, CurvewiseCentredGivesConstant)
{
    Env s;
    const FunctionalSample x = center_curvewise(draw(ProcessKind::Wiener, 8, 50, s, 10), s.ws).first;
    const BasisMatrix bs = bspline_basis(s.gs, 12, 3);
    const Matrix v = overlap_constraint_basis(x, s.ws, bs, penalty_nullspace_basis(difference_penalty(12, 1)));
    ASSERT_EQ(v.cols(), 1);
    const Vector ones = Vector::Ones(100).normalized();
    EXPECT_GT(std::abs(v.col(0).dot(ones)), 0.99);
    // columns lie in the complement of the curve space
    const Matrix xp = orthogonal_complement(x.values.transpose());
    EXPECT_LT((v - xp * (xp.transpose() * v)).norm(), 1e-10);
}

TEST(ConstraintBasis, Poly2PlusSecondOrderHasTwo)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::Poly2Plus, 5, 50, s, 11);
    const BasisMatrix bs = bspline_basis(s.gs, 12, 3);
    const Matrix v = overlap_constraint_basis(x, s.ws, bs, penalty_nullspace_basis(difference_penalty(12, 2)));
    EXPECT_EQ(v.cols(), 2);
    const Matrix xp = orthogonal_complement(x.values.transpose());
    EXPECT_LT((v - xp * (xp.transpose() * v)).norm(), 1e-10);
}

TEST(ConstraintBasis, EmptyNullSpaceGivesNone)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::Poly1Plus, 5, 50, s, 12);
    EXPECT_EQ(overlap_constraint_basis(x, s.ws, bspline_basis(s.gs, 8, 3), Matrix(8, 0)).cols(), 0);
}

// ke(D_s^T D_s) and ke(P_s) intersect non-trivially exactly when the
// constraint basis is non-empty, on constructions where the unpenalized
// functions lie either inside or outside the covariate's kernel.
TEST(ConstraintBasis, EquivalentToKernelIntersection)
{
    const Grid g = make_equidistant_grid(40, {0.0, 1.0});
    const QuadratureWeights w = quadrature_weights(g);
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        const int ks = 6 + rep % 5;
        const int order = 1 + rep % 2;
        const BasisMatrix bs = bspline_basis(g, ks, 3);
        const MarginalPenalty p = difference_penalty(ks, order);
        const Matrix unpen = w.w.asDiagonal() * bs.values * penalty_nullspace_basis(p);
        const Index n = 8;
        const bool overlap = rep % 2 == 0;

        Matrix rows = oracle::random_matrix(n, 40, rng);
        if (overlap) {
            // rows orthogonal to the unpenalized functions
            const Matrix q = range_basis(unpen);
            rows -= (rows * q) * q.transpose();
        } else {
            // the unpenalized functions are among the rows
            rows.topRows(unpen.cols()) = unpen.transpose();
        }
        const FunctionalSample x{rows, g, "X"};
        const Matrix ds = design_s(x, w, bs);
        Matrix stacked(ds.rows() + p.matrix.rows(), ks);
        stacked << ds, p.matrix;
        const Index intersection = ks - numerical_rank(stacked);
        const Index q = overlap_constraint_basis(x, w, bs, penalty_nullspace_basis(p)).cols();
        EXPECT_EQ(intersection > 0, overlap) << rep;
        EXPECT_EQ(q > 0, intersection > 0) << rep;
    }
}

TEST(Diagnose, PolyWithEnoughComponentsIsNotFlagged)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::PolyLin, 8, 50, s, 14);
    const DiagnosticReport r = diagnose(x, s.ws, bspline_basis(s.gs, 5, 3), difference_penalty(5, 1));
    EXPECT_TRUE(std::isfinite(r.kappa));
    EXPECT_FALSE(r.flagged);
    EXPECT_EQ(r.n_constraints(), 0);
}

TEST(Diagnose, Poly1PlusFirstOrderIsFlagged)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::Poly1Plus, 5, 50, s, 15);
    const DiagnosticReport r = diagnose(x, s.ws, bspline_basis(s.gs, 12, 3), difference_penalty(12, 1));
    EXPECT_EQ(r.kappa, kInfinity);
    EXPECT_GE(r.overlap, 0.95);
    EXPECT_TRUE(r.flagged);
    EXPECT_EQ(r.n_constraints(), 1);
}

TEST(Diagnose, RidgeNeverFlags)
{
    Env s;
    for (ProcessKind k : {ProcessKind::Poly1Plus, ProcessKind::Poly2Plus, ProcessKind::FourierExp}) {
        const FunctionalSample x = draw(k, 3, 50, s, 16);
        const DiagnosticReport r = diagnose(x, s.ws, bspline_basis(s.gs, 12, 3), ridge_penalty(12));
        EXPECT_EQ(r.overlap, 0.0);
        EXPECT_FALSE(r.flagged);
    }
}

TEST(Diagnose, FlagRuleUsesBothThresholds)
{
    Env s;
    const FunctionalSample x = draw(ProcessKind::Poly1Plus, 5, 50, s, 17);
    const BasisMatrix bs = bspline_basis(s.gs, 12, 3);
    const DiagnosticReport strict = diagnose(x, s.ws, bs, difference_penalty(12, 1), {kInfinity, 0.95});
    EXPECT_TRUE(strict.flagged); // kappa is +inf, so even an infinite threshold is met
    const DiagnosticReport high = diagnose(x, s.ws, bs, difference_penalty(12, 1), {1e6, 1.5});
    EXPECT_FALSE(high.flagged);
    EXPECT_EQ(high.n_constraints(), 0);
}

TEST(NonIdentifiableError, CarriesReport)
{
    DiagnosticReport r;
    r.kappa = kInfinity;
    r.flagged = true;
    const NonIdentifiableError e("x", r);
    ASSERT_TRUE(e.report().has_value());
    EXPECT_TRUE(e.report()->flagged);
    EXPECT_FALSE(NonIdentifiableError("y").report().has_value());
}
