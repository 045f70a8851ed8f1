#pragma once

/**
 * @file fit.hpp
 * @brief Penalized least squares for the tensor-product function-on-function model.
 *
 * The model vec(Y) = D theta + eps uses D = B_t kron D_s with D_s = X W B_s.
 * D is kept in factored form:
 *
 *   D^T D        = (B_t^T B_t) kron (D_s^T D_s)
 *   D^T vec(Y)   = vec(D_s^T Y B_t)
 *   D theta      = vec(D_s Theta B_t^T)
 *
 * and the normal equations (D^T D + P) theta = D^T vec(Y) are solved by
 * Cholesky on the K_s K_t system. A Cholesky breakdown or a tiny condition
 * estimate is cross-checked on the kernels of the three terms; a confirmed
 * singular normal matrix means the penalty does not restore identifiability
 * and raises NonIdentifiableError.
 *
 * Smoothing parameters are chosen on a log grid by generalized
 * cross-validation, GCV = NT * RSS / (NT - edf)^2.
 */

#include "fofreg/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace fofreg {

/// Factored design with SVDs of both factors computed at construction.
class TensorDesign {
public:
    /// Above this many entries D is never materialized.
    static constexpr double kDenseCap = 1e7;

    /// Without grid_t the response grid defaults to T equidistant points on [0, 1].
    TensorDesign(FunctionalSample X, QuadratureWeights W, BasisMatrix B_s, BasisMatrix B_t,
                 std::optional<Grid> grid_t = std::nullopt)
        : X_(std::move(X)), W_(std::move(W)), B_s_(std::move(B_s)), B_t_(std::move(B_t))
    {
        validate(X_);
        if (W_.size() != X_.G() || B_s_.rows() != X_.G())
            throw std::invalid_argument("assemble_design: X, weights and B_s disagree on grid length");
        if (B_t_.rows() < 1 || B_t_.K() < 1 || B_s_.K() < 1)
            throw std::invalid_argument("assemble_design: empty basis");
        D_s_ = design_s(X_, W_, B_s_);
        svd_s_ = split_svd(D_s_);
        svd_t_ = split_svd(B_t_.values);
        gram_s_ = D_s_.transpose() * D_s_;
        gram_t_ = B_t_.values.transpose() * B_t_.values;
        if (grid_t) {
            if (grid_t->size() != B_t_.rows())
                throw std::invalid_argument("assemble_design: grid_t does not match B_t");
            grid_t_ = std::move(*grid_t);
        } else {
            grid_t_ = make_equidistant_grid(static_cast<int>(B_t_.rows()), {0.0, 1.0});
        }
    }

    const FunctionalSample& X() const { return X_; }
    const QuadratureWeights& W() const { return W_; }
    const BasisMatrix& B_s() const { return B_s_; }
    const BasisMatrix& B_t() const { return B_t_; }
    const Matrix& D_s() const { return D_s_; }
    const SvdSplit& svd_s() const { return svd_s_; }
    const SvdSplit& svd_t() const { return svd_t_; }
    const Matrix& gram_s() const { return gram_s_; }
    const Matrix& gram_t() const { return gram_t_; }
    const Grid& grid_t() const { return grid_t_; }

    Index N() const { return X_.N(); }
    Index S() const { return X_.G(); }
    Index T() const { return B_t_.rows(); }
    Index K_s() const { return B_s_.K(); }
    Index K_t() const { return B_t_.K(); }

    /// rank(D) = rank(B_t) * rank(D_s).
    Index rank() const { return svd_t_.rank * svd_s_.rank; }

    /// D theta as an N x T matrix.
    Matrix apply(const Vector& theta) const
    {
        return D_s_ * unvec(theta, K_s(), K_t()) * B_t_.values.transpose();
    }

    /// D^T vec(Y).
    Vector apply_transpose(const Matrix& Y) const
    {
        if (Y.rows() != N() || Y.cols() != T())
            throw std::invalid_argument("TensorDesign: response has wrong shape");
        return vec(D_s_.transpose() * Y * B_t_.values);
    }

    Matrix dense() const
    {
        const double entries = static_cast<double>(N()) * T() * K_s() * K_t();
        if (entries > kDenseCap)
            throw std::length_error("TensorDesign: dense materialization above cap");
        return kron(B_t_.values, D_s_);
    }

    /// Orthonormal basis of ke(D): [U_t0 kron I, U_t+ kron U_s0].
    Matrix null_basis() const
    {
        const Matrix ut_null = svd_t_.right_null();
        const Matrix ut_range = svd_t_.right_range();
        const Matrix us_null = svd_s_.right_null();
        const Index n1 = ut_null.cols() * K_s();
        const Index n2 = ut_range.cols() * us_null.cols();
        Matrix out(K_s() * K_t(), n1 + n2);
        if (n1 > 0)
            out.leftCols(n1) = kron(ut_null, Matrix::Identity(K_s(), K_s()));
        if (n2 > 0)
            out.rightCols(n2) = kron(ut_range, us_null);
        return out;
    }

private:
    FunctionalSample X_;
    QuadratureWeights W_;
    BasisMatrix B_s_;
    BasisMatrix B_t_;
    Matrix D_s_;
    SvdSplit svd_s_;
    SvdSplit svd_t_;
    Matrix gram_s_;
    Matrix gram_t_;
    Grid grid_t_;
};

inline TensorDesign assemble_design(const FunctionalSample& X, const QuadratureWeights& W,
                                    const BasisMatrix& B_s, const BasisMatrix& B_t,
                                    std::optional<Grid> grid_t = std::nullopt)
{
    return TensorDesign(X, W, B_s, B_t, std::move(grid_t));
}

struct FitResult {
    Vector theta;   ///< vec(Theta), K_s K_t
    Matrix Theta;   ///< K_s x K_t
    Matrix surface; ///< S x T, B_s Theta B_t^T
    Matrix fitted;  ///< N x T
    double lambda_s = 0.0;
    double lambda_t = 0.0;
    double gcv = 0.0;
    double edf = 0.0;
    double rss = 0.0;
    double normal_condition = 0.0; ///< Cholesky-diagonal estimate for the chosen fit
    PenaltyKind penalty_s = PenaltyKind::Difference1;
    PenaltyKind penalty_t = PenaltyKind::Difference1;
    bool constrained = false;
    Index n_constraints = 0;
    Index singular_grid_points = 0;
    std::optional<DiagnosticReport> diagnostics;
    Grid grid_s;
    Grid grid_t;
};

/// D^T D + P, assembled densely (K_s K_t square).
inline Matrix normal_matrix(const TensorDesign& design, const TensorPenalty& penalty)
{
    if (penalty.K_s() != design.K_s() || penalty.K_t() != design.K_t())
        throw std::invalid_argument("normal_matrix: penalty dimensions do not match design");
    return kron(design.gram_t(), design.gram_s()) + penalty.assembled;
}

/// Smallest eigenvalue above kRankTolerance times the largest.
inline bool is_positive_definite(const Matrix& sym)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    return top > 0.0 && ev[0] > kRankTolerance * top;
}

namespace detail {

/// Kronecker pieces of one (possibly reduced) penalized problem.
struct NormalSystem {
    Matrix gram;           ///< (B_t^T B_t) kron (D_s^T D_s)
    Matrix root;           ///< F with F^T F = gram, rows = rank
    Matrix pen_s, pen_t;   ///< I kron P_s, P_t kron I
    Vector rhs;            ///< vec(D_s^T Y B_t)
    Matrix D_s, B_t, Y;
    Index k_s = 0, k_t = 0;
};

inline Matrix gram_root(const Matrix& a)
{
    const SvdSplit svd = split_svd(a);
    return svd.range_values().asDiagonal() * svd.right_range().transpose();
}

inline NormalSystem make_system(const Matrix& D_s, const Matrix& B_t, const Matrix& P_s, const Matrix& P_t,
                                const Matrix& Y)
{
    NormalSystem s;
    s.D_s = D_s;
    s.B_t = B_t;
    s.Y = Y;
    s.k_s = P_s.rows();
    s.k_t = P_t.rows();
    s.gram = kron(B_t.transpose() * B_t, D_s.transpose() * D_s);
    s.root = kron(gram_root(B_t), gram_root(D_s));
    s.pen_s = tensor_penalty_matrix(P_s, P_t, 1.0, 0.0);
    s.pen_t = tensor_penalty_matrix(P_s, P_t, 0.0, 1.0);
    s.rhs = vec(D_s.transpose() * Y * B_t);
    return s;
}

/// Cholesky factors with a reciprocal condition estimate below this are
/// cross-checked by an eigen decomposition.
inline constexpr double kSuspectRcond = 1e-8;

struct Solution {
    Vector theta;
    double edf = 0.0;
    double rss = 0.0;
    double gcv = 0.0;
    double condition = 0.0;
};

/// For positive weights ke(gram + l_s pen_s + l_t pen_t) is the intersection
/// of the three kernels, so singularity is judged on the sum of the terms
/// scaled to unit norm. Large smoothing parameters then never pass for
/// rank deficiency.
inline bool kernels_intersect(const NormalSystem& sys, double lambda_s, double lambda_t)
{
    Matrix m = Matrix::Zero(sys.gram.rows(), sys.gram.cols());
    auto add = [&m](const Matrix& term) {
        const double n = term.norm();
        if (n > 0.0)
            m += term / n;
    };
    add(sys.gram);
    if (lambda_s > 0.0)
        add(sys.pen_s);
    if (lambda_t > 0.0)
        add(sys.pen_t);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    return !(top > 0.0) || ev[0] <= kRankTolerance * top;
}

/// Solves at fixed smoothing parameters; nullopt when the normal matrix is
/// confirmed singular.
inline std::optional<Solution> solve_at(const NormalSystem& sys, double lambda_s, double lambda_t)
{
    const Matrix a = sys.gram + lambda_s * sys.pen_s + lambda_t * sys.pen_t;
    const Vector& b = sys.rhs;

    Solution sol;
    Eigen::LLT<Matrix> llt(a);
    bool ok = llt.info() == Eigen::Success;
    Vector diag;
    if (ok) {
        diag = Matrix(llt.matrixL()).diagonal();
        ok = (diag.array() > 0.0).all() && diag.allFinite();
    }
    // rounding can let Cholesky finish on an exactly singular matrix, so a
    // small reciprocal condition estimate is confirmed as well
    if ((!ok || llt.rcond() <= kSuspectRcond) && kernels_intersect(sys, lambda_s, lambda_t))
        return std::nullopt;
    if (ok) {
        const double r = diag.maxCoeff() / diag.minCoeff();
        sol.condition = r * r;
        sol.theta = llt.solve(b);
        // edf = trace((D^T D + P)^{-1} D^T D) = ||L^{-1} F^T||_F^2
        const Matrix c = llt.matrixL().solve(sys.root.transpose());
        sol.edf = c.squaredNorm();
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
        if (eig.info() != Eigen::Success)
            return std::nullopt;
        const Vector& ev = eig.eigenvalues();
        if (!(ev[0] > 0.0))
            return std::nullopt;
        const Matrix& q = eig.eigenvectors();
        sol.theta = q * (q.transpose() * b).cwiseQuotient(ev);
        sol.edf = (q * ev.cwiseInverse().asDiagonal() * q.transpose() * sys.gram).trace();
        sol.condition = ev[ev.size() - 1] / ev[0];
    }
    const Matrix theta_m = unvec(sol.theta, sys.k_s, sys.k_t);
    sol.rss = (sys.Y - sys.D_s * theta_m * sys.B_t.transpose()).squaredNorm();
    const double nt = static_cast<double>(sys.Y.size());
    const double denom = nt - sol.edf;
    sol.gcv = denom > 0.0 ? nt * sol.rss / (denom * denom) : kInfinity;
    return sol;
}

/// K_s x (K_s - q) orthonormal basis of ke(C_s).
inline Matrix constraint_null_basis(const Matrix& C_s)
{
    const Index ks = C_s.cols();
    Eigen::ColPivHouseholderQR<Matrix> qr(C_s.transpose());
    qr.setThreshold(kRankTolerance);
    const Index q = qr.rank();
    const Matrix full = qr.householderQ() * Matrix::Identity(ks, ks);
    return full.rightCols(ks - q);
}

inline FitResult finish(const TensorDesign& design, const Vector& theta, const Solution& sol, double lambda_s,
                        double lambda_t, PenaltyKind kind_s, PenaltyKind kind_t)
{
    FitResult r;
    r.theta = theta;
    r.Theta = unvec(theta, design.K_s(), design.K_t());
    r.surface = design.B_s().values * r.Theta * design.B_t().values.transpose();
    r.fitted = design.D_s() * r.Theta * design.B_t().values.transpose();
    r.lambda_s = lambda_s;
    r.lambda_t = lambda_t;
    r.gcv = sol.gcv;
    r.edf = sol.edf;
    r.rss = sol.rss;
    r.normal_condition = sol.condition;
    r.penalty_s = kind_s;
    r.penalty_t = kind_t;
    r.grid_s = design.X().grid;
    r.grid_t = design.grid_t();
    return r;
}

} // namespace detail

inline void check_response(const TensorDesign& design, const Matrix& Y)
{
    if (Y.rows() != design.N() || Y.cols() != design.T())
        throw std::invalid_argument("response must be N x T matching the design");
    if (!Y.allFinite())
        throw std::invalid_argument("response has non-finite entries");
}

inline FitResult penalized_solve(const TensorDesign& design, const TensorPenalty& penalty, const Matrix& Y)
{
    check_response(design, Y);
    if (penalty.K_s() != design.K_s() || penalty.K_t() != design.K_t())
        throw std::invalid_argument("penalized_solve: penalty dimensions do not match design");
    const detail::NormalSystem sys =
        detail::make_system(design.D_s(), design.B_t().values, penalty.P_s.matrix, penalty.P_t.matrix, Y);
    const auto sol = detail::solve_at(sys, penalty.lambda_s, penalty.lambda_t);
    if (!sol)
        throw NonIdentifiableError("penalized_solve: normal matrix is singular (kernel overlap)",
                                   diagnose(design.X(), design.W(), design.B_s(), penalty.P_s));
    return detail::finish(design, sol->theta, *sol, penalty.lambda_s, penalty.lambda_t, penalty.P_s.kind,
                          penalty.P_t.kind);
}

/// C_s = V^T diag(w) B_s, the linear constraints C_s Theta = 0.
inline Matrix constraint_matrix(const Matrix& constraint_basis, const QuadratureWeights& W, const BasisMatrix& B_s)
{
    if (constraint_basis.rows() != B_s.rows() || W.size() != B_s.rows())
        throw std::invalid_argument("constraint_matrix: dimension mismatch");
    return constraint_basis.transpose() * W.w.asDiagonal() * B_s.values;
}

inline FitResult constrained_solve(const TensorDesign& design, const TensorPenalty& penalty, const Matrix& Y,
                                   const Matrix& constraint_basis, const QuadratureWeights& W,
                                   const BasisMatrix& B_s)
{
    check_response(design, Y);
    const Index q = constraint_basis.cols();
    if (q >= design.K_s())
        throw std::invalid_argument("constrained_solve: too many constraints for K_s");
    if (q == 0)
        return penalized_solve(design, penalty, Y);

    const Matrix z = detail::constraint_null_basis(constraint_matrix(constraint_basis, W, B_s));
    const Matrix ps = z.transpose() * penalty.P_s.matrix * z;
    const detail::NormalSystem sys =
        detail::make_system(design.D_s() * z, design.B_t().values, ps, penalty.P_t.matrix, Y);
    const auto sol = detail::solve_at(sys, penalty.lambda_s, penalty.lambda_t);
    if (!sol)
        throw NonIdentifiableError("constrained_solve: reduced normal matrix is singular",
                                   diagnose(design.X(), design.W(), design.B_s(), penalty.P_s));
    const Matrix gamma = unvec(sol->theta, z.cols(), design.K_t());
    FitResult r = detail::finish(design, vec(z * gamma), *sol, penalty.lambda_s, penalty.lambda_t,
                                 penalty.P_s.kind, penalty.P_t.kind);
    r.constrained = true;
    r.n_constraints = q;
    return r;
}

struct SmoothingGrid {
    std::vector<double> lambda_s;
    std::vector<double> lambda_t;

    /// n log-spaced values per direction over [lo, hi].
    static SmoothingGrid log_spaced(double lo = 1e-4, double hi = 1e4, int n = 7)
    {
        if (!(lo > 0.0) || !(hi >= lo) || n < 1)
            throw std::invalid_argument("SmoothingGrid: need 0 < lo <= hi and n >= 1");
        SmoothingGrid g;
        for (int i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
            g.lambda_s.push_back(std::pow(10.0, std::log10(lo) + f * (std::log10(hi) - std::log10(lo))));
        }
        g.lambda_t = g.lambda_s;
        return g;
    }
};

struct SmoothingOptions {
    SmoothingGrid grid = SmoothingGrid::log_spaced();
    /// Non-empty: fit under V^T diag(w) B_s Theta = 0.
    Matrix constraint_basis;
};

/// GCV grid search. Ties go to the larger lambda_s, then the larger lambda_t.
inline FitResult select_smoothing(const TensorDesign& design, const MarginalPenalty& P_s,
                                  const MarginalPenalty& P_t, const Matrix& Y, const SmoothingOptions& options = {})
{
    check_response(design, Y);
    if (P_s.K() != design.K_s() || P_t.K() != design.K_t())
        throw std::invalid_argument("select_smoothing: penalty dimensions do not match design");
    if (options.grid.lambda_s.empty() || options.grid.lambda_t.empty())
        throw std::invalid_argument("select_smoothing: empty smoothing grid");

    const Index q = options.constraint_basis.cols();
    if (q >= design.K_s())
        throw std::invalid_argument("select_smoothing: too many constraints for K_s");
    Matrix z;
    detail::NormalSystem sys;
    if (q > 0) {
        z = detail::constraint_null_basis(constraint_matrix(options.constraint_basis, design.W(), design.B_s()));
        sys = detail::make_system(design.D_s() * z, design.B_t().values, z.transpose() * P_s.matrix * z, P_t.matrix,
                                  Y);
    } else {
        sys = detail::make_system(design.D_s(), design.B_t().values, P_s.matrix, P_t.matrix, Y);
    }

    std::vector<double> ls = options.grid.lambda_s;
    std::vector<double> lt = options.grid.lambda_t;
    std::sort(ls.rbegin(), ls.rend());
    std::sort(lt.rbegin(), lt.rend());

    std::optional<detail::Solution> best;
    double best_s = 0.0, best_t = 0.0;
    Index singular = 0;
    for (double a : ls)
        for (double b : lt) {
            auto sol = detail::solve_at(sys, a, b);
            if (!sol) {
                ++singular;
                continue;
            }
            if (!best || sol->gcv < best->gcv) {
                best = std::move(sol);
                best_s = a;
                best_t = b;
            }
        }
    if (!best)
        throw NonIdentifiableError("select_smoothing: every grid point gives a singular normal matrix",
                                   diagnose(design.X(), design.W(), design.B_s(), P_s));

    Vector theta = best->theta;
    if (q > 0)
        theta = vec(z * unvec(theta, z.cols(), design.K_t()));
    FitResult r = detail::finish(design, theta, *best, best_s, best_t, P_s.kind, P_t.kind);
    r.singular_grid_points = singular;
    r.constrained = q > 0;
    r.n_constraints = q;
    return r;
}

/// theta_f = H theta with H = I - U0 (U0^T P U0)^{-1} U0^T P: the point of
/// smallest penalty among all coefficient vectors with the same fit D theta.
inline Vector smoothest_representative(const Vector& theta, const TensorDesign& design, const TensorPenalty& penalty)
{
    if (theta.size() != design.K_s() * design.K_t())
        throw std::invalid_argument("smoothest_representative: theta has wrong length");
    const Matrix u0 = design.null_basis();
    if (u0.cols() == 0)
        return theta;
    const Matrix& p = penalty.assembled;
    const Matrix m = u0.transpose() * p * u0;

    Eigen::SelfAdjointEigenSolver<Matrix> eig_p(p, Eigen::EigenvaluesOnly);
    const double p_top = eig_p.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    if (!(p_top > 0.0) || eig.eigenvalues()[0] <= kRankTolerance * p_top)
        throw NonIdentifiableError("smoothest_representative: no unique smoothest point (kernel overlap)",
                                   diagnose(design.X(), design.W(), design.B_s(), penalty.P_s));
    const Matrix& q = eig.eigenvectors();
    const Vector rhs = u0.transpose() * (p * theta);
    const Vector v0 = q * (q.transpose() * rhs).cwiseQuotient(eig.eigenvalues());
    return theta - u0 * v0;
}

/// Y_new = X_new W B_s Theta B_t^T.
inline FunctionalSample predict(const FitResult& fit, const FunctionalSample& X_new, const QuadratureWeights& W)
{
    validate(X_new);
    if (!X_new.grid.same_as(fit.grid_s) || W.size() != X_new.G())
        throw std::invalid_argument("predict: X_new grid does not match the training grid");
    FunctionalSample out;
    out.values = X_new.values * W.w.asDiagonal() * fit.surface;
    out.grid = fit.grid_t;
    out.label = "Y_hat";
    return out;
}

} // namespace fofreg
