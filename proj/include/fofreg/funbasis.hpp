#pragma once

/**
 * @file funbasis.hpp
 * @brief Grids, quadrature weights, B-spline bases and difference penalties.
 *
 * Coefficient surfaces are stored as a K_s x K_t matrix Theta and vectorised
 * column-major, theta = vec(Theta). Under that ordering the s-direction
 * penalty acts as (I_{K_t} kron P_s) and the t-direction penalty as
 * (P_t kron I_{K_s}); the tensor design is B_t kron (X W B_s).
 */

#include "fofreg/linalg.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fofreg {

/// Strictly increasing evaluation points inside a closed interval [a, b].
class Grid {
public:
    Grid() = default;

    Grid(Vector points, double a, double b) : points_(std::move(points)), a_(a), b_(b)
    {
        if (!(a_ < b_))
            throw std::invalid_argument("Grid: interval must satisfy a < b");
        if (points_.size() < 2)
            throw std::invalid_argument("Grid: need at least 2 points");
        for (Index i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i]) || points_[i] < a_ || points_[i] > b_)
                throw std::invalid_argument("Grid: point outside interval");
            if (i > 0 && !(points_[i] > points_[i - 1]))
                throw std::invalid_argument("Grid: points must be strictly increasing");
        }
    }

    const Vector& points() const { return points_; }
    double a() const { return a_; }
    double b() const { return b_; }
    double length() const { return b_ - a_; }
    Index size() const { return points_.size(); }
    double operator[](Index i) const { return points_[i]; }

    bool same_as(const Grid& other, double tol = 1e-12) const
    {
        return size() == other.size() && std::abs(a_ - other.a_) <= tol &&
               std::abs(b_ - other.b_) <= tol &&
               (points_ - other.points_).cwiseAbs().maxCoeff() <= tol;
    }

private:
    Vector points_;
    double a_ = 0.0;
    double b_ = 1.0;
};

/// Per-point integration weights; W = diag(w).
struct QuadratureWeights {
    Vector w;

    Index size() const { return w.size(); }
    auto diag() const { return w.asDiagonal(); }
};

/// Grid-length x K matrix of basis evaluations.
struct BasisMatrix {
    Matrix values;
    int degree = 3;
    Vector knots;

    Index K() const { return values.cols(); }
    Index rows() const { return values.rows(); }
};

enum class PenaltyKind { Difference1, Difference2, Ridge, FullrankShrinkage, Fame };

inline std::string to_string(PenaltyKind kind)
{
    switch (kind) {
    case PenaltyKind::Difference1: return "difference-order-1";
    case PenaltyKind::Difference2: return "difference-order-2";
    case PenaltyKind::Ridge: return "ridge";
    case PenaltyKind::FullrankShrinkage: return "fullrank-shrinkage";
    case PenaltyKind::Fame: return "fame";
    }
    return "unknown";
}

/// Symmetric PSD K x K penalty with its kind tag.
struct MarginalPenalty {
    Matrix matrix;
    PenaltyKind kind = PenaltyKind::Difference1;
    Index nullspace_dim = 0;
    std::vector<std::string> notes;

    Index K() const { return matrix.rows(); }
};

/// Eigenvalues below kRankTolerance * largest.
inline Index count_null_eigenvalues(const Matrix& sym)
{
    if (sym.size() == 0)
        return 0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    if (!(top > 0.0))
        return sym.rows();
    Index n = 0;
    for (Index i = 0; i < ev.size(); ++i)
        if (ev[i] < kRankTolerance * top)
            ++n;
    return n;
}

/// Validates symmetry and PSD-ness and fills in nullspace_dim.
inline MarginalPenalty make_marginal_penalty(Matrix m, PenaltyKind kind)
{
    if (m.rows() != m.cols() || m.rows() == 0)
        throw std::invalid_argument("penalty must be a non-empty square matrix");
    if (!is_symmetric(m))
        throw std::invalid_argument("penalty must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    if (ev.minCoeff() < -1e-10 * top)
        throw std::invalid_argument("penalty must be positive semi-definite");
    MarginalPenalty p;
    p.nullspace_dim = count_null_eigenvalues(m);
    p.matrix = std::move(m);
    p.kind = kind;
    return p;
}

inline Grid make_equidistant_grid(int n, std::pair<double, double> interval)
{
    const auto [a, b] = interval;
    if (n < 2)
        throw std::invalid_argument("make_equidistant_grid: n must be >= 2");
    if (!(a < b))
        throw std::invalid_argument("make_equidistant_grid: need a < b");
    Vector pts(n);
    for (int i = 0; i < n; ++i)
        pts[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    pts[n - 1] = b;
    return Grid(std::move(pts), a, b);
}

/// Trapezoid-style weights; the end weights absorb any gap to the interval
/// boundary, so the weights always sum to b - a.
inline QuadratureWeights quadrature_weights(const Grid& grid)
{
    const Vector& s = grid.points();
    const Index n = s.size();
    Vector w(n);
    w[0] = (s[1] - s[0]) / 2.0 + (s[0] - grid.a());
    for (Index j = 1; j + 1 < n; ++j)
        w[j] = (s[j + 1] - s[j - 1]) / 2.0;
    w[n - 1] = (s[n - 1] - s[n - 2]) / 2.0 + (grid.b() - s[n - 1]);
    return {std::move(w)};
}

/// Equally spaced knots on [a, b] with (degree + 1)-fold boundary knots.
inline Vector clamped_knots(double a, double b, int K, int degree)
{
    const int n_inner = K - degree - 1;
    Vector knots(K + degree + 1);
    Index k = 0;
    for (int i = 0; i <= degree; ++i)
        knots[k++] = a;
    for (int i = 1; i <= n_inner; ++i)
        knots[k++] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n_inner + 1);
    for (int i = 0; i <= degree; ++i)
        knots[k++] = b;
    return knots;
}

/// Cox-de Boor evaluation of all K B-splines on the grid.
inline BasisMatrix bspline_basis(const Grid& grid, int K, int degree)
{
    if (degree < 0)
        throw std::invalid_argument("bspline_basis: degree must be >= 0");
    if (K < degree + 1)
        throw std::invalid_argument("bspline_basis: K must be >= degree + 1");
    if (grid.size() < K)
        throw std::invalid_argument("bspline_basis: grid shorter than basis dimension");

    const Vector knots = clamped_knots(grid.a(), grid.b(), K, degree);
    Matrix B = Matrix::Zero(grid.size(), K);
    std::vector<double> left(degree + 1), right(degree + 1), N(degree + 1);

    for (Index r = 0; r < grid.size(); ++r) {
        const double x = grid[r];
        // knot span: knots[span] <= x < knots[span + 1], closed at b
        int span = K - 1;
        if (x < knots[K]) {
            span = degree;
            while (span < K - 1 && x >= knots[span + 1])
                ++span;
        }
        N[0] = 1.0;
        for (int j = 1; j <= degree; ++j) {
            left[j] = x - knots[span + 1 - j];
            right[j] = knots[span + j] - x;
            double saved = 0.0;
            for (int q = 0; q < j; ++q) {
                const double tmp = N[q] / (right[q + 1] + left[j - q]);
                N[q] = saved + right[q + 1] * tmp;
                saved = left[j - q] * tmp;
            }
            N[j] = saved;
        }
        for (int j = 0; j <= degree; ++j)
            B(r, span - degree + j) = N[j];
    }
    return {std::move(B), degree, knots};
}

/// (K - order) x K forward-difference operator.
inline Matrix difference_operator(int K, int order)
{
    Matrix d = Matrix::Identity(K, K);
    for (int o = 0; o < order; ++o) {
        const Index r = d.rows() - 1;
        d = (d.bottomRows(r) - d.topRows(r)).eval();
    }
    return d;
}

inline MarginalPenalty difference_penalty(int K, int order)
{
    if (order != 1 && order != 2)
        throw std::invalid_argument("difference_penalty: order must be 1 or 2");
    if (K <= order)
        throw std::invalid_argument("difference_penalty: K must exceed order");
    const Matrix d = difference_operator(K, order);
    MarginalPenalty p;
    p.matrix = d.transpose() * d;
    p.kind = order == 1 ? PenaltyKind::Difference1 : PenaltyKind::Difference2;
    p.nullspace_dim = order;
    return p;
}

/// lambda_s (I_{K_t} kron P_s) + lambda_t (P_t kron I_{K_s}).
struct TensorPenalty {
    MarginalPenalty P_s;
    MarginalPenalty P_t;
    double lambda_s = 0.0;
    double lambda_t = 0.0;
    Matrix assembled;

    Index K_s() const { return P_s.K(); }
    Index K_t() const { return P_t.K(); }
};

inline Matrix tensor_penalty_matrix(const Matrix& Ps, const Matrix& Pt, double lambda_s,
                                    double lambda_t)
{
    const Index ks = Ps.rows();
    const Index kt = Pt.rows();
    Matrix out = Matrix::Zero(ks * kt, ks * kt);
    if (lambda_s != 0.0)
        for (Index k = 0; k < kt; ++k)
            out.block(k * ks, k * ks, ks, ks) += lambda_s * Ps;
    if (lambda_t != 0.0)
        for (Index j = 0; j < kt; ++j)
            for (Index k = 0; k < kt; ++k)
                if (Pt(k, j) != 0.0)
                    out.block(k * ks, j * ks, ks, ks).diagonal().array() += lambda_t * Pt(k, j);
    return out;
}

inline TensorPenalty assemble_tensor_penalty(const MarginalPenalty& P_s, const MarginalPenalty& P_t,
                                             double lambda_s, double lambda_t)
{
    if (!(lambda_s >= 0.0) || !(lambda_t >= 0.0))
        throw std::invalid_argument("assemble_tensor_penalty: smoothing parameters must be >= 0");
    TensorPenalty tp{P_s, P_t, lambda_s, lambda_t, {}};
    tp.assembled = tensor_penalty_matrix(P_s.matrix, P_t.matrix, lambda_s, lambda_t);
    return tp;
}

} // namespace fofreg
