#pragma once

// Dense linear-algebra helpers shared by every module: the repo-wide rank
// tolerance, SVD splitting into range/null parts, Kronecker products.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fofreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values (or eigenvalues) below this fraction of the largest one
/// count as zero.
inline constexpr double kRankTolerance = 1e-10;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Number of singular values above `tol * max`.
inline Index count_above(const Vector& values, double tol = kRankTolerance)
{
    if (values.size() == 0)
        return 0;
    const double top = values.cwiseAbs().maxCoeff();
    if (!(top > 0.0))
        return 0;
    Index n = 0;
    for (Index i = 0; i < values.size(); ++i)
        if (std::abs(values[i]) > tol * top)
            ++n;
    return n;
}

inline Index numerical_rank(const Matrix& a, double tol = kRankTolerance)
{
    if (a.size() == 0)
        return 0;
    Eigen::BDCSVD<Matrix> svd(a);
    return count_above(svd.singularValues(), tol);
}

/// Full SVD split at the rank tolerance. Singular values come sorted
/// descending, so the first `rank` columns are the range parts.
struct SvdSplit {
    Matrix left;            ///< all left singular vectors (rows x rows)
    Matrix right;           ///< all right singular vectors (cols x cols)
    Vector singular_values; ///< min(rows, cols) values, descending
    Index rank = 0;

    Matrix left_range() const { return left.leftCols(rank); }
    Matrix left_null() const { return left.rightCols(left.cols() - rank); }
    Matrix right_range() const { return right.leftCols(rank); }
    Matrix right_null() const { return right.rightCols(right.cols() - rank); }
    Vector range_values() const { return singular_values.head(rank); }
};

inline SvdSplit split_svd(const Matrix& a, double tol = kRankTolerance)
{
    SvdSplit out;
    if (a.rows() == 0 || a.cols() == 0) {
        out.left = Matrix::Identity(a.rows(), a.rows());
        out.right = Matrix::Identity(a.cols(), a.cols());
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.left = svd.matrixU();
    out.right = svd.matrixV();
    out.singular_values = svd.singularValues();
    out.rank = count_above(out.singular_values, tol);
    return out;
}

/// Orthonormal basis of the column space (left singular vectors with
/// positive singular values).
inline Matrix range_basis(const Matrix& a, double tol = kRankTolerance)
{
    if (a.rows() == 0 || a.cols() == 0)
        return Matrix(a.rows(), 0);
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
    const Index r = count_above(svd.singularValues(), tol);
    return svd.matrixU().leftCols(r);
}

inline Matrix kron(const Matrix& a, const Matrix& b)
{
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Column-major vec(): matches Eigen's storage order.
inline Vector vec(const Matrix& m)
{
    return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Index rows, Index cols)
{
    if (v.size() != rows * cols)
        throw std::invalid_argument("unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-12)
{
    if (m.rows() != m.cols())
        return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Scale a matrix by a diagonal from the left: diag(d) * m.
inline Matrix scale_rows(const Vector& d, const Matrix& m)
{
    return d.asDiagonal() * m;
}

} // namespace fofreg
