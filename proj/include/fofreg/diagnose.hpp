#pragma once

/**
 * @file diagnose.hpp
 * @brief Identifiability diagnostics for the s-direction of the model.
 *
 * Two quantities are combined into the flag rule:
 *  - kappa: condition number of D_s^T D_s with D_s = X W B_s; infinite when
 *    D_s is numerically rank deficient;
 *  - overlap: the Larsson-Villani trace measure between the orthogonal
 *    complement of the curve space and W B_s times the penalty null space.
 * A specification is flagged when kappa >= 1e6 and overlap >= 0.95.
 */

#include "fofreg/fpc.hpp"

#include <optional>
#include <string>

namespace fofreg {

struct DiagnosticThresholds {
    double kappa = 1e6;
    double overlap = 0.95;
};

struct DiagnosticReport {
    double kappa = 0.0; ///< may be +inf
    double overlap = 0.0;
    bool flagged = false;
    Matrix constraint_basis; ///< S x q, q possibly 0
    DiagnosticThresholds thresholds;
    double rank_tolerance = kRankTolerance;

    Index n_constraints() const { return constraint_basis.cols(); }
};

/// trace(V_B^T V_A V_A^T V_B) over the column-space bases of A and B.
inline double lv_overlap(const Matrix& A, const Matrix& B)
{
    if (A.rows() != B.rows())
        throw std::invalid_argument("lv_overlap: row counts differ");
    if (A.cols() == 0 || B.cols() == 0)
        return 0.0;
    const Matrix va = range_basis(A);
    const Matrix vb = range_basis(B);
    if (va.cols() == 0 || vb.cols() == 0)
        return 0.0;
    return (va.transpose() * vb).squaredNorm();
}

/// Orthonormal basis of the orthogonal complement of the column space of A,
/// taken from the null side of the full SVD.
inline Matrix orthogonal_complement(const Matrix& A)
{
    if (A.cols() == 0)
        return Matrix::Identity(A.rows(), A.rows());
    const SvdSplit svd = split_svd(A);
    return svd.left_null();
}

/// (sigma_max / sigma_min)^2 of D_s; +inf under numerical rank deficiency.
inline double condition_number(const Matrix& D_s)
{
    if (D_s.size() == 0 || D_s.rows() < D_s.cols())
        return kInfinity;
    Eigen::BDCSVD<Matrix> svd(D_s);
    const Vector& sv = svd.singularValues();
    const double top = sv[0];
    const double bottom = sv[sv.size() - 1];
    if (!(top > 0.0) || bottom < kRankTolerance * top)
        return kInfinity;
    const double r = top / bottom;
    return r * r;
}

/// Orthonormal eigenvectors of P with eigenvalue below tolerance.
inline Matrix penalty_nullspace_basis(const MarginalPenalty& P)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(P.matrix);
    const Vector& ev = eig.eigenvalues(); // ascending
    const double top = ev.cwiseAbs().maxCoeff();
    Index n = 0;
    if (!(top > 0.0))
        n = ev.size();
    else
        while (n < ev.size() && ev[n] < kRankTolerance * top)
            ++n;
    return eig.eigenvectors().leftCols(n);
}

inline Matrix design_s(const FunctionalSample& X, const QuadratureWeights& W, const BasisMatrix& B_s)
{
    if (X.G() != W.size() || B_s.rows() != X.G())
        throw std::invalid_argument("design_s: dimension mismatch between X, weights and basis");
    return X.values * W.w.asDiagonal() * B_s.values;
}

/// Overlap between ke(X^T X) and the unpenalized functions W B_s P_{s,perp}.
inline double kernel_overlap_measure(const FunctionalSample& X, const QuadratureWeights& W,
                                     const BasisMatrix& B_s, const MarginalPenalty& P_s)
{
    if (X.G() != W.size() || B_s.rows() != X.G() || P_s.K() != B_s.K())
        throw std::invalid_argument("kernel_overlap_measure: dimension mismatch");
    const Matrix null_p = penalty_nullspace_basis(P_s);
    if (null_p.cols() == 0)
        return 0.0;
    const Matrix x_perp = orthogonal_complement(X.values.transpose());
    if (x_perp.cols() == 0)
        return 0.0;
    return lv_overlap(x_perp, W.w.asDiagonal() * B_s.values * null_p);
}

/// Basis V_{Cs+} of the overlap between ke(K^X) and the penalty null space,
/// evaluated on the grid: left singular vectors with positive singular value
/// of Proj_{X_perp} diag(w) B_s P_{s,perp}. The unpenalized image is
/// orthonormalised first so the singular values are principal-angle cosines
/// and the cutoff is scale free; the spanned space is unchanged.
inline Matrix overlap_constraint_basis(const FunctionalSample& X, const QuadratureWeights& W,
                                       const BasisMatrix& B_s, const Matrix& P_nullbasis)
{
    if (X.G() != W.size() || B_s.rows() != X.G() || P_nullbasis.rows() != B_s.K())
        throw std::invalid_argument("overlap_constraint_basis: dimension mismatch");
    const Index S = X.G();
    if (P_nullbasis.cols() == 0)
        return Matrix(S, 0);
    const Matrix x_perp = orthogonal_complement(X.values.transpose());
    if (x_perp.cols() == 0)
        return Matrix(S, 0);

    // projector onto span(X_perp) via its QR factor
    Eigen::HouseholderQR<Matrix> qr(x_perp);
    const Matrix q = qr.householderQ() * Matrix::Identity(S, x_perp.cols());

    const Matrix image = range_basis(W.w.asDiagonal() * B_s.values * P_nullbasis);
    if (image.cols() == 0)
        return Matrix(S, 0);
    const Matrix projected = q * (q.transpose() * image);

    Eigen::BDCSVD<Matrix> svd(projected, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    Index r = 0;
    while (r < sv.size() && sv[r] > kRankTolerance)
        ++r;
    return svd.matrixU().leftCols(r);
}

inline DiagnosticReport diagnose(const FunctionalSample& X, const QuadratureWeights& W,
                                 const BasisMatrix& B_s, const MarginalPenalty& P_s,
                                 DiagnosticThresholds thresholds = {})
{
    DiagnosticReport r;
    r.thresholds = thresholds;
    r.kappa = condition_number(design_s(X, W, B_s));
    r.overlap = kernel_overlap_measure(X, W, B_s, P_s);
    r.flagged = r.kappa >= thresholds.kappa && r.overlap >= thresholds.overlap;
    if (r.flagged)
        r.constraint_basis = overlap_constraint_basis(X, W, B_s, penalty_nullspace_basis(P_s));
    else
        r.constraint_basis = Matrix(X.G(), 0);
    return r;
}

/// Raised when the penalized problem has no unique solution.
class NonIdentifiableError : public std::runtime_error {
public:
    explicit NonIdentifiableError(const std::string& what,
                                  std::optional<DiagnosticReport> report = std::nullopt)
        : std::runtime_error(what), report_(std::move(report))
    {
    }
    const std::optional<DiagnosticReport>& report() const { return report_; }

private:
    std::optional<DiagnosticReport> report_;
};

} // namespace fofreg
