#pragma once

#include <Eigen/Dense>

#include <utility>

namespace tmcc {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

/// Thin SVD factors, S = U * diag(sigma) * V^T.
///
/// sigma is nonincreasing. Each column of U has its first nonzero entry
/// nonnegative (the matching V column is flipped along with it), so the
/// factors are reproducible for distinct singular values.
struct SvdFactors {
    DenseMatrix U;
    DenseVector sigma;
    DenseMatrix V;
};

/// Result of a singular value soft-threshold together with the nuclear norm
/// of the thresholded matrix, which the solvers need for the objective.
struct SvtResult {
    DenseMatrix value;
    double nuclear_norm = 0.0;
    Index rank = 0;
};

bool all_finite(const DenseMatrix& S);

SvdFactors svd(const DenseMatrix& S);

/// Proximal operator of c * ||.||_*: U diag((sigma_i - c)_+) V^T.
DenseMatrix svt(const DenseMatrix& S, double c);
SvtResult svt_with_norm(const DenseMatrix& S, double c);

double norm_frobenius(const DenseMatrix& S);
double norm_operator(const DenseMatrix& S);
double norm_nuclear(const DenseMatrix& S);
/// Largest absolute entry.
double norm_inf(const DenseMatrix& S);

double sigma_min(const DenseMatrix& S);

/// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const DenseMatrix& S, double rel_tol = 1e-10);

struct ProjectionPair {
    DenseMatrix on_support;      // P_S(T)
    DenseMatrix off_support;     // P_S^perp(T)
};

/// Splits T against the row/column spaces of S:
///   off_support = (I - U_S U_S^T) T (I - V_S V_S^T),  on_support = T - off_support.
/// The rank of S is taken numerically with the same 1e-10 relative threshold.
ProjectionPair project_pair(const DenseMatrix& S, const DenseMatrix& T);

}  // namespace linalg
}  // namespace tmcc
