#include "tmcc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tmcc::linalg {

namespace {

std::string dims(const DenseMatrix& S) {
    std::ostringstream os;
    os << S.rows() << "x" << S.cols();
    return os.str();
}

void require_finite(const DenseMatrix& S, const char* op) {
    if (!all_finite(S)) {
        throw std::invalid_argument(std::string(op) + ": non-finite entry in " + dims(S) + " matrix");
    }
}

// BDCSVD falls back to Jacobi for small inputs and is fast for the large ones
// the solvers hit every iteration.
Eigen::BDCSVD<DenseMatrix> decompose(const DenseMatrix& S, bool vectors) {
    const unsigned opts = vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
    Eigen::BDCSVD<DenseMatrix> dec(S, opts);
    if (dec.info() != Eigen::Success) {
        throw std::runtime_error("svd: decomposition did not converge for " + dims(S) + " matrix");
    }
    return dec;
}

}  // namespace

bool all_finite(const DenseMatrix& S) {
    return S.allFinite();
}

SvdFactors svd(const DenseMatrix& S) {
    require_finite(S, "svd");
    SvdFactors out;
    if (S.size() == 0) {
        out.U.resize(S.rows(), 0);
        out.V.resize(S.cols(), 0);
        return out;
    }
    auto dec = decompose(S, true);
    out.U = dec.matrixU();
    out.sigma = dec.singularValues();
    out.V = dec.matrixV();
    for (Index k = 0; k < out.U.cols(); ++k) {
        for (Index i = 0; i < out.U.rows(); ++i) {
            const double u = out.U(i, k);
            if (u == 0.0) continue;
            if (u < 0.0) {
                out.U.col(k) *= -1.0;
                out.V.col(k) *= -1.0;
            }
            break;
        }
    }
    return out;
}

SvtResult svt_with_norm(const DenseMatrix& S, double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw std::invalid_argument("svt: threshold must be finite and nonnegative");
    }
    require_finite(S, "svt");
    SvtResult out;
    out.value = DenseMatrix::Zero(S.rows(), S.cols());
    if (S.size() == 0) return out;

    if (c == 0.0) {
        // prox of the zero function is the identity; skip the rounding of U S V^T
        const auto sv = decompose(S, false).singularValues();
        out.value = S;
        out.nuclear_norm = sv.sum();
        out.rank = sv.size() > 0 && sv(0) > 0.0 ? static_cast<Index>((sv.array() > 1e-10 * sv(0)).count()) : 0;
        return out;
    }
    auto dec = decompose(S, true);
    const DenseVector& sigma = dec.singularValues();
    Index keep = 0;
    while (keep < sigma.size() && sigma(keep) > c) ++keep;
    if (keep == 0) return out;

    const DenseVector shrunk = (sigma.head(keep).array() - c).matrix();
    out.value.noalias() = dec.matrixU().leftCols(keep) * shrunk.asDiagonal() *
                          dec.matrixV().leftCols(keep).transpose();
    out.nuclear_norm = shrunk.sum();
    out.rank = keep;
    return out;
}

DenseMatrix svt(const DenseMatrix& S, double c) {
    if (c == 0.0) {
        require_finite(S, "svt");
        return S;
    }
    return svt_with_norm(S, c).value;
}

double norm_frobenius(const DenseMatrix& S) {
    return S.norm();
}

double norm_operator(const DenseMatrix& S) {
    require_finite(S, "norm_operator");
    if (S.size() == 0) return 0.0;
    return decompose(S, false).singularValues()(0);
}

double norm_nuclear(const DenseMatrix& S) {
    require_finite(S, "norm_nuclear");
    if (S.size() == 0) return 0.0;
    return decompose(S, false).singularValues().sum();
}

double norm_inf(const DenseMatrix& S) {
    if (S.size() == 0) return 0.0;
    return S.cwiseAbs().maxCoeff();
}

double sigma_min(const DenseMatrix& S) {
    require_finite(S, "sigma_min");
    if (S.size() == 0) return 0.0;
    const auto sv = decompose(S, false).singularValues();
    return sv(sv.size() - 1);
}

Index numerical_rank(const DenseMatrix& S, double rel_tol) {
    require_finite(S, "numerical_rank");
    if (S.size() == 0) return 0;
    const auto sv = decompose(S, false).singularValues();
    if (sv(0) == 0.0) return 0;
    const double cut = rel_tol * sv(0);
    return static_cast<Index>((sv.array() > cut).count());
}

ProjectionPair project_pair(const DenseMatrix& S, const DenseMatrix& T) {
    if (S.rows() != T.rows() || S.cols() != T.cols()) {
        throw std::invalid_argument("project_pair: shape mismatch " + dims(S) + " vs " + dims(T));
    }
    ProjectionPair out;
    const auto f = svd(S);
    Index r = 0;
    if (f.sigma.size() > 0 && f.sigma(0) > 0.0) {
        r = static_cast<Index>((f.sigma.array() > 1e-10 * f.sigma(0)).count());
    }
    const DenseMatrix Ur = f.U.leftCols(r);
    const DenseMatrix Vr = f.V.leftCols(r);
    // (I - UU^T) T (I - VV^T) without forming the n x n / m x m projectors.
    DenseMatrix left = T - Ur * (Ur.transpose() * T);
    out.off_support = left - (left * Vr) * Vr.transpose();
    out.on_support = T - out.off_support;
    return out;
}

}  // namespace tmcc::linalg
