#include "tmcc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tmcc {

void check(const Hyperparams& hp) {
    if (!std::isfinite(hp.tau1) || !std::isfinite(hp.tau2) || hp.tau1 < 0.0 || hp.tau2 < 0.0) {
        throw std::invalid_argument("hyperparameters tau1, tau2 must be finite and >= 0");
    }
}

Objective::Objective(const Dataset& ds, Hyperparams hp)
    : ds_(ds), hp_(hp), layout_(ds.layout()) {
    check(hp_);
    const Index nd = ds.n() * ds.total_cols();
    scale_ = nd > 0 ? 1.0 / static_cast<double>(nd) : 0.0;
    calibrated_ = ds.calibration.has_value();
    if (calibrated_) {
        At_ = ds.calibration->A.transpose();
    }
}

void Objective::check_shape(const DenseMatrix& M) const {
    if (M.rows() != layout_.rows || M.cols() != layout_.total_cols()) {
        throw std::invalid_argument("objective: iterate shape does not match the dataset layout");
    }
}

double Objective::smooth_loss(const DenseMatrix& M) const {
    check_shape(M);
    const Index n = layout_.rows;
    const Index d = layout_.feature_cols;

    double feature_sum = 0.0;
    const auto& X = ds_.features;
    for (Index j = 0; j < d; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (X.mask(i, j) != 0.0) {
                const double r = M(i, j) - X.values(i, j);
                feature_sum += r * r;
            }
        }
    }

    double likelihood = 0.0;
    for (std::size_t s = 0; s < ds_.tasks.size(); ++s) {
        const auto& task = ds_.tasks[s];
        const Index off = layout_.task_offsets[s];
        for (Index j = 0; j < task.data.cols(); ++j) {
            for (Index i = 0; i < n; ++i) {
                if (task.data.mask(i, j) != 0.0) {
                    likelihood += expfam::nll_term_unchecked(task.family, task.data.values(i, j), M(i, off + j));
                }
            }
        }
    }

    double value = scale_ * (likelihood + 0.5 * feature_sum);
    if (calibrated_ && hp_.tau1 != 0.0) {
        const auto& c = *ds_.calibration;
        value += hp_.tau1 * (c.A * M.leftCols(d) - c.B).squaredNorm();
    }
    return value;
}

double Objective::full_objective(const DenseMatrix& M, double nuclear_norm) const {
    return smooth_loss(M) + hp_.tau2 * nuclear_norm;
}

double Objective::full_objective(const DenseMatrix& M) const {
    return full_objective(M, hp_.tau2 != 0.0 ? linalg::norm_nuclear(M) : 0.0);
}

DenseMatrix Objective::gradient(const DenseMatrix& M) const {
    DenseMatrix out;
    gradient(M, out);
    return out;
}

void Objective::gradient(const DenseMatrix& M, DenseMatrix& out) const {
    check_shape(M);
    const Index n = layout_.rows;
    const Index d = layout_.feature_cols;
    out.setZero(M.rows(), M.cols());

    const auto& X = ds_.features;
    for (Index j = 0; j < d; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (X.mask(i, j) != 0.0) out(i, j) = scale_ * (M(i, j) - X.values(i, j));
        }
    }
    if (calibrated_ && hp_.tau1 != 0.0) {
        const auto& c = *ds_.calibration;
        // A^T (A X - B) == A^T A X - A^T B, without the n x n product.
        out.leftCols(d).noalias() += (2.0 * hp_.tau1) * (At_ * (c.A * M.leftCols(d) - c.B));
    }

    for (std::size_t s = 0; s < ds_.tasks.size(); ++s) {
        const auto& task = ds_.tasks[s];
        const Index off = layout_.task_offsets[s];
        for (Index j = 0; j < task.data.cols(); ++j) {
            for (Index i = 0; i < n; ++i) {
                if (task.data.mask(i, j) != 0.0) {
                    out(i, off + j) =
                        scale_ * (expfam::g_prime(task.family, M(i, off + j)) - task.data.values(i, j));
                }
            }
        }
    }
}

double smooth_loss(const Dataset& ds, const DenseMatrix& M, const Hyperparams& hp) {
    return Objective(ds, hp).smooth_loss(M);
}

double full_objective(const Dataset& ds, const DenseMatrix& M, const Hyperparams& hp) {
    return Objective(ds, hp).full_objective(M);
}

DenseMatrix gradient(const Dataset& ds, const DenseMatrix& M, const Hyperparams& hp) {
    return Objective(ds, hp).gradient(M);
}

double lipschitz_estimate(const Dataset& ds, const Hyperparams& hp, double alpha) {
    const Index nd = ds.n() * ds.total_cols();
    if (nd == 0) return 0.0;
    double curvature = ds.d() > 0 ? 1.0 : 0.0;
    for (const auto& t : ds.tasks) {
        switch (t.family.kind) {
            case expfam::Kind::Bernoulli: curvature = std::max(curvature, 0.25); break;
            case expfam::Kind::Poisson: curvature = std::max(curvature, std::exp(alpha)); break;
            case expfam::Kind::Gaussian: curvature = std::max(curvature, t.family.sigma2); break;
        }
    }
    double lip = curvature / static_cast<double>(nd);
    if (ds.calibration && hp.tau1 > 0.0) {
        const double smax = linalg::norm_operator(ds.calibration->A);
        lip += 2.0 * hp.tau1 * smax * smax;
    }
    return lip;
}

}  // namespace tmcc
