#pragma once

#include "tmcc/data_model.hpp"

namespace tmcc {

/// tau1 weights the calibration penalty, tau2 the nuclear norm.
struct Hyperparams {
    double tau1 = 0.0;
    double tau2 = 0.0;

    bool operator==(const Hyperparams&) const = default;
};

void check(const Hyperparams& hp);

/// Penalized objective for one dataset
///
///   f(M) = (1/(nD)) [ sum_s sum_ij r_ij (-y_ij z_ij + g_s(z_ij))
///                     + 1/2 || R_x o (X - X_obs) ||_F^2 ]
///          + tau1 || A X - B ||_F^2
///   L(M) = f(M) + tau2 ||M||_*
///
/// where M = [X, Z^(1), ..., Z^(S)]. The calibration term is present only
/// when the dataset carries a calibration constraint.
class Objective {
public:
    Objective(const Dataset& ds, Hyperparams hp);

    const Hyperparams& hyperparams() const { return hp_; }
    const BlockLayout& layout() const { return layout_; }

    double smooth_loss(const DenseMatrix& M) const;
    /// smooth_loss + tau2 * nuclear_norm, for callers that already know the
    /// nuclear norm of M (the prox step does).
    double full_objective(const DenseMatrix& M, double nuclear_norm) const;
    double full_objective(const DenseMatrix& M) const;
    DenseMatrix gradient(const DenseMatrix& M) const;
    void gradient(const DenseMatrix& M, DenseMatrix& out) const;

private:
    void check_shape(const DenseMatrix& M) const;

    const Dataset& ds_;
    Hyperparams hp_;
    BlockLayout layout_;
    double scale_ = 0.0;
    bool calibrated_ = false;
    DenseMatrix At_;
};

double smooth_loss(const Dataset& ds, const DenseMatrix& M, const Hyperparams& hp);
double full_objective(const Dataset& ds, const DenseMatrix& M, const Hyperparams& hp);
DenseMatrix gradient(const Dataset& ds, const DenseMatrix& M, const Hyperparams& hp);

/// Upper estimate of the Lipschitz constant of grad f when every natural
/// parameter stays in [-alpha, alpha]:
///   max_s sup g_s'' / (nD) + 2 tau1 sigma_max(A)^2
/// where the feature block counts as curvature 1. Poisson blocks use e^alpha.
double lipschitz_estimate(const Dataset& ds, const Hyperparams& hp, double alpha = 1.0);

}  // namespace tmcc
