#pragma once

#include "tmcc/objective.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tmcc {

struct SoftImputeConfig {
    /// Threshold for the feature completion. Negative selects
    /// sigma_max(zero-filled X) / 50.
    double tau = -1.0;
    int max_iters = 1000;
    /// Stop when ||X_new - X_old||_F^2 <= kappa0 * ||X_old||_F^2.
    double kappa0 = 1e-12;

    bool operator==(const SoftImputeConfig&) const = default;
};

struct SolverConfig {
    Hyperparams hp;
    double eta = 1.0;
    int max_iters = 1000;
    double stop_kappa = 1e-7;
    std::uint64_t seed = 0;

    /// If the first 10 iterations all increase the objective, eta is halved
    /// and the run restarted, at most this many times.
    int max_step_halvings = 30;
    /// Consecutive objective increases that count as divergence.
    int divergence_window = 50;

    SoftImputeConfig soft_impute;

    bool operator==(const SolverConfig&) const = default;
};

void check(const SolverConfig& cfg);

enum class FitStatus { Converged, MaxIterations, NonFinite, Diverged };

std::string to_string(FitStatus s);

struct FitResult {
    ConcatMatrix M_out;
    /// Full objective L at M^(1), M^(2), ...: one entry per iterate.
    std::vector<double> objective_trace;
    /// Momentum coefficient theta used to form Q at each iteration.
    std::vector<double> momentum_trace;
    int iterations = 0;
    bool converged = false;
    FitStatus status = FitStatus::MaxIterations;
    std::string diagnostic;
    double wall_time = 0.0;
    int restarts = 0;
    double eta_used = 0.0;
    int step_halvings = 0;
    /// Two-stage method only: (feature completion, joint completion) seconds.
    std::optional<std::pair<double, double>> stage_times;

    bool aborted() const { return status == FitStatus::NonFinite || status == FitStatus::Diverged; }
};

/// Entrywise i.i.d. uniform(-0.01, 0.01) start from the seed.
DenseMatrix initial_iterate(Index rows, Index cols, std::uint64_t seed);

/// Accelerated proximal gradient with adaptive restart on
/// f_tau1(M) + tau2 ||M||_*:
///
///   theta = (c - 1) / (c + 2)
///   Q = (1 + theta) M_k - theta M_{k-1}
///   M_{k+1} = svt(Q - eta grad f(Q), eta tau2)
///   c = 1 if L(M_{k+1}) > L(M_k) else c + 1
///   stop once |L(M_{k+1}) - L(M_k)| <= kappa
///
/// with M_0 = M_1 from initial_iterate(cfg.seed) and c = 1.
FitResult tmcc_fit(const Dataset& ds, const SolverConfig& cfg);

/// tmcc_fit with the calibration term removed (tau1 = 0, A and B ignored).
FitResult mc0_fit(const Dataset& ds, const SolverConfig& cfg);

/// Soft-Impute: X_{t+1} = svt(R o X + (1 - R) o X_t, tau), X_0 = 0.
DenseMatrix soft_impute_fit(const MaskedMatrix& X, double tau, const SolverConfig& cfg);
double default_soft_impute_tau(const MaskedMatrix& X);

struct CmcSiResult {
    DenseMatrix X_hat;
    DenseMatrix Z_hat;
    FitResult target_fit;
    double feature_time = 0.0;
};

/// Separate completions: Soft-Impute on the features, the mc0 proximal solver
/// on the task blocks alone. The two never share information.
CmcSiResult cmc_si_fit(const Dataset& ds, const SolverConfig& cfg);

/// Stage 1 completes the features with Soft-Impute; stage 2 runs mc0_fit with
/// that completion as a fully observed feature block. M_out holds the stage-1
/// features next to the stage-2 targets; the trace is stage 2's.
FitResult two_stage_fit(const Dataset& ds, const SolverConfig& cfg);

}  // namespace tmcc
