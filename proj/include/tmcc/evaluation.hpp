#pragma once

#include "tmcc/solvers.hpp"
#include "tmcc/synth.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tmcc {

enum class Method { TMCC, MC0, CMC_SI, TS };

std::string to_string(Method m);
Method parse_method(const std::string& text);
std::vector<Method> all_methods();

/// ||est - truth||_F / ||truth||_F
double relative_error(const DenseMatrix& est, const DenseMatrix& truth);

/// Solver settings shared by every method of an experiment. With auto_step
/// the step size is step_scale / lipschitz_estimate(dataset, hp), computed
/// for the dataset each solver actually sees.
struct ExperimentConfig {
    SolverConfig solver;
    bool auto_step = true;
    double step_scale = 1.0;
    int workers = 1;
};

/// Solver configuration for one method on one dataset.
SolverConfig configure(const ExperimentConfig& ec, const Dataset& ds, const Hyperparams& hp);

struct MethodOutput {
    DenseMatrix X_hat;
    DenseMatrix Z_hat;
    FitResult fit;
    double wall_time = 0.0;
    std::optional<std::pair<double, double>> stage_times;
};

MethodOutput run_method(Method method, const Dataset& ds, const Hyperparams& hp, const ExperimentConfig& ec);

/// Candidate hyperparameters. Methods other than TMCC only read tau2 and
/// take tau1 = 0.
struct TuningGrid {
    std::vector<double> tau1;
    std::vector<double> tau2;

    std::vector<Hyperparams> candidates(Method method) const;
};

/// Multipliers on the theoretical scalings of the two penalties:
///
///   tau2 = mult * (sqrt(gamma) + log(max(n, D))^{3/2}) / (nD)
///   tau1 = mult / (nD sigma_min(A)^2)
///
/// gamma is the largest observed-entry count of any row of [X, Y] or any
/// column, the empirical counterpart of the sampling bound.
struct GridSpec {
    std::vector<double> tau2_mult = {0.25, 0.337, 0.454, 0.612, 0.825, 1.11, 1.5, 2.0};
    std::vector<double> tau1_mult = {0.0, 0.3, 1.0, 3.0, 10.0};

    bool operator==(const GridSpec&) const = default;
};

/// (sqrt(gamma) + log(max(n, D))^{3/2}) / (nD) for the dataset.
double tau2_scale(const Dataset& ds);
/// 1 / (nD sigma_min(A)^2), or 0 without calibration.
double tau1_scale(const Dataset& ds);

TuningGrid default_grid(const Dataset& ds, const GridSpec& spec);

struct TuneEntry {
    Hyperparams hp;
    double re_z = 0.0;
    FitStatus status = FitStatus::MaxIterations;
};

struct TuneResult {
    Hyperparams best;
    double best_re_z = 0.0;
    std::vector<TuneEntry> entries;
};

/// Grid point with the smallest RE(Z_hat) on the validation scenario; ties
/// within 1e-12 keep the earlier grid point. Aborted fits are skipped and an
/// error is raised only if every point aborts.
TuneResult tune(const Scenario& validation, Method method, const std::vector<Hyperparams>& grid,
                const ExperimentConfig& ec);

struct TrialRecord {
    Method method = Method::TMCC;
    std::string scenario;
    int trial = 0;
    std::uint64_t seed = 0;
    Hyperparams hp;
    double re_x = 0.0;
    double re_z = 0.0;
    double wall_time = 0.0;
    std::optional<std::pair<double, double>> stage_times;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string status;
    std::uint64_t data_hash = 0;
    /// Objective trace of the (final-stage) solver.
    std::vector<double> trace;
};

/// Trial t generates data from seed spec.seed + t; every method runs on that
/// same dataset. Solver exceptions become failed records.
std::vector<TrialRecord> run_experiment(const ScenarioSpec& spec, const std::vector<Method>& methods, int trials,
                                        const std::map<Method, Hyperparams>& tuned, const ExperimentConfig& ec);

/// Seed of the validation scenario used for tuning (a fresh seed, same spec).
std::uint64_t validation_seed(std::uint64_t base_seed);

struct Stat {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error (sample sd / sqrt(count); 0 for one value).
Stat mean_se(const std::vector<double>& values);

struct SummaryRow {
    Method method = Method::TMCC;
    std::string scenario;
    Stat re_x;
    Stat re_z;
    Stat time;
    std::optional<std::pair<Stat, Stat>> stage_time;
    int trials = 0;
    int failed = 0;
};

/// One row per (scenario, method), ordered by scenario then method, so the
/// result does not depend on record order.
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

}  // namespace tmcc
