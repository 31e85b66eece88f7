#include "tmcc/solvers.hpp"

#include "tmcc/random.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tmcc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr int kEarlyWindow = 10;

enum class RunEnd { Finished, EarlyIncrease };

struct Attempt {
    RunEnd end = RunEnd::Finished;
    FitResult result;
};

// One pass of the accelerated loop at a fixed step size.
Attempt run_once(const Objective& obj, const SolverConfig& cfg, double eta, bool allow_early_exit) {
    const BlockLayout& layout = obj.layout();
    const Index n = layout.rows;
    const Index D = layout.total_cols();
    const double threshold = eta * obj.hyperparams().tau2;

    Attempt a;
    FitResult& res = a.result;
    res.eta_used = eta;
    res.M_out.layout = layout;

    DenseMatrix prev = initial_iterate(n, D, cfg.seed);
    DenseMatrix cur = prev;
    DenseMatrix Q(n, D), grad(n, D), next;

    auto nuclear_of = [&](const DenseMatrix& M) {
        return threshold > 0.0 || obj.hyperparams().tau2 > 0.0 ? linalg::norm_nuclear(M) : 0.0;
    };

    double L_cur = obj.full_objective(cur, nuclear_of(cur));
    res.objective_trace.push_back(L_cur);
    if (!std::isfinite(L_cur)) {
        res.status = FitStatus::NonFinite;
        res.diagnostic = "objective is not finite at the initial iterate";
        res.M_out.M = cur;
        return a;
    }

    double c = 1.0;
    int consecutive_increases = 0;
    res.status = FitStatus::MaxIterations;

    for (int k = 1; k <= cfg.max_iters; ++k) {
        const double theta = (c - 1.0) / (c + 2.0);
        res.momentum_trace.push_back(theta);
        Q = (1.0 + theta) * cur - theta * prev;

        double L_next = 0.0;
        try {
            obj.gradient(Q, grad);
            Q.noalias() -= eta * grad;
            if (!Q.allFinite()) throw std::overflow_error("gradient step produced a non-finite entry");
            double nuclear = 0.0;
            if (threshold > 0.0) {
                auto prox = linalg::svt_with_norm(Q, threshold);
                next = std::move(prox.value);
                nuclear = prox.nuclear_norm;
            } else {
                next = Q;
                nuclear = nuclear_of(next);
            }
            L_next = obj.full_objective(next, nuclear);
            if (!std::isfinite(L_next)) throw std::overflow_error("objective is not finite");
        } catch (const std::overflow_error& e) {
            res.momentum_trace.pop_back();
            res.status = FitStatus::NonFinite;
            std::ostringstream os;
            os << "iteration " << k << ": " << e.what();
            res.diagnostic = os.str();
            if (allow_early_exit && k <= kEarlyWindow) a.end = RunEnd::EarlyIncrease;
            break;
        }

        res.iterations = k;
        res.objective_trace.push_back(L_next);
        const bool increased = L_next > L_cur;
        if (increased) {
            c = 1.0;
            ++res.restarts;
            ++consecutive_increases;
        } else {
            c += 1.0;
            consecutive_increases = 0;
        }
        const double change = std::fabs(L_next - L_cur);
        prev.swap(cur);
        cur.swap(next);
        L_cur = L_next;

        if (change <= cfg.stop_kappa) {
            res.status = FitStatus::Converged;
            res.converged = true;
            break;
        }
        if (allow_early_exit && k == kEarlyWindow && consecutive_increases == kEarlyWindow) {
            a.end = RunEnd::EarlyIncrease;
            break;
        }
        if (consecutive_increases >= cfg.divergence_window) {
            res.status = FitStatus::Diverged;
            std::ostringstream os;
            os << "objective increased for " << consecutive_increases << " consecutive iterations at eta = "
               << eta << " (iteration " << k << ", L = " << L_cur << ")";
            res.diagnostic = os.str();
            break;
        }
    }
    res.M_out.M = std::move(cur);
    return a;
}

}  // namespace

void check(const SolverConfig& cfg) {
    check(cfg.hp);
    if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw std::invalid_argument("solver: eta must be > 0");
    if (cfg.max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
    if (!(cfg.stop_kappa > 0.0)) throw std::invalid_argument("solver: stop_kappa must be > 0");
    if (cfg.max_step_halvings < 0) throw std::invalid_argument("solver: max_step_halvings must be >= 0");
    if (cfg.divergence_window < 1) throw std::invalid_argument("solver: divergence_window must be >= 1");
}

std::string to_string(FitStatus s) {
    switch (s) {
        case FitStatus::Converged: return "converged";
        case FitStatus::MaxIterations: return "max_iterations";
        case FitStatus::NonFinite: return "non_finite";
        case FitStatus::Diverged: return "diverged";
    }
    return "unknown";
}

DenseMatrix initial_iterate(Index rows, Index cols, std::uint64_t seed) {
    SeedStream rng(seed);
    DenseMatrix M(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) M(i, j) = rng.uniform(-0.01, 0.01);
    }
    return M;
}

FitResult tmcc_fit(const Dataset& ds, const SolverConfig& cfg) {
    check(cfg);
    const auto t0 = Clock::now();
    const Objective obj(ds, cfg.hp);

    double eta = cfg.eta;
    int halvings = 0;
    for (;;) {
        const bool may_halve = halvings < cfg.max_step_halvings;
        Attempt a = run_once(obj, cfg, eta, may_halve);
        if (a.end == RunEnd::EarlyIncrease) {
            eta *= 0.5;
            ++halvings;
            continue;
        }
        a.result.step_halvings = halvings;
        a.result.wall_time = seconds_since(t0);
        return std::move(a.result);
    }
}

FitResult mc0_fit(const Dataset& ds, const SolverConfig& cfg) {
    SolverConfig plain = cfg;
    plain.hp.tau1 = 0.0;
    if (!ds.calibration) return tmcc_fit(ds, plain);
    return tmcc_fit(ds.without_calibration(), plain);
}

double default_soft_impute_tau(const MaskedMatrix& X) {
    if (X.values.size() == 0) return 0.0;
    return linalg::norm_operator(apply_mask(X.mask, X.values)) / 50.0;
}

DenseMatrix soft_impute_fit(const MaskedMatrix& X, double tau, const SolverConfig& cfg) {
    if (!(tau >= 0.0)) throw std::invalid_argument("soft_impute_fit: tau must be >= 0");
    const auto& si = cfg.soft_impute;
    const DenseMatrix observed = apply_mask(X.mask, X.values);
    const DenseMatrix unobserved = DenseMatrix::Ones(X.rows(), X.cols()) - X.mask;

    DenseMatrix cur = DenseMatrix::Zero(X.rows(), X.cols());
    if (X.values.size() == 0) return cur;
    for (int t = 0; t < si.max_iters; ++t) {
        DenseMatrix filled = observed + unobserved.cwiseProduct(cur);
        DenseMatrix next = linalg::svt(filled, tau);
        const double delta2 = (next - cur).squaredNorm();
        const double old2 = cur.squaredNorm();
        cur.swap(next);
        if (delta2 <= si.kappa0 * old2 || delta2 == 0.0) break;
    }
    return cur;
}

CmcSiResult cmc_si_fit(const Dataset& ds, const SolverConfig& cfg) {
    CmcSiResult out;
    const auto t0 = Clock::now();
    const double tau = cfg.soft_impute.tau >= 0.0 ? cfg.soft_impute.tau : default_soft_impute_tau(ds.features);
    out.X_hat = soft_impute_fit(ds.features, tau, cfg);
    out.feature_time = seconds_since(t0);

    out.target_fit = mc0_fit(ds.tasks_only(), cfg);
    out.Z_hat = out.target_fit.M_out.M;
    return out;
}

FitResult two_stage_fit(const Dataset& ds, const SolverConfig& cfg) {
    const auto t0 = Clock::now();
    const double tau = cfg.soft_impute.tau >= 0.0 ? cfg.soft_impute.tau : default_soft_impute_tau(ds.features);
    const DenseMatrix X_filled = soft_impute_fit(ds.features, tau, cfg);
    const double stage1 = seconds_since(t0);

    Dataset completed = ds.without_calibration();
    completed.features = MaskedMatrix::fully_observed(X_filled);
    FitResult res = mc0_fit(completed, cfg);
    const double stage2 = res.wall_time;

    res.M_out.M.leftCols(ds.d()) = X_filled;
    res.stage_times = std::make_pair(stage1, stage2);
    res.wall_time = stage1 + stage2;
    return res;
}

}  // namespace tmcc
