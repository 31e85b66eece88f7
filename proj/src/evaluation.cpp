#include "tmcc/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace tmcc {

namespace {

// Runs job(i) for i in [0, count) on up to `workers` threads. Results are
// written by index, so the merge order never depends on scheduling.
void parallel_for(int count, int workers, const std::function<void(int)>& job) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::TMCC: return "TMCC";
        case Method::MC0: return "MC0";
        case Method::CMC_SI: return "CMC_SI";
        case Method::TS: return "TS";
    }
    return "unknown";
}

Method parse_method(const std::string& text) {
    for (Method m : all_methods()) {
        if (text == to_string(m)) return m;
    }
    if (text == "MC_0") return Method::MC0;
    throw std::invalid_argument("unknown method '" + text + "' (expected TMCC, MC0, CMC_SI or TS)");
}

std::vector<Method> all_methods() {
    return {Method::TMCC, Method::MC0, Method::CMC_SI, Method::TS};
}

double relative_error(const DenseMatrix& est, const DenseMatrix& truth) {
    if (est.rows() != truth.rows() || est.cols() != truth.cols()) {
        throw std::invalid_argument("relative_error: shape mismatch");
    }
    const double denom = truth.norm();
    if (!(denom > 0.0)) throw std::invalid_argument("relative_error: truth has zero Frobenius norm");
    return (est - truth).norm() / denom;
}

SolverConfig configure(const ExperimentConfig& ec, const Dataset& ds, const Hyperparams& hp) {
    SolverConfig cfg = ec.solver;
    cfg.hp = hp;
    if (ec.auto_step) {
        const double lip = lipschitz_estimate(ds, hp);
        if (lip > 0.0) cfg.eta = ec.step_scale / lip;
    }
    return cfg;
}

MethodOutput run_method(Method method, const Dataset& ds, const Hyperparams& hp, const ExperimentConfig& ec) {
    MethodOutput out;
    switch (method) {
        case Method::TMCC: {
            out.fit = tmcc_fit(ds, configure(ec, ds, hp));
            break;
        }
        case Method::MC0: {
            const Dataset plain = ds.without_calibration();
            out.fit = mc0_fit(plain, configure(ec, plain, {0.0, hp.tau2}));
            break;
        }
        case Method::CMC_SI: {
            const Dataset targets = ds.tasks_only();
            auto r = cmc_si_fit(ds, configure(ec, targets, {0.0, hp.tau2}));
            out.X_hat = std::move(r.X_hat);
            out.Z_hat = std::move(r.Z_hat);
            out.fit = std::move(r.target_fit);
            out.stage_times = std::make_pair(r.feature_time, out.fit.wall_time);
            out.wall_time = r.feature_time + out.fit.wall_time;
            return out;
        }
        case Method::TS: {
            // stage 2 sees a fully observed feature block; size the step for it
            Dataset completed = ds.without_calibration();
            completed.features.mask.setOnes();
            out.fit = two_stage_fit(ds, configure(ec, completed, {0.0, hp.tau2}));
            out.stage_times = out.fit.stage_times;
            break;
        }
    }
    out.X_hat = out.fit.M_out.slice_feature();
    out.Z_hat = out.fit.M_out.slice_targets();
    out.wall_time = out.fit.wall_time;
    return out;
}

std::vector<Hyperparams> TuningGrid::candidates(Method method) const {
    std::vector<Hyperparams> out;
    if (method == Method::TMCC) {
        for (double t1 : tau1) {
            for (double t2 : tau2) out.push_back({t1, t2});
        }
    } else {
        for (double t2 : tau2) out.push_back({0.0, t2});
    }
    return out;
}

double tau2_scale(const Dataset& ds) {
    const Index n = ds.n();
    const Index D = ds.total_cols();
    if (n == 0 || D == 0) return 0.0;
    DenseVector row_counts = ds.features.mask.rowwise().sum();
    double col_max = ds.d() > 0 ? ds.features.mask.colwise().sum().maxCoeff() : 0.0;
    for (const auto& t : ds.tasks) {
        if (t.data.cols() == 0) continue;
        row_counts += t.data.mask.rowwise().sum();
        col_max = std::max(col_max, t.data.mask.colwise().sum().maxCoeff());
    }
    const double gamma = std::max(row_counts.size() > 0 ? row_counts.maxCoeff() : 0.0, col_max);
    const double lg = std::log(static_cast<double>(std::max(n, D)));
    return (std::sqrt(gamma) + std::pow(lg, 1.5)) / static_cast<double>(n * D);
}

double tau1_scale(const Dataset& ds) {
    if (!ds.calibration) return 0.0;
    const double smin = linalg::sigma_min(ds.calibration->A);
    if (!(smin > 0.0)) return 0.0;
    return 1.0 / (static_cast<double>(ds.n() * ds.total_cols()) * smin * smin);
}

TuningGrid default_grid(const Dataset& ds, const GridSpec& spec) {
    TuningGrid grid;
    const double s2 = tau2_scale(ds);
    const double s1 = tau1_scale(ds);
    for (double m : spec.tau2_mult) grid.tau2.push_back(m * s2);
    for (double m : spec.tau1_mult) grid.tau1.push_back(m * s1);
    return grid;
}

TuneResult tune(const Scenario& validation, Method method, const std::vector<Hyperparams>& grid,
                const ExperimentConfig& ec) {
    if (grid.empty()) throw std::invalid_argument("tune: empty grid");
    TuneResult res;
    res.entries.resize(grid.size());
    const DenseMatrix Z_star = validation.truth.M_star.slice_targets();

    parallel_for(static_cast<int>(grid.size()), ec.workers, [&](int i) {
        auto& e = res.entries[static_cast<std::size_t>(i)];
        e.hp = grid[static_cast<std::size_t>(i)];
        try {
            const auto out = run_method(method, validation.ds, e.hp, ec);
            e.status = out.fit.status;
            e.re_z = out.fit.aborted() ? INFINITY : relative_error(out.Z_hat, Z_star);
        } catch (const std::exception&) {
            e.status = FitStatus::NonFinite;
            e.re_z = INFINITY;
        }
    });

    bool found = false;
    std::ostringstream failures;
    for (const auto& e : res.entries) {
        if (!std::isfinite(e.re_z)) {
            failures << " (tau1=" << e.hp.tau1 << ", tau2=" << e.hp.tau2 << "): " << to_string(e.status) << ";";
            continue;
        }
        if (!found || e.re_z < res.best_re_z - 1e-12) {
            res.best = e.hp;
            res.best_re_z = e.re_z;
            found = true;
        }
    }
    if (!found) {
        throw std::runtime_error("tune: every grid point failed for " + to_string(method) + ":" + failures.str());
    }
    return res;
}

std::uint64_t validation_seed(std::uint64_t base_seed) {
    return base_seed + 1000003ULL;
}

std::vector<TrialRecord> run_experiment(const ScenarioSpec& spec, const std::vector<Method>& methods, int trials,
                                        const std::map<Method, Hyperparams>& tuned, const ExperimentConfig& ec) {
    for (Method m : methods) {
        if (!tuned.count(m)) throw std::invalid_argument("run_experiment: no hyperparameters for " + to_string(m));
    }
    if (trials < 0) throw std::invalid_argument("run_experiment: negative trial count");

    const std::size_t per_trial = methods.size();
    std::vector<TrialRecord> records(static_cast<std::size_t>(trials) * per_trial);
    ExperimentConfig inner = ec;
    inner.workers = 1;

    parallel_for(trials, ec.workers, [&](int t) {
        ScenarioSpec s = spec;
        s.seed = spec.seed + static_cast<std::uint64_t>(t);
        const Scenario sc = generate(s);
        const std::uint64_t hash = dataset_hash(sc.ds);
        const DenseMatrix Z_star = sc.truth.M_star.slice_targets();
        for (std::size_t k = 0; k < per_trial; ++k) {
            TrialRecord& r = records[static_cast<std::size_t>(t) * per_trial + k];
            r.method = methods[k];
            r.scenario = spec.label();
            r.trial = t;
            r.seed = s.seed;
            r.hp = tuned.at(methods[k]);
            r.data_hash = hash;
            try {
                const auto out = run_method(methods[k], sc.ds, r.hp, inner);
                r.re_x = relative_error(out.X_hat, sc.truth.X_star);
                r.re_z = relative_error(out.Z_hat, Z_star);
                r.wall_time = out.wall_time;
                r.stage_times = out.stage_times;
                r.iterations = out.fit.iterations;
                r.converged = out.fit.converged;
                r.status = to_string(out.fit.status);
                r.failed = out.fit.aborted() || !std::isfinite(r.re_x) || !std::isfinite(r.re_z);
                r.trace = out.fit.objective_trace;
            } catch (const std::exception& e) {
                r.failed = true;
                r.status = std::string("error: ") + e.what();
            }
        }
    });
    return records;
}

Stat mean_se(const std::vector<double>& values) {
    Stat s;
    if (values.empty()) return s;
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    const double count = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / count;
    if (v.size() < 2) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
    return s;
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
    std::map<std::pair<std::string, int>, std::vector<const TrialRecord*>> groups;
    for (const auto& r : records) groups[{r.scenario, static_cast<int>(r.method)}].push_back(&r);

    std::vector<SummaryRow> rows;
    for (const auto& [key, group] : groups) {
        SummaryRow row;
        row.scenario = key.first;
        row.method = static_cast<Method>(key.second);
        std::vector<double> rx, rz, tm, s1, s2;
        bool staged = false;
        for (const TrialRecord* r : group) {
            if (r->failed) {
                ++row.failed;
                continue;
            }
            rx.push_back(r->re_x);
            rz.push_back(r->re_z);
            tm.push_back(r->wall_time);
            if (r->stage_times) {
                staged = true;
                s1.push_back(r->stage_times->first);
                s2.push_back(r->stage_times->second);
            }
        }
        row.trials = static_cast<int>(rx.size());
        row.re_x = mean_se(rx);
        row.re_z = mean_se(rz);
        row.time = mean_se(tm);
        if (staged) row.stage_time = std::make_pair(mean_se(s1), mean_se(s2));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tmcc
