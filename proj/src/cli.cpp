#include "tmcc/cli.hpp"

#include "tmcc/config.hpp"
#include "tmcc/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace tmcc::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> methods;
    std::optional<int> trials;
    std::optional<double> noise_sd;
    std::string data;
};

// Methods that operate on the truth-free dataset use these multipliers when
// the config does not fix tau1 and tau2.
constexpr double kFitTau2Mult = 0.612;
constexpr double kFitTau1Mult = 1.0;

std::vector<Method> parse_methods(const std::string& text) {
    std::vector<Method> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_method(item));
    }
    if (out.empty()) throw ConfigError("--methods: empty list");
    return out;
}

RunConfig resolve(const Overrides& o, bool seed_is_solver) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed) {
        if (seed_is_solver) cfg.solver.seed = *o.seed;
        else cfg.scenario.seed = *o.seed;
    }
    if (o.workers) cfg.workers = *o.workers;
    if (o.trials) cfg.trials = *o.trials;
    if (o.noise_sd) cfg.scenario.noise_sd = *o.noise_sd;
    if (o.methods) {
        try {
            cfg.methods = parse_methods(*o.methods);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("--methods: ") + e.what());
        }
    }
    try {
        check(cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

std::vector<Index> blocks_of(const BlockLayout& lay) {
    std::vector<Index> b{lay.feature_cols};
    b.insert(b.end(), lay.task_widths.begin(), lay.task_widths.end());
    return b;
}

int cmd_generate(const Overrides& o) {
    const RunConfig cfg = resolve(o, false);
    const Scenario sc = generate(cfg.scenario);
    const fs::path dir = cfg.output_dir;
    io::write_matrix(dir / "X_star.csv", sc.truth.X_star);
    for (std::size_t s = 0; s < sc.truth.Z_star.size(); ++s) {
        io::write_matrix(dir / ("Z_star_" + std::to_string(s + 1) + ".csv"), sc.truth.Z_star[s]);
    }
    io::write_dataset(dir / "dataset.csv", sc.ds);
    std::cerr << "wrote " << sc.truth.Z_star.size() + 2 << " files to " << dir.string() << "\n";
    return kOk;
}

Hyperparams fit_hyperparams(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.fixed) return *cfg.fixed;
    return {kFitTau1Mult * tau1_scale(ds), kFitTau2Mult * tau2_scale(ds)};
}

int cmd_fit(const Overrides& o) {
    const RunConfig cfg = resolve(o, true);
    if (o.data.empty()) throw ConfigError("fit: --data is required");
    const Dataset ds = io::read_dataset(o.data);
    const auto violations = validate(ds);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << "invalid dataset: " << v.to_string() << "\n";
        return kValidationError;
    }

    const fs::path dir = cfg.output_dir;
    const ExperimentConfig ec = cfg.experiment();
    const Hyperparams hp = fit_hyperparams(cfg, ds);
    const std::uint64_t hash = dataset_hash(ds);
    std::vector<TrialRecord> records;
    bool aborted = false;
    for (Method m : cfg.methods) {
        if (m == Method::TMCC && !ds.calibration) {
            std::cerr << "note: dataset has no calibration; TMCC reduces to MC0\n";
        }
        const Hyperparams used = m == Method::TMCC ? hp : Hyperparams{0.0, hp.tau2};
        const MethodOutput out = run_method(m, ds, used, ec);
        TrialRecord r;
        r.method = m;
        r.scenario = "data";
        r.seed = cfg.solver.seed;
        r.hp = used;
        r.re_x = std::numeric_limits<double>::quiet_NaN();
        r.re_z = std::numeric_limits<double>::quiet_NaN();
        r.wall_time = out.wall_time;
        r.stage_times = out.stage_times;
        r.iterations = out.fit.iterations;
        r.converged = out.fit.converged;
        r.status = to_string(out.fit.status);
        r.failed = out.fit.aborted();
        r.data_hash = hash;
        records.push_back(r);

        io::write_trace(dir / ("trace_" + to_string(m) + "_0.csv"), out.fit.objective_trace, out.fit.momentum_trace);
        std::vector<DenseMatrix> zs;
        const BlockLayout lay = ds.layout();
        for (Index s = 0; s < lay.task_count(); ++s) {
            zs.push_back(out.Z_hat.middleCols(lay.task_offsets[static_cast<std::size_t>(s)] - lay.feature_cols,
                                              lay.task_widths[static_cast<std::size_t>(s)]));
        }
        const ConcatMatrix M_hat = concatenate(out.X_hat, zs);
        io::write_matrix(dir / ("M_hat_" + to_string(m) + ".csv"), M_hat.M, blocks_of(lay));
        std::cerr << to_string(m) << ": " << r.status << " after " << r.iterations << " iterations";
        if (!out.fit.diagnostic.empty()) std::cerr << " (" << out.fit.diagnostic << ")";
        std::cerr << "\n";
        aborted = aborted || r.failed;
    }
    io::write_records(dir / "records.csv", records);
    io::write_timings(dir / "timings.csv", records);
    return aborted ? kSolverAbort : kOk;
}

int cmd_bench(const Overrides& o) {
    const RunConfig cfg = resolve(o, false);
    const fs::path dir = cfg.output_dir;
    const ExperimentConfig ec = cfg.experiment();

    std::map<Method, Hyperparams> tuned;
    if (cfg.fixed) {
        for (Method m : cfg.methods) tuned[m] = m == Method::TMCC ? *cfg.fixed : Hyperparams{0.0, cfg.fixed->tau2};
    } else {
        ScenarioSpec vspec = cfg.scenario;
        vspec.seed = validation_seed(cfg.scenario.seed);
        const Scenario validation = generate(vspec);
        const TuningGrid grid = default_grid(validation.ds, cfg.grid);
        fs::create_directories(dir);
        std::ofstream tune_out(dir / "tuning.csv", std::ios::binary);
        tune_out << "method,tau1,tau2,re_z,status,selected\n";
        for (Method m : cfg.methods) {
            const TuneResult res = tune(validation, m, grid.candidates(m), ec);
            tuned[m] = res.best;
            for (const auto& e : res.entries) {
                tune_out << to_string(m) << ',' << io::format_double(e.hp.tau1) << ',' << io::format_double(e.hp.tau2)
                         << ',' << io::format_double(e.re_z) << ',' << to_string(e.status) << ','
                         << (e.hp == res.best ? 1 : 0) << '\n';
            }
            std::cerr << "tuned " << to_string(m) << ": tau1=" << res.best.tau1 << " tau2=" << res.best.tau2
                      << " validation RE(Z)=" << res.best_re_z << "\n";
        }
    }

    const auto records = run_experiment(cfg.scenario, cfg.methods, cfg.trials, tuned, ec);
    const auto summary = summarize(records);
    io::write_records(dir / "records.csv", records);
    io::write_timings(dir / "timings.csv", records);
    io::write_summary(dir / "summary.csv", summary);
    for (const auto& r : records) {
        io::write_trace(dir / ("trace_" + to_string(r.method) + "_" + std::to_string(r.trial) + ".csv"), r.trace);
    }
    save_config(dir / "config.ini", cfg);

    bool failed = false;
    for (const auto& row : summary) {
        std::cerr << row.scenario << " " << to_string(row.method) << ": RE(X)=" << row.re_x.mean << " (" << row.re_x.se
                  << ") RE(Z)=" << row.re_z.mean << " (" << row.re_z.se << ") failed=" << row.failed << "\n";
        failed = failed || row.failed > 0;
    }
    return failed ? kSolverAbort : kOk;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "config file (INI)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--workers", o.workers, "parallel workers")->check(CLI::PositiveNumber);
    cmd->add_option("--methods", o.methods, "comma-separated methods (TMCC,MC0,CMC_SI,TS)");
    cmd->add_option("--trials", o.trials, "trial count")->check(CLI::PositiveNumber);
    cmd->add_option("--noise-sd", o.noise_sd, "feature noise standard deviation")->check(CLI::NonNegativeNumber);
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Transductive matrix completion with calibration"};
    app.require_subcommand(1);
    Overrides o;
    auto* gen = app.add_subcommand("generate", "write a synthetic scenario (truth and masked dataset)");
    auto* fit = app.add_subcommand("fit", "fit methods to a dataset file");
    auto* bench = app.add_subcommand("bench", "tune, run trials and summarize");
    add_common(gen, o);
    add_common(fit, o);
    add_common(bench, o);
    fit->add_option("--data", o.data, "dataset bundle")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (gen->parsed()) return cmd_generate(o);
        if (fit->parsed()) return cmd_fit(o);
        return cmd_bench(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const io::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace tmcc::cli
