#pragma once

#include "tmcc/evaluation.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmcc {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything one CLI invocation needs. Serialized as an INI-style file:
///
///   [scenario]     n d m tasks rank transform missing_rate noise_sd seed
///   [run]          methods trials workers output_dir
///   [solver]       eta max_iters stop_kappa seed max_step_halvings
///                  divergence_window auto_step step_scale
///   [soft_impute]  tau max_iters kappa0
///   [tuning]       tau2_mult tau1_mult, or tau1 and tau2 for fixed values
///
/// Unknown sections or keys are errors. Lists are comma separated.
struct RunConfig {
    ScenarioSpec scenario;
    std::vector<Method> methods = all_methods();
    int trials = 10;
    int workers = 1;
    std::string output_dir = "out";

    SolverConfig solver;
    bool auto_step = true;
    double step_scale = 1.0;

    GridSpec grid;
    /// Fixed hyperparameters skip tuning.
    std::optional<Hyperparams> fixed;

    bool operator==(const RunConfig&) const = default;

    ExperimentConfig experiment() const;
};

void check(const RunConfig& cfg);

std::string serialize(const RunConfig& cfg);
/// origin names the source in error messages.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace tmcc
