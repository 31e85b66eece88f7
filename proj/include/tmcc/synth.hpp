#pragma once

#include "tmcc/data_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tmcc {

enum class Transform { Linear, Nonlinear };

std::string to_string(Transform t);
Transform parse_transform(const std::string& text);

/// Synthetic scenario: X_* = P Q^T / ||P Q^T||_inf with uniform(0,1) factors,
/// targets either X_* W^(s) (linear) or a fixed quadratic of X_* entrywise
/// (nonlinear), each normalized to unit max-abs entry. Task s is observed
/// through family s of (Bernoulli, Poisson, Gaussian(1)), cycling when
/// there are more than three tasks.
struct ScenarioSpec {
    Index n = 200;
    Index d = 60;
    Index m = 60;
    Index tasks = 3;
    Index rank = 5;
    Transform transform = Transform::Linear;
    double missing_rate = 0.6;
    double noise_sd = 0.0;
    std::uint64_t seed = 1;

    bool operator==(const ScenarioSpec&) const = default;
    /// Short identifier, e.g. "linear_r5_nu0.6".
    std::string label() const;
};

void check(const ScenarioSpec& spec);

struct GroundTruth {
    DenseMatrix X_star;
    std::vector<DenseMatrix> Z_star;
    ConcatMatrix M_star;
};

struct Scenario {
    GroundTruth truth;
    Dataset ds;
};

/// t^(1)(x) = x^2 + x + 0.5, t^(2)(x) = -x^2 - x, t^(3)(x) = -x^2 - 2x + 0.2.
/// s is 1-based.
double apply_transform(double x, int s);

expfam::Family scenario_family(Index task);

Scenario generate(const ScenarioSpec& spec);

}  // namespace tmcc
