#include "tmcc/synth.hpp"

#include "tmcc/random.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tmcc {

namespace {

// Salts for the independent sub-streams of one scenario seed.
enum Stream : std::uint64_t {
    kFactors = 1,
    kCoefficients = 2,
    kFeatureMask = 3,
    kFeatureNoise = 4,
    kTaskMask = 100,
    kTaskSample = 200,
};

DenseMatrix uniform_matrix(Index rows, Index cols, SeedStream& rng) {
    DenseMatrix out(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) out(i, j) = rng.uniform_open();
    }
    return out;
}

DenseMatrix normalized(const DenseMatrix& M) {
    const double scale = linalg::norm_inf(M);
    if (scale == 0.0) return M;
    return M / scale;
}

DenseMatrix draw_mask(Index rows, Index cols, double missing_rate, SeedStream& rng) {
    DenseMatrix mask(rows, cols);
    const double keep = 1.0 - missing_rate;
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < keep ? 1.0 : 0.0;
    }
    return mask;
}

}  // namespace

std::string to_string(Transform t) {
    return t == Transform::Linear ? "linear" : "nonlinear";
}

Transform parse_transform(const std::string& text) {
    if (text == "linear") return Transform::Linear;
    if (text == "nonlinear") return Transform::Nonlinear;
    throw std::invalid_argument("unknown transform '" + text + "'");
}

std::string ScenarioSpec::label() const {
    std::ostringstream os;
    os << to_string(transform) << "_r" << rank << "_nu" << missing_rate;
    return os.str();
}

void check(const ScenarioSpec& spec) {
    if (spec.n < 1 || spec.d < 1 || spec.m < 1 || spec.tasks < 0) {
        throw std::invalid_argument("scenario: n, d, m must be >= 1 and tasks >= 0");
    }
    if (spec.rank < 1 || spec.rank > std::min(spec.n, spec.d)) {
        throw std::invalid_argument("scenario: rank must lie in [1, min(n, d)]");
    }
    if (!(spec.missing_rate >= 0.0 && spec.missing_rate < 1.0)) {
        throw std::invalid_argument("scenario: missing rate must lie in [0, 1)");
    }
    if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) {
        throw std::invalid_argument("scenario: noise_sd must be finite and >= 0");
    }
    if (spec.transform == Transform::Nonlinear && spec.tasks != 3) {
        throw std::invalid_argument("scenario: the nonlinear transform defines exactly 3 tasks");
    }
    if (spec.transform == Transform::Nonlinear && spec.m != spec.d) {
        throw std::invalid_argument("scenario: the nonlinear transform is entrywise, so m must equal d");
    }
}

double apply_transform(double x, int s) {
    switch (s) {
        case 1: return x * x + x + 0.5;
        case 2: return -x * x - x;
        case 3: return -x * x - 2.0 * x + 0.2;
        default: throw std::out_of_range("apply_transform: task index must be 1, 2 or 3");
    }
}

expfam::Family scenario_family(Index task) {
    switch (task % 3) {
        case 0: return expfam::Family::bernoulli();
        case 1: return expfam::Family::poisson();
        default: return expfam::Family::gaussian(1.0);
    }
}

Scenario generate(const ScenarioSpec& spec) {
    check(spec);
    Scenario out;
    GroundTruth& truth = out.truth;

    SeedStream factors(mix_seed(spec.seed, kFactors));
    const DenseMatrix P = uniform_matrix(spec.n, spec.rank, factors);
    const DenseMatrix Q = uniform_matrix(spec.d, spec.rank, factors);
    truth.X_star = normalized(P * Q.transpose());

    SeedStream coeffs(mix_seed(spec.seed, kCoefficients));
    for (Index s = 0; s < spec.tasks; ++s) {
        DenseMatrix raw;
        if (spec.transform == Transform::Linear) {
            const DenseMatrix W = uniform_matrix(spec.d, spec.m, coeffs);
            raw = truth.X_star * W;
        } else {
            // elementwise on X_*, so the target has d columns per task
            raw = truth.X_star.unaryExpr([s](double x) { return apply_transform(x, static_cast<int>(s) + 1); });
        }
        truth.Z_star.push_back(normalized(raw));
    }
    truth.M_star = concatenate(truth.X_star, truth.Z_star);

    Dataset& ds = out.ds;
    SeedStream fmask(mix_seed(spec.seed, kFeatureMask));
    SeedStream fnoise(mix_seed(spec.seed, kFeatureNoise));
    const DenseMatrix xmask = draw_mask(spec.n, spec.d, spec.missing_rate, fmask);
    DenseMatrix xobs = DenseMatrix::Zero(spec.n, spec.d);
    for (Index j = 0; j < spec.d; ++j) {
        for (Index i = 0; i < spec.n; ++i) {
            if (xmask(i, j) == 0.0) continue;
            double v = truth.X_star(i, j);
            if (spec.noise_sd > 0.0) v += spec.noise_sd * fnoise.normal();
            xobs(i, j) = v;
        }
    }
    ds.features = MaskedMatrix(xobs, xmask);

    for (Index s = 0; s < spec.tasks; ++s) {
        const auto fam = scenario_family(s);
        const DenseMatrix& Z = truth.Z_star[static_cast<std::size_t>(s)];
        SeedStream tmask(mix_seed(spec.seed, kTaskMask + static_cast<std::uint64_t>(s)));
        SeedStream tsample(mix_seed(spec.seed, kTaskSample + static_cast<std::uint64_t>(s)));
        const DenseMatrix mask = draw_mask(Z.rows(), Z.cols(), spec.missing_rate, tmask);
        DenseMatrix y = DenseMatrix::Zero(Z.rows(), Z.cols());
        for (Index j = 0; j < Z.cols(); ++j) {
            for (Index i = 0; i < Z.rows(); ++i) {
                // draw for every entry so the samples do not depend on the mask
                const double v = expfam::sample(fam, Z(i, j), tsample);
                if (mask(i, j) != 0.0) y(i, j) = v;
            }
        }
        ds.tasks.push_back({MaskedMatrix(y, mask), fam});
    }

    CalibrationConstraint cal;
    cal.A = DenseMatrix::Constant(1, spec.n, 1.0 / static_cast<double>(spec.n));
    cal.B = cal.A * truth.X_star;
    ds.calibration = cal;
    return out;
}

}  // namespace tmcc
