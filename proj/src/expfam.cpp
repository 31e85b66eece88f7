#include "tmcc/expfam.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tmcc::expfam {

namespace {

constexpr double kMaxPoissonMean = 1e6;

void guard_poisson(double z) {
    if (!(z <= kPoissonMaxZ)) {
        std::ostringstream os;
        os << "poisson link overflow at z = " << z << " (iterate diverged?)";
        throw std::overflow_error(os.str());
    }
}

double poisson_inversion(double mean, SeedStream& rng) {
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    double k = 0.0;
    while (u > cdf) {
        k += 1.0;
        p *= mean / k;
        cdf += p;
        // cdf rounding can stall below u; the tail mass is < 1e-16 there
        if (p < 1e-300 && k > mean) break;
    }
    return k;
}

double poisson_ptrs(double mean, SeedStream& rng) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double U = rng.uniform() - 0.5;
        const double V = rng.uniform();
        const double us = 0.5 - std::fabs(U);
        const double k = std::floor((2.0 * a / us + b) * U + mean + 0.43);
        if (us >= 0.07 && V <= vr) return k;
        if (k < 0.0 || (us < 0.013 && V > us)) continue;
        if (std::log(V) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return k;
        }
    }
}

}  // namespace

Family Family::gaussian(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw std::invalid_argument("gaussian family requires sigma2 > 0");
    }
    return {Kind::Gaussian, sigma2};
}

std::string to_string(const Family& fam) {
    switch (fam.kind) {
        case Kind::Bernoulli: return "bernoulli";
        case Kind::Poisson: return "poisson";
        case Kind::Gaussian: {
            std::ostringstream os;
            os.precision(17);
            os << "gaussian(" << fam.sigma2 << ")";
            return os.str();
        }
    }
    return "unknown";
}

Family parse_family(const std::string& text) {
    if (text == "bernoulli") return Family::bernoulli();
    if (text == "poisson") return Family::poisson();
    if (text == "gaussian") return Family::gaussian(1.0);
    const std::string prefix = "gaussian(";
    if (text.size() > prefix.size() + 1 && text.compare(0, prefix.size(), prefix) == 0 &&
        text.back() == ')') {
        const std::string inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
        std::size_t used = 0;
        double s2 = 0.0;
        try {
            s2 = std::stod(inner, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == inner.size() && used > 0) return Family::gaussian(s2);
    }
    throw std::invalid_argument("unknown family '" + text + "'");
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double g(const Family& fam, double z) {
    switch (fam.kind) {
        case Kind::Bernoulli:
            if (z > 35.0) return z;
            return std::log1p(std::exp(z));
        case Kind::Poisson:
            guard_poisson(z);
            return std::exp(z);
        case Kind::Gaussian:
            return 0.5 * fam.sigma2 * z * z;
    }
    return 0.0;
}

double g_prime(const Family& fam, double z) {
    switch (fam.kind) {
        case Kind::Bernoulli: return sigmoid(z);
        case Kind::Poisson:
            guard_poisson(z);
            return std::exp(z);
        case Kind::Gaussian: return fam.sigma2 * z;
    }
    return 0.0;
}

double g_double_prime(const Family& fam, double z) {
    switch (fam.kind) {
        case Kind::Bernoulli: {
            const double p = sigmoid(z);
            return p * (1.0 - p);
        }
        case Kind::Poisson:
            guard_poisson(z);
            return std::exp(z);
        case Kind::Gaussian: return fam.sigma2;
    }
    return 0.0;
}

bool in_support(const Family& fam, double y) {
    if (!std::isfinite(y)) return false;
    switch (fam.kind) {
        case Kind::Bernoulli: return y == 0.0 || y == 1.0;
        case Kind::Poisson: return y >= 0.0 && std::floor(y) == y;
        case Kind::Gaussian: return true;
    }
    return false;
}

double nll_term_unchecked(const Family& fam, double y, double z) {
    return -y * z + g(fam, z);
}

double nll_term(const Family& fam, double y, double z) {
    if (!in_support(fam, y)) {
        std::ostringstream os;
        os << "nll_term: y = " << y << " outside the support of " << to_string(fam);
        throw std::invalid_argument(os.str());
    }
    return nll_term_unchecked(fam, y, z);
}

double sample(const Family& fam, double z, SeedStream& rng) {
    if (!std::isfinite(z)) throw std::invalid_argument("sample: non-finite natural parameter");
    switch (fam.kind) {
        case Kind::Bernoulli:
            return rng.uniform() < sigmoid(z) ? 1.0 : 0.0;
        case Kind::Poisson: {
            const double mean = z <= kPoissonMaxZ ? std::exp(z) : INFINITY;
            if (!(mean <= kMaxPoissonMean)) {
                std::ostringstream os;
                os << "sample: poisson mean exp(" << z << ") exceeds " << kMaxPoissonMean;
                throw std::overflow_error(os.str());
            }
            return mean < 10.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
        }
        case Kind::Gaussian:
            return fam.sigma2 * z + std::sqrt(fam.sigma2) * rng.normal();
    }
    return 0.0;
}

}  // namespace tmcc::expfam
