#pragma once

#include "tmcc/random.hpp"

#include <string>

namespace tmcc::expfam {

enum class Kind { Bernoulli, Poisson, Gaussian };

/// One-parameter exponential family f(y|z) = h(y) exp{y z - g(z)} in its
/// natural parameter z. Gaussian carries its known variance sigma2 and has
/// mean sigma2 * z.
struct Family {
    Kind kind = Kind::Gaussian;
    double sigma2 = 1.0;

    static Family bernoulli() { return {Kind::Bernoulli, 0.0}; }
    static Family poisson() { return {Kind::Poisson, 0.0}; }
    static Family gaussian(double sigma2 = 1.0);

    bool operator==(const Family&) const = default;
};

std::string to_string(const Family& fam);
/// Parses "bernoulli", "poisson", "gaussian" or "gaussian(<sigma2>)".
Family parse_family(const std::string& text);

/// Poisson natural parameters above this overflow g and g' in practice and
/// mean the iterate has diverged.
inline constexpr double kPoissonMaxZ = 700.0;

double g(const Family& fam, double z);
double g_prime(const Family& fam, double z);
double g_double_prime(const Family& fam, double z);

bool in_support(const Family& fam, double y);

/// Negative log-likelihood without the h(y) term: -y z + g(z).
double nll_term(const Family& fam, double y, double z);

/// Same as nll_term / g_prime without the support check; used by the
/// objective hot loops on already validated data.
double nll_term_unchecked(const Family& fam, double y, double z);

/// Draws y ~ f(.|z) from the caller's stream.
///
/// Poisson uses sequential-search inversion for mean < 10 and Hormann's PTRS
/// transformed rejection for 10 <= mean <= 1e6.
double sample(const Family& fam, double z, SeedStream& rng);

double sigmoid(double z);

}  // namespace tmcc::expfam
