#pragma once

#include <stdexcept>
#include <string>

namespace vlab {

// Spectral point too close to a weight denominator zero; shift lambda and retry.
struct PoleError : std::runtime_error {
    explicit PoleError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateWeightError : std::runtime_error {
    explicit DegenerateWeightError(const std::string& what) : std::runtime_error(what) {}
};

struct BudgetError : std::runtime_error {
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergenceError : std::runtime_error {
    NoConvergenceError(const std::string& what, int iters, double best)
        : std::runtime_error(what), iterations(iters), best_residual(best) {}
    int iterations;
    double best_residual;
};

struct ComplexEnergyError : std::runtime_error {
    explicit ComplexEnergyError(const std::string& what) : std::runtime_error(what) {}
};

struct SeedError : std::runtime_error {
    explicit SeedError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vlab
