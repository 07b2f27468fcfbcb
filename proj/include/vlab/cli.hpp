#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vlab/weights.hpp"

namespace vlab {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes shared by every subcommand.
enum ExitCode : int { kExitPass = 0, kExitCheckFailed = 1, kExitBudget = 2, kExitConfig = 3 };

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
};

struct RunConfig {
    std::string branch = "2B";
    int epsilon1 = 1;
    int epsilon2 = 1;
    int d_sign = 1;
    cplx gamma{0.7, 0.0};
    std::uint64_t seed = 20240917;
    std::optional<double> tolerance;  // overrides every per-check threshold
    std::string out;
    std::string format = "csv";
    int L = 4;
    std::optional<int> sector;
    int samples = 20;
    int workers = 0;  // 0 = hardware concurrency
    std::string scope = "all";
    double gamma_perturb = 0.0;
    std::string model = "pt";
    int k = 0;
    std::string method = "auto";
    std::string hamiltonian = "logderiv";
    std::vector<int> sizes{16, 32, 64};
    std::string dump;
};

// Parses "RE" or "RE,IM".
cplx parse_gamma(const std::string& s);

// Runs one command line; stdout-like and stderr-like streams are injected for testing.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vlab
