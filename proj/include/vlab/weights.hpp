#pragma once

#include <array>
#include <complex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vlab/errors.hpp"

namespace vlab {

using cplx = std::complex<double>;

enum class BranchId { B1A, B1B, B2A, B2B, S1S, S2S };

std::string to_string(BranchId b);
// Accepts "1A", "B1A", "1S", "S1S", ... (case-insensitive).
BranchId parse_branch(std::string_view s);

// For S1S / S2S the overall sign is carried in epsilon1.
struct BranchParams {
    cplx gamma{0.7, 0.0};
    int epsilon1 = 1;
    int epsilon2 = 1;
    int d_sign = 1;
    cplx j0{0.0, -1.0};
};

// Anisotropy actually used by the branch (fixed for B2B and the special points).
cplx effective_gamma(BranchId b, const BranchParams& p);

inline constexpr double kPoleTolerance = 1e-8;

struct WeightSet {
    cplx a_plus, a_minus;
    cplx b_plus, b_minus;
    cplx c_plus, c_minus;
    cplx c_tilde_plus, c_tilde_minus;
    cplx d, d_tilde;
    cplx f, g;
    cplx h, h_tilde;
};

inline constexpr std::array<std::string_view, 14> kWeightNames = {
    "a_plus", "a_minus", "b_plus", "b_minus", "c_plus", "c_minus", "c_tilde_plus",
    "c_tilde_minus", "d", "d_tilde", "f", "g", "h", "h_tilde"};

cplx weight_by_index(const WeightSet& w, int idx);
cplx& weight_by_index(WeightSet& w, int idx);

struct InvariantSet {
    cplx delta_p, delta_m;
    cplx lambda_p, lambda_m;
    cplx psi, omega;
    cplx gamma_p, gamma_m;
    cplx theta_p, theta_m;
    cplx dg_p, dg_m;
    cplx dh_p, dh_m;
    cplx dht_p, dht_m;
};

inline constexpr std::array<std::string_view, 16> kInvariantNames = {
    "delta_p", "delta_m", "lambda_p", "lambda_m", "psi",  "omega", "gamma_p", "gamma_m",
    "theta_p", "theta_m", "dg_p",     "dg_m",     "dh_p", "dh_m",  "dht_p",   "dht_m"};

cplx invariant_by_index(const InvariantSet& inv, int idx);
cplx& invariant_by_index(InvariantSet& inv, int idx);

struct NamedResidual {
    std::string name;
    double value;
};

WeightSet make_weights(BranchId branch, const BranchParams& params, cplx lambda);

InvariantSet compute_invariants(const WeightSet& w);

InvariantSet reference_invariants(BranchId branch, const BranchParams& params);

// Constraints shared by every integrable branch, including A1..A3.
std::vector<NamedResidual> check_invariant_constraints(const InvariantSet& inv);

// Family-specific relations: branch-1 split conditions or the branch-2 pinning (Omega=0, Lambda+=+-Psi).
std::vector<NamedResidual> check_branch_constraints(const InvariantSet& inv, BranchId branch);

// B1..B4 of the a+/b+ cubic plus the Gamma- elimination.
std::vector<NamedResidual> check_coefficient_identities(const InvariantSet& inv);

// Coefficients of the cubic in a+, b+; exposed for the exact-rational oracle.
template <class T>
struct CubicCoefficients {
    T b1, b2, b3, b4;
};

template <class T>
CubicCoefficients<T> cubic_coefficients(const T& dp, const T& lp, const T& ps, const T& om,
                                        const T& gp, const T& gm);

struct DependentWeights {
    cplx a_minus, b_minus, c_minus, d, f, g, h, h_tilde;
};

// d_sign picks the square-root branch of d (principal root times d_sign).
DependentWeights reconstruct_dependent_weights(cplx a_p, cplx b_p, cplx c_p, const InvariantSet& inv,
                                               int d_sign);

cplx conic_residual(cplx x, cplx y, cplx delta_p);
std::pair<cplx, cplx> parameterize_conic(cplx lambda, cplx gamma);

double max_abs(const std::vector<NamedResidual>& r);

}  // namespace vlab

#include "vlab/detail/cubic.hpp"
