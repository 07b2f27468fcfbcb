#pragma once

#include <iosfwd>
#include <vector>

#include "vlab/weights.hpp"

// Bethe ansatz for the 2B chain: roots, energies, densities and the thermodynamic limit.
namespace vlab {

struct BetheState {
    int L = 0;
    int n = 0;                       // number of roots
    std::vector<double> q_numbers;   // one per 2-string
    std::vector<double> mu;          // centers from the real logarithmic system, ascending
    std::vector<cplx> roots;         // polished strings x + i eta, then the conjugates
    double residual = 0.0;           // max |ratio form - 1| over the roots
};

struct DensitySample {
    double mu = 0.0;
    double rho = 0.0;
};

struct Excitation {
    double mu_hole = 0.0;
    double energy = 0.0;
    double momentum = 0.0;
};

// Ladder: Q_j = j - (m+1)/2 for m strings. HalfOffset: -(L/2 - n - 1)/2 + j - 1, j = 1..L/2 - n.
enum class QConvention { Ladder, HalfOffset };

std::vector<double> q_numbers(int L, int n, QConvention convention);

struct SolverOptions {
    QConvention convention = QConvention::Ladder;
    int max_iterations = 200;
    double tolerance = 1e-12;
};

// Three-term eigenvalue of the transfer matrix on the state.
cplx transfer_eigenvalue(cplx lambda, const BetheState& state, int epsilon1 = 1);

// Per root: [sinh(l + i pi e/12) / sinh(l - i pi e/12)]^L - prod_k sinh(2(l - l_k) + i pi e/3) / sinh(2(l - l_k) - i pi e/3).
std::vector<cplx> bae_residual(const BetheState& state, int epsilon1 = 1);
// Per root: lhs^L / rhs - 1, the form the solver drives to zero.
std::vector<cplx> bae_ratio_residual(const BetheState& state, int epsilon1 = 1);

// phi(x, y) = 2 atan(tanh x cot y)
double phi(double x, double y);
// Real logarithmic equations for the string centers.
std::vector<double> log_residual(const std::vector<double>& mu, int L, const std::vector<double>& q);

// Ground state in the zero-magnetization sector (n = L, m = L/2 two-strings).
BetheState solve_ground_state(int L, int epsilon1 = 1, const SolverOptions& options = {});

// E = epsilon1 * sum_j 2 sin(pi/6) / (cosh 2 l_j - cos(pi/6)), J0 = -i normalization.
double energy(const BetheState& state, int epsilon1 = 1);

// Z(mu) with Z(mu_j) = 1/2 + Q_j / L.
double counting_function(const BetheState& state, double mu);
double counting_derivative(const BetheState& state, double mu);
// rho at interior centers from the centered difference of Z across neighbouring roots.
std::vector<DensitySample> density_profile(const BetheState& state);
// Thermodynamic density 1 / (pi cosh 2 mu).
double bulk_density(double mu);

struct EnergyDensity {
    double quadrature = 0.0;
    double closed_form = 0.0;
    double error_estimate = 0.0;
    double cutoff = 0.0;
};
EnergyDensity ground_energy_density();

// |mu_hole| beyond this window is rejected.
inline constexpr double kHoleWindow = 10.0;
Excitation hole_excitation(double mu_hole);
std::vector<Excitation> hole_samples(int count, double window = 3.0);
// max |energy - 2 sin(momentum)|
double dispersion_check(const std::vector<Excitation>& samples);

// Columns L,j,Q_j,mu_j,re_lambda,im_lambda,scaled_re,scaled_im; one row per root.
void write_roots_csv(std::ostream& os, const BetheState& state);

}  // namespace vlab
