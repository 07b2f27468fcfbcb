#include "vlab/bethe.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "vlab/errors.hpp"

namespace vlab {

namespace {

constexpr double pi = std::numbers::pi;
const cplx I{0.0, 1.0};

// Complex polish is accepted below this ratio-form residual.
constexpr double kPolishTolerance = 1e-10;

void check_den(cplx den, const char* what) {
    if (std::abs(den) < kPoleTolerance) throw PoleError(std::string("evaluation point at a pole of ") + what);
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// d phi / dx
double dphi(double x, double y) {
    const double t = std::tanh(x), c = 1.0 / std::tan(y);
    const double sech2 = 1.0 - t * t;
    return 2.0 * c * sech2 / (1.0 + t * t * c * c);
}

cplx coth(cplx z) { return std::cosh(z) / std::sinh(z); }

std::vector<cplx> assemble_roots(const Eigen::VectorXd& x, int m) {
    std::vector<cplx> r(2 * m);
    for (int j = 0; j < m; ++j) {
        r[j] = {x(j), x(m + j)};
        r[m + j] = std::conj(r[j]);
    }
    return r;
}

// Ratio-form residuals of the first m roots (the conjugates satisfy the conjugate equations).
Eigen::VectorXcd ratio_residual(const std::vector<cplx>& roots, int m, int L) {
    const cplx a = I * pi / 12.0, b = I * pi / 3.0;
    Eigen::VectorXcd out(m);
    for (int j = 0; j < m; ++j) {
        const cplx l = roots[j];
        cplx v = std::pow(std::sinh(l + a) / std::sinh(l - a), L);
        for (std::size_t k = 0; k < roots.size(); ++k) {
            if (int(k) == j) continue;
            const cplx z = 2.0 * (l - roots[k]);
            v *= std::sinh(z - b) / std::sinh(z + b);
        }
        out(j) = v - 1.0;
    }
    return out;
}

double polish_norm(const Eigen::VectorXcd& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

// Newton on (mu, eta) for roots mu +- i eta.
std::pair<Eigen::VectorXd, double> polish_strings(Eigen::VectorXd x, int m, int L, int max_iterations) {
    const cplx a = I * pi / 12.0, b = I * pi / 3.0;
    auto roots = assemble_roots(x, m);
    Eigen::VectorXcd r = ratio_residual(roots, m, L);
    double res = polish_norm(r);
    for (int it = 0; it < max_iterations && res > 1e-14; ++it) {
        // G(j, k) = dF_j / d root_k with F_j = log(ratio_j)
        Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(m, 2 * m);
        for (int j = 0; j < m; ++j) {
            const cplx l = roots[j];
            G(j, j) += double(L) * (coth(l + a) - coth(l - a));
            for (int k = 0; k < 2 * m; ++k) {
                if (k == j) continue;
                const cplx z = 2.0 * (l - roots[k]);
                const cplx d = 2.0 * (coth(z - b) - coth(z + b));
                G(j, j) += d;
                G(j, k) -= d;
            }
        }
        Eigen::MatrixXd J(2 * m, 2 * m);
        Eigen::VectorXd rhs(2 * m);
        for (int j = 0; j < m; ++j) {
            const cplx ratio = r(j) + 1.0;
            for (int k = 0; k < m; ++k) {
                const cplx dmu = ratio * (G(j, k) + G(j, m + k));
                const cplx deta = ratio * I * (G(j, k) - G(j, m + k));
                J(j, k) = dmu.real();
                J(m + j, k) = dmu.imag();
                J(j, m + k) = deta.real();
                J(m + j, m + k) = deta.imag();
            }
            rhs(j) = -r(j).real();
            rhs(m + j) = -r(j).imag();
        }
        const Eigen::VectorXd step = J.fullPivLu().solve(rhs);
        double t = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            const Eigen::VectorXd trial = x + t * step;
            const auto tr = assemble_roots(trial, m);
            const Eigen::VectorXcd rr = ratio_residual(tr, m, L);
            const double nr = polish_norm(rr);
            if (std::isfinite(nr) && nr < res) {
                x = trial;
                roots = tr;
                r = rr;
                res = nr;
                improved = true;
                break;
            }
        }
        if (!improved || t * step.cwiseAbs().maxCoeff() < 1e-16) break;
    }
    return {x, res};
}

}  // namespace

std::vector<double> q_numbers(int L, int n, QConvention convention) {
    std::vector<double> q;
    if (convention == QConvention::Ladder) {
        const int m = n / 2;
        for (int j = 1; j <= m; ++j) q.push_back(j - (m + 1) / 2.0);
    } else {
        const int count = L / 2 - n;
        for (int j = 1; j <= count; ++j) q.push_back(-0.5 * (L / 2.0 - n - 1) + j - 1);
    }
    return q;
}

double phi(double x, double y) { return 2.0 * std::atan(std::tanh(x) / std::tan(y)); }

std::vector<double> log_residual(const std::vector<double>& mu, int L, const std::vector<double>& q) {
    const std::size_t m = mu.size();
    std::vector<double> r(m);
    for (std::size_t j = 0; j < m; ++j) {
        double s = L * (phi(mu[j], 5.0 * pi / 12.0) - phi(mu[j], pi / 4.0)) + 2.0 * pi * q[j];
        for (std::size_t k = 0; k < m; ++k)
            if (k != j) s -= phi(2.0 * mu[j] - 2.0 * mu[k], pi / 3.0);
        r[j] = s;
    }
    return r;
}

cplx transfer_eigenvalue(cplx lambda, const BetheState& state, int epsilon1) {
    const double e = epsilon1;
    const cplx a = I * pi * e / 12.0;
    const int L = state.L;

    cplx t1 = 1.0;
    for (cplx lj : state.roots) {
        const cplx den = std::sinh(lj - lambda - a);
        check_den(den, "the first product");
        t1 *= e * std::sinh(lj - lambda + a) / den;
    }

    const cplx base2_den = std::sinh(lambda + I * pi * e / 6.0);
    check_den(base2_den, "the second vacuum factor");
    cplx t2 = std::pow(e * std::sinh(lambda) / base2_den, L);
    for (cplx lj : state.roots) {
        const cplx d1 = std::sinh(2.0 * (lambda - lj) - I * pi * e / 6.0);
        const cplx d2 = std::sinh(lambda - lj + a);
        check_den(d1, "the second product");
        check_den(d2, "the second product");
        t2 *= e * std::sinh(2.0 * (lambda - lj) + I * pi * e / 2.0) / d1 * std::sinh(lambda - lj - a) / d2;
    }

    const cplx base3_den = std::cosh(lambda - I * pi * e / 3.0) * std::cosh(lambda);
    check_den(base3_den, "the third vacuum factor");
    cplx t3 = std::pow(-std::sinh(lambda + I * pi * e / 3.0) * std::sinh(lambda) / base3_den, L);
    for (cplx lj : state.roots) {
        const cplx den = std::sinh(lambda - lj + 5.0 * a);
        check_den(den, "the third product");
        t3 *= e * std::sinh(lambda - lj - I * pi / 2.0 + a) / den;
    }
    return t1 + t2 + t3;
}

std::vector<cplx> bae_residual(const BetheState& state, int epsilon1) {
    const double e = epsilon1;
    std::vector<cplx> out;
    for (std::size_t j = 0; j < state.roots.size(); ++j) {
        const cplx l = state.roots[j];
        const cplx lhs = std::pow(std::sinh(l + I * pi * e / 12.0) / std::sinh(l - I * pi * e / 12.0), state.L);
        cplx rhs = 1.0;
        for (std::size_t k = 0; k < state.roots.size(); ++k) {
            if (k == j) continue;
            const cplx z = 2.0 * (l - state.roots[k]);
            rhs *= std::sinh(z + I * pi * e / 3.0) / std::sinh(z - I * pi * e / 3.0);
        }
        out.push_back(lhs - rhs);
    }
    return out;
}

std::vector<cplx> bae_ratio_residual(const BetheState& state, int epsilon1) {
    const double e = epsilon1;
    std::vector<cplx> out;
    for (std::size_t j = 0; j < state.roots.size(); ++j) {
        const cplx l = state.roots[j];
        cplx v = std::pow(std::sinh(l + I * pi * e / 12.0) / std::sinh(l - I * pi * e / 12.0), state.L);
        for (std::size_t k = 0; k < state.roots.size(); ++k) {
            if (k == j) continue;
            const cplx z = 2.0 * (l - state.roots[k]);
            v *= std::sinh(z - I * pi * e / 3.0) / std::sinh(z + I * pi * e / 3.0);
        }
        out.push_back(v - 1.0);
    }
    return out;
}

BetheState solve_ground_state(int L, int epsilon1, const SolverOptions& options) {
    if (L < 4 || L % 2 != 0) throw ConfigError("ground state needs an even chain length >= 4, got " + std::to_string(L));
    if (epsilon1 != 1 && epsilon1 != -1) throw ConfigError("epsilon1 must be +1 or -1");

    BetheState st;
    st.L = L;
    st.n = L;
    const int m = L / 2;
    st.q_numbers = q_numbers(L, st.n, options.convention);
    if (int(st.q_numbers.size()) != m)
        throw SeedError("Q-number count " + std::to_string(st.q_numbers.size()) + " does not match " +
                        std::to_string(m) + " strings at L = " + std::to_string(L));

    // Seed: centers equally spaced in the bulk counting variable.
    std::vector<double> mu(m);
    for (int j = 0; j < m; ++j) mu[j] = 0.5 * std::asinh(std::tan(2.0 * pi * (j + 0.5) / L - pi / 2.0));

    std::vector<double> r = log_residual(mu, L, st.q_numbers);
    double res = max_abs(r);
    const double target = options.tolerance * L;
    int it = 0;
    for (; it < options.max_iterations && res > target; ++it) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd rhs(m);
        for (int j = 0; j < m; ++j) {
            J(j, j) = L * (dphi(mu[j], 5.0 * pi / 12.0) - dphi(mu[j], pi / 4.0));
            for (int k = 0; k < m; ++k) {
                if (k == j) continue;
                const double d = 2.0 * dphi(2.0 * mu[j] - 2.0 * mu[k], pi / 3.0);
                J(j, j) -= d;
                J(j, k) += d;
            }
            rhs(j) = -r[j];
        }
        const Eigen::VectorXd step = J.partialPivLu().solve(rhs);
        double t = 1.0;
        std::vector<double> trial(m);
        std::vector<double> tr;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            for (int j = 0; j < m; ++j) trial[j] = mu[j] + t * step(j);
            tr = log_residual(trial, L, st.q_numbers);
            if (max_abs(tr) < res) break;
        }
        mu = trial;
        r = tr;
        res = max_abs(r);
    }
    if (res > target) throw NoConvergenceError("logarithmic Bethe equations did not converge", it, res);

    // Lift to complex 2-strings and polish the full equations.
    const double side = (m % 2 == 1) ? 1.0 : -1.0;
    Eigen::VectorXd best;
    double best_res = std::numeric_limits<double>::infinity();
    for (double amp : {0.3, 0.1, 0.5, 0.03, 1.0}) {
        Eigen::VectorXd x(2 * m);
        for (int j = 0; j < m; ++j) {
            x(j) = mu[j];
            x(m + j) = pi / 3.0 + side * amp / L;
        }
        auto [sol, pres] = polish_strings(x, m, L, options.max_iterations);
        if (pres < best_res) {
            best = sol;
            best_res = pres;
        }
        if (best_res < kPolishTolerance) break;
    }
    if (!(best_res < kPolishTolerance))
        throw NoConvergenceError("complex Bethe equations did not converge", options.max_iterations, best_res);

    std::vector<int> order(m);
    for (int j = 0; j < m; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int p, int q) { return best(p) < best(q); });
    st.mu = mu;
    std::sort(st.mu.begin(), st.mu.end());
    st.roots.resize(2 * m);
    for (int j = 0; j < m; ++j) {
        const int o = order[j];
        st.roots[j] = {best(o), best(m + o)};
        st.roots[m + j] = std::conj(st.roots[j]);
    }
    double worst = 0.0;
    for (cplx v : bae_ratio_residual(st, 1)) worst = std::max(worst, std::abs(v));
    st.residual = worst;
    return st;
}

double energy(const BetheState& state, int epsilon1) {
    cplx e = 0.0;
    for (cplx l : state.roots) {
        const cplx den = std::cosh(2.0 * l) - std::cos(pi / 6.0);
        check_den(den, "the energy");
        e += 2.0 * std::sin(pi / 6.0) / den;
    }
    e *= double(epsilon1);
    if (std::abs(e.imag()) > 1e-9)
        throw ComplexEnergyError("energy has imaginary part " + std::to_string(e.imag()));
    return e.real();
}

double counting_function(const BetheState& state, double mu) {
    double s = phi(mu, 5.0 * pi / 12.0) - phi(mu, pi / 4.0);
    for (double mk : state.mu) s -= phi(2.0 * mu - 2.0 * mk, pi / 3.0) / state.L;
    return 0.5 - s / (2.0 * pi);
}

double counting_derivative(const BetheState& state, double mu) {
    double s = dphi(mu, 5.0 * pi / 12.0) - dphi(mu, pi / 4.0);
    for (double mk : state.mu) s -= 2.0 * dphi(2.0 * mu - 2.0 * mk, pi / 3.0) / state.L;
    return -s / (2.0 * pi);
}

std::vector<DensitySample> density_profile(const BetheState& state) {
    std::vector<DensitySample> out;
    const auto& mu = state.mu;
    for (std::size_t j = 1; j + 1 < mu.size(); ++j) {
        const double dz = counting_function(state, mu[j + 1]) - counting_function(state, mu[j - 1]);
        out.push_back({mu[j], dz / (mu[j + 1] - mu[j - 1])});
    }
    return out;
}

double bulk_density(double mu) { return 1.0 / (pi * std::cosh(2.0 * mu)); }

EnergyDensity ground_energy_density() {
    EnergyDensity out;
    out.closed_form = -2.0 / pi + std::sqrt(3.0) / 9.0;
    // |integrand| <= 4 exp(-pi w / 2) for large w, so the tail past W is below (8/pi) exp(-pi W / 2).
    const double tail = 1e-14;
    out.cutoff = (2.0 / pi) * std::log(8.0 / (pi * tail));
    auto f = [](double w) {
        if (w < 1e-6) return -1.0 / 3.0 + 0.0 * w;
        return (std::sinh(pi * w / 12.0) - std::sinh(pi * w / 4.0)) / (std::cosh(pi * w / 4.0) * std::sinh(pi * w / 2.0));
    };
    double err = 0.0;
    out.quadrature = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, out.cutoff, 15, 1e-15, &err);
    out.error_estimate = err + tail;
    return out;
}

Excitation hole_excitation(double mu_hole) {
    if (!(std::abs(mu_hole) <= kHoleWindow)) throw ConfigError("hole rapidity outside the window");
    Excitation e;
    e.mu_hole = mu_hole;
    e.energy = 2.0 * pi * bulk_density(mu_hole);
    auto eps = [](double x) { return 2.0 / std::cosh(2.0 * x); };
    e.momentum = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        eps, mu_hole, std::numeric_limits<double>::infinity(), 15, 1e-15);
    return e;
}

std::vector<Excitation> hole_samples(int count, double window) {
    std::vector<Excitation> out;
    for (int i = 0; i < count; ++i) {
        const double mu = count == 1 ? 0.0 : -window + 2.0 * window * i / (count - 1);
        out.push_back(hole_excitation(mu));
    }
    return out;
}

double dispersion_check(const std::vector<Excitation>& samples) {
    double worst = 0.0;
    for (const auto& s : samples) worst = std::max(worst, std::abs(s.energy - 2.0 * std::sin(s.momentum)));
    return worst;
}

void write_roots_csv(std::ostream& os, const BetheState& state) {
    const int m = int(state.mu.size());
    os << "L,j,Q_j,mu_j,re_lambda,im_lambda,scaled_re,scaled_im\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < state.roots.size(); ++k) {
        const int j = m ? int(k) % m : 0;
        const cplx l = state.roots[k];
        const double q = j < int(state.q_numbers.size()) ? state.q_numbers[j] : 0.0;
        const double mu = j < m ? state.mu[j] : l.real();
        os << state.L << ',' << j + 1 << ',' << q << ',' << mu << ',' << l.real() << ',' << l.imag() << ','
           << 3.0 * l.real() / pi << ',' << 3.0 * l.imag() / pi << '\n';
    }
}

}  // namespace vlab
