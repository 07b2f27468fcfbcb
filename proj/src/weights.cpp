#include "vlab/weights.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace vlab {

namespace {

constexpr double pi = std::numbers::pi;
const cplx I{0.0, 1.0};

// Principal root with a signed-zero imaginary part folded to +0, so that
// negative real radicands always land on +i.
cplx sqrt_principal(cplx z) {
    if (z.imag() == 0.0) z = cplx(z.real(), 0.0);
    return std::sqrt(z);
}

void check_pole(cplx den, const char* what, cplx lambda) {
    if (std::abs(den) < kPoleTolerance) {
        throw PoleError(std::string("spectral point at pole of ") + what + " (lambda = " +
                        std::to_string(lambda.real()) + "+" + std::to_string(lambda.imag()) + "i)");
    }
}

cplx gamma_bar(int eps1) { return I * (pi / 4.0) * double(1 - eps1); }

void fill_plus(WeightSet& w, cplx lambda, cplx gamma) {
    const cplx den = std::sinh(lambda + gamma);
    check_pole(den, "sinh(lambda+gamma)", lambda);
    w.a_plus = 1.0;
    w.b_plus = std::sinh(lambda) / den;
    w.c_plus = std::sinh(gamma) / den;
}

WeightSet weights_1a(const BranchParams& p, cplx lam) {
    WeightSet w{};
    const cplx g = p.gamma;
    const cplx gb = gamma_bar(p.epsilon1);
    fill_plus(w, lam, g);
    const cplx s1 = std::sinh(lam + g / 2.0 + gb);
    check_pole(s1, "sinh(lambda+gamma/2+gbar)", lam);
    const cplx den = s1 * std::sinh(lam + g);
    w.a_minus = 1.0;
    w.b_minus = w.b_plus;
    w.c_minus = w.c_plus;
    w.d = double(p.d_sign) * std::sinh(g) * std::sinh(lam) / den;
    w.d_tilde = w.d;
    w.f = std::sinh(lam - g / 2.0 + gb) * std::sinh(lam) / den;
    w.g = (-2.0 * std::cosh(g / 2.0 - gb) + std::cosh(1.5 * g + gb) + std::cosh(2.0 * lam + g / 2.0 - gb)) /
          (2.0 * den);
    const cplx sh = std::sinh(g / 2.0 + gb);
    w.h = 2.0 * std::cosh(g / 2.0 - gb) * sh * sh / den;
    w.h_tilde = w.h;
    return w;
}

WeightSet weights_1b(cplx g, int eps1, int d_sign, cplx lam) {
    WeightSet w{};
    const cplx g0 = I * (pi / 3.0) * double(eps1);
    fill_plus(w, lam, g);
    const cplx s1 = std::sinh(lam + g - g0);
    check_pole(s1, "sinh(lambda+gamma-gamma0)", lam);
    const cplx den = s1 * std::sinh(lam + g);
    w.a_minus = std::sinh(lam - g + g0) * std::sinh(lam - g) / den;
    w.b_minus = std::sinh(g - lam) * std::sinh(lam) / den;
    w.c_minus = std::sinh(g0 - g) * std::sinh(lam - g) / den;
    w.d = double(d_sign) * sqrt_principal(std::sinh(g) * std::sinh(g - g0)) * std::sinh(lam) / den;
    w.d_tilde = w.d;
    w.f = std::sinh(lam - g0) * std::sinh(lam) / den;
    w.g = (-1.0 + std::cosh(2.0 * lam + g0) + std::cosh(2.0 * g - g0)) / (2.0 * den);
    w.h = std::sinh(g) * std::sinh(g - g0) / den;
    w.h_tilde = w.h;
    return w;
}

WeightSet weights_2a(const BranchParams& p, cplx lam) {
    WeightSet w{};
    const cplx g = p.gamma;
    const cplx gb = gamma_bar(p.epsilon1);
    const double e2 = p.epsilon2;
    fill_plus(w, lam, g);
    const cplx c1 = std::cosh(lam + 1.5 * g + gb);
    check_pole(c1, "cosh(lambda+3gamma/2+gbar)", lam);
    const cplx den = c1 * std::sinh(lam + g);
    w.a_minus = 1.0;
    w.b_minus = w.b_plus;
    w.c_minus = w.c_plus;
    w.d = -double(p.d_sign) * std::exp(e2 * g) * std::sinh(g) * std::sinh(lam) / den;
    w.d_tilde = -std::exp(-2.0 * e2 * g) * w.d;
    const cplx fnum = std::cosh(lam + g / 2.0 + gb) * std::sinh(lam);
    w.f = fnum / den;
    w.g = (-std::sinh(g / 2.0 + gb) - std::sinh(1.5 * g - gb) + std::sinh(2.5 * g + gb) +
           std::sinh(2.0 * lam + 1.5 * g - gb)) /
          (2.0 * den);
    w.h = (den - std::exp(2.0 * e2 * g) * fnum) / den;
    w.h_tilde = (den - std::exp(-2.0 * e2 * g) * fnum) / den;
    return w;
}

WeightSet weights_2b(const BranchParams& p, cplx lam) {
    WeightSet w{};
    const cplx g = effective_gamma(BranchId::B2B, p);
    const double e1 = p.epsilon1, e2 = p.epsilon2;
    fill_plus(w, lam, g);
    const cplx om = std::exp(I * pi * e2 / 3.0);
    const cplx c1 = std::cosh(lam - 2.0 * g);
    const cplx c2 = std::cosh(lam);
    check_pole(c1, "cosh(lambda-2gamma)", lam);
    check_pole(c2, "cosh(lambda)", lam);
    const cplx den = c1 * c2;
    w.a_minus = 1.0;
    w.b_minus = -w.b_plus;
    w.c_minus = w.c_plus;
    w.d = double(p.d_sign) * e1 * e2 * om * std::sinh(lam) / (2.0 * den);
    w.d_tilde = -om * w.d;
    const cplx sn = std::sinh(lam + 2.0 * g) * std::sinh(lam);
    w.f = -sn / den;
    w.g = std::cosh(2.0 * lam) / (2.0 * den);
    w.h = (den + std::exp(-I * pi * e2 / 3.0) * sn) / den;
    w.h_tilde = (den + std::exp(I * pi * e2 / 3.0) * sn) / den;
    return w;
}

// Rational family: scaling limit of 2A at Delta+ = 2s with lambda = u * delta.
WeightSet weights_2s(int s, int d_sign, cplx u) {
    check_pole(u + 1.0, "u+1", u);
    check_pole(2.0 * u + 3.0, "2u+3", u);
    WeightSet w{};
    const cplx q = (u + 1.0) * (2.0 * u + 3.0);
    w.a_plus = w.a_minus = 1.0;
    w.b_plus = w.b_minus = double(s) * u / (u + 1.0);
    w.c_plus = w.c_minus = 1.0 / (u + 1.0);
    w.d = double(d_sign) * 2.0 * I * u / q;
    w.d_tilde = -w.d;
    w.f = u * (2.0 * u + 1.0) / q;
    w.g = (-2.0 * u * u - 3.0 * u + 3.0) / q;
    w.h = w.h_tilde = (4.0 * u + 3.0) / q;
    return w;
}

}  // namespace

std::string to_string(BranchId b) {
    switch (b) {
        case BranchId::B1A: return "1A";
        case BranchId::B1B: return "1B";
        case BranchId::B2A: return "2A";
        case BranchId::B2B: return "2B";
        case BranchId::S1S: return "1S";
        case BranchId::S2S: return "2S";
    }
    return "?";
}

BranchId parse_branch(std::string_view s) {
    std::string t;
    for (char ch : s) t.push_back(char(std::toupper(static_cast<unsigned char>(ch))));
    if (t.size() == 3 && (t[0] == 'B' || t[0] == 'S')) t = t.substr(1);
    if (t == "1A") return BranchId::B1A;
    if (t == "1B") return BranchId::B1B;
    if (t == "2A") return BranchId::B2A;
    if (t == "2B") return BranchId::B2B;
    if (t == "1S") return BranchId::S1S;
    if (t == "2S") return BranchId::S2S;
    throw ConfigError("unknown branch '" + std::string(s) + "'");
}

cplx effective_gamma(BranchId b, const BranchParams& p) {
    switch (b) {
        case BranchId::B2B:
            return I * (pi / 2.0) * double(1 - p.epsilon1) + I * (pi / 6.0) * double(p.epsilon1);
        case BranchId::S1S:
            // 2 cosh(gamma) = s * sqrt(3)
            return p.epsilon1 > 0 ? I * (pi / 6.0) : I * (5.0 * pi / 6.0);
        case BranchId::S2S:
            return p.epsilon1 > 0 ? cplx(0.0) : I * pi;
        default:
            return p.gamma;
    }
}

cplx weight_by_index(const WeightSet& w, int idx) {
    return weight_by_index(const_cast<WeightSet&>(w), idx);
}

cplx& weight_by_index(WeightSet& w, int idx) {
    switch (idx) {
        case 0: return w.a_plus;
        case 1: return w.a_minus;
        case 2: return w.b_plus;
        case 3: return w.b_minus;
        case 4: return w.c_plus;
        case 5: return w.c_minus;
        case 6: return w.c_tilde_plus;
        case 7: return w.c_tilde_minus;
        case 8: return w.d;
        case 9: return w.d_tilde;
        case 10: return w.f;
        case 11: return w.g;
        case 12: return w.h;
        case 13: return w.h_tilde;
    }
    throw std::out_of_range("weight index");
}

cplx invariant_by_index(const InvariantSet& inv, int idx) {
    return invariant_by_index(const_cast<InvariantSet&>(inv), idx);
}

cplx& invariant_by_index(InvariantSet& v, int idx) {
    cplx* fields[] = {&v.delta_p, &v.delta_m, &v.lambda_p, &v.lambda_m, &v.psi,  &v.omega,
                      &v.gamma_p, &v.gamma_m, &v.theta_p,  &v.theta_m,  &v.dg_p, &v.dg_m,
                      &v.dh_p,    &v.dh_m,    &v.dht_p,    &v.dht_m};
    if (idx < 0 || idx >= 16) throw std::out_of_range("invariant index");
    return *fields[idx];
}

WeightSet make_weights(BranchId branch, const BranchParams& params, cplx lambda) {
    WeightSet w{};
    switch (branch) {
        case BranchId::B1A: w = weights_1a(params, lambda); break;
        case BranchId::B1B: w = weights_1b(params.gamma, params.epsilon1, params.d_sign, lambda); break;
        case BranchId::B2A: w = weights_2a(params, lambda); break;
        case BranchId::B2B: w = weights_2b(params, lambda); break;
        case BranchId::S1S:
            w = weights_1b(effective_gamma(branch, params), params.epsilon1, params.d_sign, lambda);
            break;
        case BranchId::S2S: w = weights_2s(params.epsilon1, params.d_sign, lambda); break;
    }
    w.c_tilde_plus = w.c_plus;
    w.c_tilde_minus = w.c_minus;
    return w;
}

namespace {

cplx ratio(cplx num, cplx den, double scale, const char* what) {
    if (!(std::abs(den) > 1e-13 * std::max(scale, 1e-300))) {
        throw DegenerateWeightError(std::string("vanishing denominator in ") + what);
    }
    return num / den;
}

}  // namespace

InvariantSet compute_invariants(const WeightSet& w) {
    InvariantSet v{};
    const cplx ap = w.a_plus, am = w.a_minus, bp = w.b_plus, bm = w.b_minus;
    const cplx cp = w.c_plus, cm = w.c_minus, d = w.d, f = w.f;
    const double sc = std::max({std::abs(ap), std::abs(bp), std::abs(cp), std::abs(f), std::abs(d)});
    const double s2 = sc * sc;

    v.psi = ratio(w.d_tilde, d, sc, "psi = d~/d");
    v.delta_p = ratio(ap * ap + bp * bp - cp * cp, ap * bp, s2, "delta_p");
    v.delta_m = ratio(am * am + bm * bm - cm * cm, am * bm, s2, "delta_m");
    const cplx d2 = d * d;
    v.lambda_p = ratio(bp * bp + f * f - v.delta_p * bp * f, d2, s2, "lambda_p");
    v.lambda_m = ratio(bm * bm + f * f - v.delta_m * bm * f, d2, s2, "lambda_m");
    v.omega = ratio(v.lambda_p / v.psi * bm - bp, f, sc, "omega");
    v.theta_p = ratio((bp + bm) * f, bp * bm - v.psi * d2 + f * f, s2, "theta_p");
    v.theta_m = ratio((bp - bm) * f, bp * bm - v.psi * d2 - f * f, s2, "theta_m");
    v.gamma_p = ratio(ap * bp - v.delta_p * ap * f + bp * f, bp * bp - ap * f, s2, "gamma_p");
    v.gamma_m = ratio(am * bm - v.delta_m * am * f + bm * f, bm * bm - am * f, s2, "gamma_m");
    v.dg_p = ratio(-w.g + ap + v.psi / v.lambda_p * f, bp, sc, "dg_p");
    v.dg_m = ratio(-w.g + am + v.psi / v.lambda_m * f, bm, sc, "dg_m");
    v.dh_p = ratio(-v.psi * w.h + v.psi * ap + f, bp, sc, "dh_p");
    v.dh_m = ratio(-v.psi * w.h + v.psi * am + f, bm, sc, "dh_m");
    v.dht_p = ratio(-w.h_tilde + ap + v.psi * f, bp, sc, "dht_p");
    v.dht_m = ratio(-w.h_tilde + am + v.psi * f, bm, sc, "dht_m");
    return v;
}

InvariantSet reference_invariants(BranchId branch, const BranchParams& p) {
    const double r3 = std::sqrt(3.0);
    const double e1 = p.epsilon1, e2 = p.epsilon2;
    InvariantSet v{};
    switch (branch) {
        case BranchId::B1A: {
            const cplx D = 2.0 * std::cosh(p.gamma);
            v = {D, D, 1.0, 1.0, 1.0, 0.0, D + e1, D + e1, 2.0 / D, 0.0, D - e1, D - e1, D, D, D, D};
            break;
        }
        case BranchId::B1B: {
            const cplx D = 2.0 * std::cosh(p.gamma);
            const cplx s = sqrt_principal(4.0 - D * D);
            const cplx X = e1 * r3 * s;
            const cplx dhm = (r3 * s - e1 * D) / (2.0 * e1);
            v.delta_p = D;
            v.delta_m = (-D + X) / 2.0;
            v.lambda_p = 2.0 * X / (3.0 * D + X);
            v.lambda_m = (r3 * D + e1 * s) / (2.0 * e1 * s);
            v.psi = 1.0;
            v.omega = (6.0 - 3.0 * D * D - X * D) / (3.0 * D + X);
            v.gamma_p = (3.0 * D - X) / 6.0;
            v.gamma_m = (-3.0 * D + X) / 6.0;
            v.theta_p = (D + X) / 2.0;
            v.theta_m = (-3.0 * D + X) / 6.0;
            v.dg_p = (e1 * r3 + D * s) / s;
            v.dg_m = (4.0 - D * D) * (D + X) / (X * D + 4.0 - D * D);
            v.dh_p = v.dht_p = D;
            v.dh_m = v.dht_m = dhm;
            break;
        }
        case BranchId::B2A: {
            const cplx D = 2.0 * std::cosh(p.gamma);
            const cplx P = (2.0 - D * D + e2 * D * sqrt_principal(D * D - 4.0)) / 2.0;
            v = {D, D, P, P, P, 0.0, e1, e1, 2.0 / D, 0.0, D - e1, D - e1, 0.0, 0.0, 0.0, 0.0};
            break;
        }
        case BranchId::B2B: {
            const cplx om = std::exp(I * pi * e2 / 3.0);
            v = {e1 * r3, -e1 * r3, om, om, -om, 0.0, e1 / r3, -e1 / r3, 0.0, -2.0 * e1 / r3,
                 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
            break;
        }
        case BranchId::S1S: {
            const double s = e1;
            v = {s * r3, -s * r3, -1.0, -1.0, 1.0, 0.0, 2.0 * s / r3, -2.0 * s / r3, 0.0,
                 -2.0 * s / r3, 0.0, 0.0, s * r3, -s * r3, s * r3, -s * r3};
            break;
        }
        case BranchId::S2S: {
            const double s = e1;
            v = {2.0 * s, 2.0 * s, -1.0, -1.0, -1.0, 0.0, -s, -s, s, 0.0, 3.0 * s, 3.0 * s,
                 0.0, 0.0, 0.0, 0.0};
            break;
        }
    }
    return v;
}

std::vector<NamedResidual> check_invariant_constraints(const InvariantSet& v) {
    const cplx Dp = v.delta_p, Dm = v.delta_m, L = v.lambda_p, Lm = v.lambda_m, P = v.psi, O = v.omega;
    const cplx G = v.gamma_p, Gm = v.gamma_m, Dgp = v.dg_p, Dgm = v.dg_m;
    const cplx L2 = L * L, L3 = L2 * L, P2 = P * P, P3 = P2 * P;
    std::vector<NamedResidual> r;
    auto push = [&](const char* n, cplx x) { r.push_back({n, std::abs(x)}); };
    push("constraintLAM", L * Lm - P2);
    push("eqvinc1k1", 2.0 * O * P + Dp * P - Dm * L);
    push("eqvinc1k2", L2 - Dm * L * O * P - P2 + O * O * P2);
    push("expTPM+", v.theta_p * P * (Dp + O) - (L + P));
    push("expTPM-", v.theta_m * P * (Dp + O) - (L - P));
    push("constraintGAM", Gm * L - P * (G + O));
    push("A1", (Dp - G) * L2 - (Dp - G + O) * P2);
    push("A2", -L3 - (1.0 + Dgp * (Dp - G)) * L2 * P + (1.0 + Dgm * (Dp - G + O)) * L * P2 +
                   (1.0 - O * (Dp - 2.0 * G + O)) * P3);
    push("A3", Dgp * P * L2 + G * L3 - (Dgm + G + Dgm * G * O) * L * P2 + (1.0 + G * O) * O * P3);
    return r;
}

std::vector<NamedResidual> check_branch_constraints(const InvariantSet& v, BranchId branch) {
    const cplx Dp = v.delta_p, L = v.lambda_p, P = v.psi, O = v.omega, G = v.gamma_p;
    std::vector<NamedResidual> r;
    const bool one = branch == BranchId::B1A || branch == BranchId::B1B || branch == BranchId::S1S ||
                     branch == BranchId::S2S;
    const bool two = branch == BranchId::B2A || branch == BranchId::B2B || branch == BranchId::S2S;
    if (one) {
        r.push_back({"eqvinch1", std::abs(v.dh_p - (1.0 + G * O) * (v.dh_m * L * P - O) / (L * L))});
        r.push_back({"eqvinch2", std::abs(O - (Dp - G) * (L * L - 1.0))});
        r.push_back({"eqsubbranch1",
                     std::abs((L * L - 1.0) * (1.0 + (Dp - G) * ((Dp - G) * (L * L - 1.0) - v.dh_m * L * P)))});
    }
    if (two) {
        r.push_back({"vincbranch2a.omega", std::abs(O)});
        r.push_back({"vincbranch2a.lambda", std::min(std::abs(L - P), std::abs(L + P))});
    }
    return r;
}

std::vector<NamedResidual> check_coefficient_identities(const InvariantSet& v) {
    const auto c = cubic_coefficients<cplx>(v.delta_p, v.lambda_p, v.psi, v.omega, v.gamma_p, v.gamma_m);
    return {{"B1", std::abs(c.b1)},
            {"B2", std::abs(c.b2)},
            {"B3", std::abs(c.b3)},
            {"B4", std::abs(c.b4)},
            {"eqGAM", std::abs(v.gamma_m * v.lambda_p - v.psi * (v.gamma_p + v.omega))}};
}

DependentWeights reconstruct_dependent_weights(cplx ap, cplx bp, cplx cp, const InvariantSet& v, int d_sign) {
    const cplx Dp = v.delta_p, L = v.lambda_p, P = v.psi, O = v.omega, G = v.gamma_p;
    const double sc = std::max({std::abs(ap), std::abs(bp), 1e-300});
    const cplx den = (Dp - G) * ap - bp;
    if (std::abs(den) < 1e-13 * sc) throw DegenerateWeightError("(delta_p - gamma_p) a_p - b_p vanishes");
    if (std::abs(L) < 1e-13) throw DegenerateWeightError("lambda_p vanishes");
    const cplx num = (Dp - G + O) * ap - (1.0 + G * O) * bp;
    DependentWeights out{};
    out.a_minus = P * P * (ap + O * bp) * num / (L * L * den);
    out.b_minus = P * num / (L * den) * bp;
    out.c_minus = P * P * num / (L * L * den) * cp;

    cplx rad = (1.0 - Dp * G + G * G) / L;
    // Table values put the radicand on the negative axis for some branches; fold
    // rounding noise in the imaginary part so the root does not jump across the cut.
    if (std::abs(rad.imag()) <= 1e-12 * std::abs(rad)) rad = cplx(rad.real(), 0.0);
    out.d = double(d_sign) * sqrt_principal(rad) * bp * cp / (-den);
    out.f = (ap - G * bp) * bp / den;
    out.g = ap + P / L * out.f - v.dg_p * bp;
    out.h = ap + (out.f - v.dh_p * bp) / P;
    out.h_tilde = ap + P * out.f - v.dht_p * bp;
    return out;
}

cplx conic_residual(cplx x, cplx y, cplx delta_p) {
    const cplx u = x - delta_p / 2.0 * y;
    return u * u - (delta_p * delta_p / 4.0 - 1.0) * y * y - 1.0;
}

std::pair<cplx, cplx> parameterize_conic(cplx lambda, cplx gamma) {
    // sqrt(delta^2/4 - 1) = sinh(gamma) for delta = 2 cosh(gamma)
    const cplx sg = std::sinh(gamma);
    const cplx y = std::sinh(lambda) / sg;
    const cplx x = std::cosh(lambda) + std::cosh(gamma) * y;
    return {x, y};
}

double max_abs(const std::vector<NamedResidual>& r) {
    double m = 0.0;
    for (const auto& x : r) m = std::max(m, x.value);
    return m;
}

}  // namespace vlab
