#include "vlab/relations.hpp"

#include <boost/rational.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vlab {

namespace {

// One line per relation: label, group, whether to expand the charge variants, then terms.
// In expanded lines S is the charge of the variant and T its opposite.
// A term is [sign] [P|P2] slot slot slot, a slot being a symbol followed by its leg.
constexpr const char* kCatalogSource = R"(
eq9e84 TwoTerm 1 | cS0 cS1 cS2 - cS0 cS1 cS2
eq15e76 TwoTerm 1 | P d0 d1 cS2 - P d0 d1 cS2
eq33e57 TwoTerm 1 | P cS0 d1 d2 - P cS0 d1 d2
eq2e120 G1 1 | bS0 cS1 cS2 + cS0 aS1 bS2 - cS0 bS1 aS2
eq1e88 G1 1 | bS0 cS1 bS2 + cS0 aS1 cS2 - aS0 cS1 aS2
eq8e89 G1 1 | cS0 cS1 bS2 + bS0 aS1 cS2 - aS0 bS1 cS2
eq7e114 G2 1 | d0 bS1 bS2 + f0 d1 cS2 - d0 f1 aS2
eq6e82 G2 1 | f0 d1 bS2 + d0 bS1 cS2 - bS0 d1 aS2
eq22e75 G2 1 | P d0 d1 bT2 + f0 bS1 cT2 - bS0 f1 cT2
eq56e40 G3 1 | bS0 bS1 d2 + cS0 d1 f2 - aS0 f1 d2
eq43e38 G3 1 | cS0 bS1 d2 + bS0 d1 f2 - aS0 d1 bS2
eq95e21 G3 1 | P bS0 d1 d2 + cS0 bT1 f2 - cS0 f1 bT2
eqbranch Branching 0 | P2 d0 c+1 d2 - d0 c+1 d2 - P2 d0 c-1 d2 + d0 c-1 d2
eq14e83 G4 1 | - cS0 cS1 bS2 + P d0 d1 bS2 + g0 bS1 cS2 - bS0 g1 cS2
eq44e71 G4 1 | - bS0 cS1 cS2 + P bS0 d1 d2 - cS0 g1 bS2 + cS0 bS1 g2
eq20e62 G4 1 | - d0 bT1 cS2 + cT0 bS1 d2 - g0 d1 bS2 + bT0 d1 g2
eq80 G5 0 | h0 b-1 b+2 - h0 b+1 b-2 + d0 d1 c+2 - d0 d1 c-2
eq113 G5 0 | b+0 h1 b+2 - b-0 h1 b-2 - c-0 c+1 c-2 + c+0 c-1 c+2
eq99 G5 0 | b+0 b-1 h2 - b-0 b+1 h2 + c+0 d1 d2 - c-0 d1 d2
eq112e81 G5 1 | - d0 d1 bT2 + cS0 cT1 bS2 - h0 bS1 cT2 + bS0 h1 cS2
eq101e111 G5 1 | cS0 h1 bS2 + bS0 cT1 cS2 - bT0 d1 d2 - cT0 bS1 h2
eq94e127 G5 1 | aS0 h1 aS2 - d0 cS1 d2 - f0 h1 f2 - h0 aS1 h2
eq50 G6 0 | ht0 b+1 b-2 - ht0 b-1 b+2 + P2 d0 d1 c-2 - P2 d0 d1 c+2
eq17 G6 0 | b-0 ht1 b-2 - b+0 ht1 b+2 + c-0 c+1 c-2 - c+0 c-1 c+2
eq31 G6 0 | - b+0 b-1 ht2 + b-0 b+1 ht2 + P2 c-0 d1 d2 - P2 c+0 d1 d2
eq49e18 G6 1 | P2 d0 d1 bT2 - cS0 cT1 bS2 - bS0 ht1 cS2 + ht0 bS1 cT2
eq19e29 G6 1 | - cS0 ht1 bS2 - bS0 cT1 cS2 + P2 bT0 d1 d2 + cT0 bS1 ht2
eq3e36 G6 1 | - aS0 ht1 aS2 + f0 ht1 f2 + P2 d0 cS1 d2 + ht0 aS1 ht2
eq25e105 G7 1 | P2 d0 cS1 d2 - d0 cS1 d2 + ht0 h1 ht2 - h0 ht1 h2
eq26e85 G7 1 | P h0 d1 bS2 + d0 bS1 cS2 - P cS0 bS1 d2 - bS0 d1 ht2
eq45e104 G7 1 | - ht0 d1 bS2 - P d0 bS1 cS2 + cS0 bS1 d2 + P bS0 d1 h2
eq28e125 G7 1 | h0 f1 aS2 - h0 aS1 f2 - P d0 cS1 d2 - f0 h1 ht2
eq5e102 G7 1 | - ht0 f1 aS2 + ht0 aS1 f2 + P d0 cS1 d2 + f0 ht1 h2
eq23e39 G7 1 | h0 ht1 f2 + P d0 cS1 d2 + f0 aS1 ht2 - aS0 f1 ht2
eq91e107 G7 1 | - ht0 h1 f2 - P d0 cS1 d2 - f0 aS1 h2 + aS0 f1 h2
eq4e69 G8 1 | - P cS0 d1 aS2 + f0 ht1 d2 + P d0 cS1 g2 + P ht0 aS1 d2
eq61e126 G8 1 | cS0 d1 aS2 - h0 aS1 d2 - d0 cS1 g2 - P f0 h1 d2
eq93e119 G8 1 | aS0 d1 cS2 - g0 cS1 d2 - P d0 h1 f2 - d0 aS1 h2
eq11e37 G8 1 | d0 ht1 f2 - P aS0 d1 cS2 + P g0 cS1 d2 + P d0 aS1 ht2
eq77e34 G8 1 | h0 cT1 f2 - cS0 f1 cT2 + P d0 g1 d2 + f0 cS1 ht2
eq96e53 G8 1 | cS0 f1 cT2 - P d0 g1 d2 - ht0 cT1 f2 - f0 cS1 h2
eqg12e70 FiveTerm 1 | bS0 cS1 bS2 - d0 ht1 d2 - g0 cS1 g2 + cS0 g1 cS2 - P2 d0 aS1 d2
eqg60e118 FiveTerm 1 | bS0 cS1 bS2 - P2 d0 h1 d2 - g0 cS1 g2 + cS0 g1 cS2 - d0 aS1 d2
eqg24e72 FiveTerm 1 | P bS0 bS1 d2 + cS0 d1 ht2 - d0 cS1 g2 - P f0 aS1 d2 - h0 ht1 d2
eqg58e106 FiveTerm 1 | bS0 bS1 d2 + P cS0 d1 h2 - P d0 cS1 g2 - f0 aS1 d2 - P ht0 h1 d2
eqg13e103 FiveTerm 1 | P d0 bS1 bS2 - P d0 aS1 f2 - g0 cS1 d2 - d0 ht1 h2 + ht0 d1 cS2
eqg27e117 FiveTerm 1 | d0 bS1 bS2 - d0 aS1 f2 - P g0 cS1 d2 - P d0 h1 ht2 + P h0 d1 cS2
eqg100e79 FiveTerm 1 | bS0 cT1 bS2 + cS0 h1 cS2 - f0 cT1 f2 - h0 cS1 h2 - d0 g1 d2
eqg30e51 FiveTerm 1 | bT0 cS1 bT2 + cT0 ht1 cT2 - f0 cS1 f2 - ht0 cT1 ht2 - P2 d0 g1 d2
eqg63e52 FiveTerm 1 | P d0 bS1 bT2 + P g0 d1 cT2 - f0 cS1 d2 - P d0 g1 g2 - P ht0 cT1 d2
eqg78e67 FiveTerm 1 | d0 bS1 bT2 + g0 d1 cT2 - P f0 cS1 d2 - d0 g1 g2 - h0 cT1 d2
eqg98e66 FiveTerm 1 | bS0 bT1 d2 - P d0 cT1 f2 + cS0 d1 g2 - g0 g1 d2 - d0 cS1 h2
eqg32e64 FiveTerm 1 | P bT0 bS1 d2 - d0 cS1 f2 + P cT0 d1 g2 - P g0 g1 d2 - P d0 cT1 ht2
)";

RelationGroup parse_group(const std::string& s) {
    static const std::map<std::string, RelationGroup> table = {
        {"TwoTerm", RelationGroup::TwoTerm}, {"G1", RelationGroup::G1}, {"G2", RelationGroup::G2},
        {"G3", RelationGroup::G3},           {"G4", RelationGroup::G4}, {"G5", RelationGroup::G5},
        {"G6", RelationGroup::G6},           {"G7", RelationGroup::G7}, {"G8", RelationGroup::G8},
        {"FiveTerm", RelationGroup::FiveTerm}, {"Branching", RelationGroup::Branching}};
    return table.at(s);
}

std::vector<FunctionalRelation> parse_catalog() {
    std::vector<FunctionalRelation> out;
    std::istringstream in(kCatalogSource);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find('|') == std::string::npos) continue;
        std::istringstream head(line.substr(0, line.find('|')));
        std::string label, group;
        int expand = 0;
        head >> label >> group >> expand;
        const std::string body = line.substr(line.find('|') + 1);
        const std::vector<std::pair<std::string, std::string>> variants =
            expand ? std::vector<std::pair<std::string, std::string>>{{"+", "-"}, {"-", "+"}}
                   : std::vector<std::pair<std::string, std::string>>{{"", ""}};
        for (const auto& [S, T] : variants) {
            FunctionalRelation rel;
            rel.id = label + S;
            rel.group = parse_group(group);
            std::istringstream toks(body);
            std::string tok;
            RelationTerm term;
            int nfac = 0;
            while (toks >> tok) {
                if (tok == "+" || tok == "-") {
                    term.coefficient = tok == "+" ? 1 : -1;
                    continue;
                }
                if (tok == "P" || tok == "P2") {
                    term.psi_power = tok == "P" ? 1 : 2;
                    continue;
                }
                std::string name = tok.substr(0, tok.size() - 1);
                const int leg = tok.back() - '0';
                if (name.size() == 2 && name[1] == 'S') name = name.substr(0, 1) + S;
                if (name.size() == 2 && name[1] == 'T') name = name.substr(0, 1) + T;
                term.factors[leg] = {name, leg};
                if (++nfac == 3) {
                    rel.terms.push_back(term);
                    term = RelationTerm{};
                    nfac = 0;
                }
            }
            if (nfac != 0) throw std::logic_error("catalog line with dangling factors: " + label);
            out.push_back(std::move(rel));
        }
    }
    return out;
}

}  // namespace

std::string to_string(RelationGroup g) {
    switch (g) {
        case RelationGroup::TwoTerm: return "TwoTerm";
        case RelationGroup::G1: return "G1";
        case RelationGroup::G2: return "G2";
        case RelationGroup::G3: return "G3";
        case RelationGroup::G4: return "G4";
        case RelationGroup::G5: return "G5";
        case RelationGroup::G6: return "G6";
        case RelationGroup::G7: return "G7";
        case RelationGroup::G8: return "G8";
        case RelationGroup::FiveTerm: return "FiveTerm";
        case RelationGroup::Branching: return "Branching";
    }
    return "?";
}

cplx slot_value(const WeightSet& w, const std::string& n) {
    if (n == "a+") return w.a_plus;
    if (n == "a-") return w.a_minus;
    if (n == "b+") return w.b_plus;
    if (n == "b-") return w.b_minus;
    if (n == "c+") return w.c_plus;
    if (n == "c-") return w.c_minus;
    if (n == "ct+") return w.c_tilde_plus;
    if (n == "ct-") return w.c_tilde_minus;
    if (n == "d") return w.d;
    if (n == "dt") return w.d_tilde;
    if (n == "f") return w.f;
    if (n == "g") return w.g;
    if (n == "h") return w.h;
    if (n == "ht") return w.h_tilde;
    throw std::invalid_argument("unknown weight symbol " + n);
}

const std::vector<FunctionalRelation>& catalog() {
    static const std::vector<FunctionalRelation> table = parse_catalog();
    return table;
}

double evaluate_relation(const FunctionalRelation& rel, const WeightSet& w0, const WeightSet& w1,
                         const WeightSet& w2, cplx psi) {
    const WeightSet* ws[3] = {&w0, &w1, &w2};
    cplx sum = 0.0;
    double scale = 0.0;
    for (const auto& t : rel.terms) {
        cplx v = double(t.coefficient) * std::pow(psi, t.psi_power);
        for (const auto& s : t.factors) v *= slot_value(*ws[s.leg], s.name);
        sum += v;
        scale = std::max(scale, std::abs(v));
    }
    return scale > 0.0 ? std::abs(sum) / scale : 0.0;
}

std::map<std::string, double> evaluate_relations(const WeightSet& w0, const WeightSet& w1, const WeightSet& w2,
                                                 cplx psi) {
    std::map<std::string, double> out;
    for (const auto& rel : catalog()) out[rel.id] = evaluate_relation(rel, w0, w1, w2, psi);
    return out;
}

Polynomial to_polynomial(const FunctionalRelation& rel) {
    Polynomial p;
    for (const auto& t : rel.terms) {
        Monomial m{{t.factors[0].name, t.factors[1].name, t.factors[2].name}, t.psi_power};
        p[m] += t.coefficient;
    }
    std::erase_if(p, [](const auto& kv) { return kv.second == 0; });
    return p;
}

CanonicalPolynomial canonicalize(const Polynomial& p) {
    CanonicalPolynomial c;
    if (p.empty()) return c;
    const long long first = p.begin()->second;
    for (const auto& [m, v] : p) {
        const boost::rational<long long> r(v, first);
        c.terms.push_back({m, {r.numerator(), r.denominator()}});
    }
    return c;
}

CanonicalPolynomial substituted_class(const Polynomial& p) {
    Polynomial q;
    for (const auto& [m, v] : p) {
        Monomial n = m;
        for (auto& s : n.names) {
            if (s == "ct+") s = "c+";
            else if (s == "ct-") s = "c-";
            else if (s == "dt") {
                s = "d";
                ++n.psi_power;
            }
        }
        q[n] += v;
    }
    std::erase_if(q, [](const auto& kv) { return kv.second == 0; });
    if (q.empty()) return {};
    int low = q.begin()->first.psi_power;
    for (const auto& kv : q) low = std::min(low, kv.first.psi_power);
    Polynomial r;
    for (const auto& [m, v] : q) {
        Monomial n = m;
        n.psi_power -= low;
        r[n] = v;
    }
    return canonicalize(r);
}

namespace {

struct Entry {
    int row_aux, row_q, col_aux, col_q;
    std::string name;
};

// Nonzero entries of the L-operator sum w E_{ik} (x) E_{jl}; basis order +, 0, -.
std::vector<Entry> pt_invariant_entries() {
    return {{0, 0, 0, 0, "a+"}, {0, 1, 0, 1, "b+"}, {1, 0, 1, 0, "b+"}, {0, 2, 0, 2, "f"},
            {2, 0, 2, 0, "f"},  {1, 2, 1, 2, "b-"}, {2, 1, 2, 1, "b-"}, {1, 1, 1, 1, "g"},
            {2, 2, 2, 2, "a-"}, {0, 2, 2, 0, "h"},  {2, 0, 0, 2, "ht"}, {0, 1, 1, 0, "c+"},
            {1, 0, 0, 1, "ct+"}, {1, 2, 2, 1, "c-"}, {2, 1, 1, 2, "ct-"}, {0, 2, 1, 1, "d"},
            {1, 1, 2, 0, "d"},  {1, 1, 0, 2, "dt"}, {2, 0, 1, 1, "dt"}};
}

std::vector<Entry> six_vertex_entries() {
    return {{0, 0, 0, 0, "a"}, {1, 1, 1, 1, "a"}, {0, 1, 0, 1, "b"},
            {1, 0, 1, 0, "b"}, {0, 1, 1, 0, "c"}, {1, 0, 0, 1, "ct"}};
}

char basis_label(int dim, int k) {
    if (dim == 3) return "+0-"[k];
    return "+-"[k];
}

}  // namespace

CensusReport ybe_census(const CensusOptions& options) {
    const bool six = options.model == CensusModel::SixVertex;
    const int n = six ? 2 : 3;
    const auto entries = six ? six_vertex_entries() : pt_invariant_entries();

    // table[row pair][col pair] -> symbol, "" when absent
    std::vector<std::vector<std::string>> M(n * n, std::vector<std::string>(n * n));
    for (const auto& e : entries) {
        if (std::find(options.zeroed.begin(), options.zeroed.end(), e.name) != options.zeroed.end()) continue;
        M[e.row_aux * n + e.row_q][e.col_aux * n + e.col_q] = e.name;
    }
    auto at = [&](int i, int j, int k, int l) -> const std::string& { return M[i * n + j][k * n + l]; };

    CensusReport rep;
    rep.local_dim = n;
    std::map<CanonicalPolynomial, size_t> seen;
    std::map<CanonicalPolynomial, int> substituted;
    for (int a = 0; a < n * n * n; ++a) {
        const int a1 = a / (n * n), a2 = (a / n) % n, a3 = a % n;
        for (int b = 0; b < n * n * n; ++b) {
            const int b1 = b / (n * n), b2 = (b / n) % n, b3 = b % n;
            Polynomial poly;
            // (R12 L13 L23)[a, b]
            for (int x1 = 0; x1 < n; ++x1)
                for (int x2 = 0; x2 < n; ++x2) {
                    const auto& r = at(a1, a2, x1, x2);
                    if (r.empty()) continue;
                    for (int x3 = 0; x3 < n; ++x3) {
                        const auto& l1 = at(x1, a3, b1, x3);
                        if (l1.empty()) continue;
                        const auto& l2 = at(x2, x3, b2, b3);
                        if (l2.empty()) continue;
                        poly[Monomial{{r, l1, l2}, 0}] += 1;
                    }
                }
            // (L23 L13 R12)[a, b]
            for (int x2 = 0; x2 < n; ++x2)
                for (int x3 = 0; x3 < n; ++x3) {
                    const auto& l2 = at(a2, a3, x2, x3);
                    if (l2.empty()) continue;
                    for (int x1 = 0; x1 < n; ++x1) {
                        const auto& l1 = at(a1, x3, x1, b3);
                        if (l1.empty()) continue;
                        const auto& r = at(x1, x2, b1, b2);
                        if (r.empty()) continue;
                        poly[Monomial{{r, l1, l2}, 0}] -= 1;
                    }
                }
            std::erase_if(poly, [](const auto& kv) { return kv.second == 0; });
            if (poly.empty()) continue;

            CensusEquation eq;
            eq.row = a;
            eq.col = b;
            eq.id = std::string("ybe[") + basis_label(n, a1) + basis_label(n, a2) + basis_label(n, a3) + "->" +
                    basis_label(n, b1) + basis_label(n, b2) + basis_label(n, b3) + "]";
            eq.poly = std::move(poly);
            rep.components.push_back(eq);

            const auto key = canonicalize(eq.poly);
            if (seen.emplace(key, rep.distinct.size()).second) {
                rep.distinct.push_back(eq);
                rep.counts[int(eq.poly.size())] += 1;
                if (!six) {
                    const auto sub = substituted_class(eq.poly);
                    if (!sub.terms.empty()) substituted.emplace(sub, int(sub.terms.size()));
                }
            }
        }
    }
    rep.nonzero_components = int(rep.components.size());
    for (const auto& [k, v] : rep.counts) rep.total += v;
    for (const auto& [cls, nterms] : substituted) {
        rep.substituted_counts[nterms] += 1;
        ++rep.substituted_total;
    }
    return rep;
}

}  // namespace vlab
