#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "vlab/weights.hpp"

namespace vlab {

enum class RelationGroup { TwoTerm, G1, G2, G3, G4, G5, G6, G7, G8, FiveTerm, Branching };

std::string to_string(RelationGroup g);

// Weight symbols: "a+", "a-", "b+", "b-", "c+", "c-", "ct+", "ct-", "d", "dt", "f", "g", "h", "ht".
// Leg 0 is the R-matrix, legs 1 and 2 the two L-operators.
struct WeightSlot {
    std::string name;
    int leg = 0;
    auto operator<=>(const WeightSlot&) const = default;
};

cplx slot_value(const WeightSet& w, const std::string& name);

struct RelationTerm {
    int coefficient = 1;
    int psi_power = 0;
    std::array<WeightSlot, 3> factors;
};

struct FunctionalRelation {
    std::string id;
    RelationGroup group = RelationGroup::TwoTerm;
    std::vector<RelationTerm> terms;
};

// Every cataloged relation with the +/- variants expanded; c~ = c and d~ = Psi d already applied.
const std::vector<FunctionalRelation>& catalog();

// Residual of each relation divided by its largest term magnitude.
std::map<std::string, double> evaluate_relations(const WeightSet& w0, const WeightSet& w1, const WeightSet& w2,
                                                 cplx psi);

double evaluate_relation(const FunctionalRelation& rel, const WeightSet& w0, const WeightSet& w1,
                         const WeightSet& w2, cplx psi);

// Symbolic polynomial over triple products: key = (names on legs 0,1,2, psi power).
struct Monomial {
    std::array<std::string, 3> names;
    int psi_power = 0;
    auto operator<=>(const Monomial&) const = default;
};

using Polynomial = std::map<Monomial, long long>;

// Canonical form: monomials sorted, coefficients divided by the first one.
struct CanonicalPolynomial {
    std::vector<std::pair<Monomial, std::pair<long long, long long>>> terms;  // (num, den)
    auto operator<=>(const CanonicalPolynomial&) const = default;
};

CanonicalPolynomial canonicalize(const Polynomial& p);

// Replace ct+/- by c+/- and dt by Psi d, drop the common Psi power, canonicalize.
// Returns an empty form when the polynomial vanishes identically.
CanonicalPolynomial substituted_class(const Polynomial& p);

Polynomial to_polynomial(const FunctionalRelation& rel);

enum class CensusModel { PTInvariant, SixVertex };

struct CensusOptions {
    CensusModel model = CensusModel::PTInvariant;
    std::vector<std::string> zeroed;  // symbols set to zero in the ansatz
};

struct CensusEquation {
    std::string id;
    int row = 0;  // a1 a2 a3 in base d
    int col = 0;  // b1 b2 b3 in base d
    Polynomial poly;
};

struct CensusReport {
    std::map<int, int> counts;  // triple products -> distinct equations
    int total = 0;
    std::map<int, int> substituted_counts;  // after c~ = c, d~ = Psi d
    int substituted_total = 0;
    int nonzero_components = 0;
    int local_dim = 3;
    std::vector<CensusEquation> components;  // every nonvanishing component
    std::vector<CensusEquation> distinct;    // one representative per class
};

CensusReport ybe_census(const CensusOptions& options = {});

}  // namespace vlab
