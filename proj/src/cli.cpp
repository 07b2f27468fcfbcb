#include "vlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "vlab/bethe.hpp"
#include "vlab/errors.hpp"
#include "vlab/operators.hpp"
#include "vlab/relations.hpp"

namespace vlab {

using json = nlohmann::ordered_json;

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform(double lo, double hi) {
    return lo + (hi - lo) * double(next() >> 11) * 0x1.0p-53;
}

cplx parse_gamma(const std::string& s) {
    try {
        std::size_t used = 0;
        const auto comma = s.find(',');
        const double re = std::stod(s.substr(0, comma), &used);
        if (used != s.substr(0, comma).size()) throw std::invalid_argument(s);
        double im = 0.0;
        if (comma != std::string::npos) {
            const std::string rest = s.substr(comma + 1);
            im = std::stod(rest, &used);
            if (used != rest.size()) throw std::invalid_argument(s);
        }
        return {re, im};
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse gamma '" + s + "', expected RE or RE,IM");
    }
}

namespace {

struct Check {
    std::string name;
    bool pass = false;
    double residual = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct Outcome {
    std::vector<Check> checks;
    json extra = json::object();
};

double threshold(const RunConfig& c, double fallback) { return c.tolerance.value_or(fallback); }

Check make_check(std::string name, double residual, double limit, std::string detail = {}) {
    return {std::move(name), residual <= limit, residual, limit, std::move(detail)};
}

unsigned worker_count(const RunConfig& c) {
    if (c.workers > 0) return unsigned(c.workers);
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(0..n-1) over a fixed worker pool; results land by index, so output does not depend on scheduling.
template <class T>
std::vector<T> parallel_map(int n, unsigned workers, const std::function<T(int)>& f) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> next{0};
    auto body = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned w = std::min<unsigned>(workers, unsigned(std::max(n, 1)));
    for (unsigned t = 1; t < w; ++t) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

BranchParams params_of(const RunConfig& c) {
    BranchParams p;
    p.gamma = c.gamma;
    p.epsilon1 = c.epsilon1;
    p.epsilon2 = c.epsilon2;
    p.d_sign = c.d_sign;
    return p;
}

cplx random_lambda(SplitMix64& rng) {
    const double re = rng.uniform(-0.9, 0.9);
    const double im = rng.uniform(-0.9, 0.9);
    return {re, im};
}

// Sample i gets its own stream; PoleError triggers a redraw from that stream.
template <class T>
std::vector<T> sampled(const RunConfig& c, int n, const std::function<T(SplitMix64&)>& f) {
    return parallel_map<T>(n, worker_count(c), [&](int i) {
        SplitMix64 rng(c.seed ^ (0xd1b54a32d192ed03ULL * std::uint64_t(i + 1)));
        for (int attempt = 0; attempt < 50; ++attempt) {
            try {
                return f(rng);
            } catch (const PoleError&) {
            } catch (const DegenerateWeightError&) {
            }
        }
        throw PoleError("no admissible spectral sample after 50 draws");
    });
}

double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::isnan(x) ? INFINITY : x);
    return m;
}

Check verify_ybe(const RunConfig& c, BranchId b) {
    const auto p = params_of(c);
    auto q = p;
    q.gamma += c.gamma_perturb;
    const auto r = sampled<double>(c, c.samples, [&](SplitMix64& rng) {
        const cplx l1 = random_lambda(rng), l2 = random_lambda(rng);
        return ybe_residual(l_operator(make_weights(b, p, l1 - l2)), l_operator(make_weights(b, p, l1)),
                            l_operator(make_weights(b, q, l2)));
    });
    return make_check("ybe", max_of(r), threshold(c, 1e-10), std::to_string(c.samples) + " samples");
}

std::vector<Check> verify_invariants(const RunConfig& c, BranchId b) {
    const auto p = params_of(c);
    const auto ref = reference_invariants(b, p);
    const auto r = sampled<double>(c, c.samples, [&](SplitMix64& rng) {
        const auto inv = compute_invariants(make_weights(b, p, random_lambda(rng)));
        double worst = 0.0;
        for (int i = 0; i < 16; ++i) {
            const cplx x = invariant_by_index(inv, i), y = invariant_by_index(ref, i);
            worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
        }
        return worst;
    });
    std::vector<Check> out;
    out.push_back(make_check("invariants.table", max_of(r), threshold(c, 1e-10)));
    auto all = check_invariant_constraints(ref);
    for (auto& x : check_branch_constraints(ref, b)) all.push_back(x);
    for (auto& x : check_coefficient_identities(ref)) all.push_back(x);
    std::string worst_name;
    double worst = 0.0;
    for (const auto& x : all)
        if (std::abs(x.value) >= worst) {
            worst = std::abs(x.value);
            worst_name = x.name;
        }
    out.push_back(make_check("invariants.constraints", worst, threshold(c, 1e-10),
                             std::to_string(all.size()) + " constraints, largest " + worst_name));
    return out;
}

Check verify_relations(const RunConfig& c, BranchId b) {
    const auto p = params_of(c);
    auto q = p;
    q.gamma += c.gamma_perturb;
    const auto r = sampled<double>(c, c.samples, [&](SplitMix64& rng) {
        const cplx l1 = random_lambda(rng), l2 = random_lambda(rng);
        const auto w1 = make_weights(b, p, l1);
        const auto res = evaluate_relations(make_weights(b, p, l1 - l2), w1, make_weights(b, q, l2), w1.d_tilde / w1.d);
        double worst = 0.0;
        for (const auto& [id, v] : res) worst = std::max(worst, v);
        return worst;
    });
    return make_check("relations", max_of(r), threshold(c, 1e-10),
                      std::to_string(catalog().size()) + " relations x " + std::to_string(c.samples) + " samples");
}

double sparse_max(const SparseMatrix& m) {
    double v = 0.0;
    for (std::int64_t k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

Check verify_commute(const RunConfig& c, BranchId b) {
    const auto p = params_of(c);
    auto q = p;
    q.gamma += c.gamma_perturb;
    const int n = std::min(c.samples, 4);
    const auto r = sampled<double>(c, n, [&](SplitMix64& rng) {
        const SparseMatrix t1 = transfer_matrix(b, p, random_lambda(rng), c.L).to_sparse();
        const SparseMatrix t2 = transfer_matrix(b, q, random_lambda(rng), c.L).to_sparse();
        const SparseMatrix ab = t1 * t2;
        const SparseMatrix ba = t2 * t1;
        return sparse_max(SparseMatrix(ab - ba)) / sparse_max(ab);
    });
    return make_check("commute", max_of(r), threshold(c, 1e-9),
                      "L = " + std::to_string(c.L) + ", " + std::to_string(n) + " pairs");
}

Check verify_hamiltonian(const RunConfig& c, BranchId b) {
    const auto p = params_of(c);
    const auto res = projected_difference(hamiltonian_from_couplings(b, p, c.L),
                                          hamiltonian_from_log_derivative(b, p, c.L), c.L);
    std::ostringstream d;
    d << "L = " << c.L << ", identity shift " << res.identity_shift.real() << (res.identity_shift.imag() < 0 ? "" : "+")
      << res.identity_shift.imag() << "i";
    return make_check("hamiltonian", res.residual, threshold(c, 1e-7), d.str());
}

Outcome cmd_verify(const RunConfig& c) {
    const BranchId b = parse_branch(c.branch);
    static const std::vector<std::string> scopes = {"ybe", "invariants", "relations", "commute", "hamiltonian"};
    std::vector<std::string> chosen;
    if (c.scope == "all")
        chosen = scopes;
    else if (std::find(scopes.begin(), scopes.end(), c.scope) != scopes.end())
        chosen = {c.scope};
    else
        throw ConfigError("unknown scope '" + c.scope + "'");
    if (c.samples < 1) throw ConfigError("samples must be positive");

    Outcome o;
    for (const auto& s : chosen) {
        if (s == "ybe") o.checks.push_back(verify_ybe(c, b));
        if (s == "invariants")
            for (auto& x : verify_invariants(c, b)) o.checks.push_back(x);
        if (s == "relations") o.checks.push_back(verify_relations(c, b));
        if (s == "commute") o.checks.push_back(verify_commute(c, b));
        if (s == "hamiltonian") {
            if (b == BranchId::S1S || b == BranchId::S2S) {
                if (c.scope == "hamiltonian") throw ConfigError("no coupling table for the special branches");
                continue;
            }
            o.checks.push_back(verify_hamiltonian(c, b));
        }
    }
    return o;
}

json polynomial_json(const Polynomial& p) {
    json terms = json::array();
    for (const auto& [m, coef] : p)
        terms.push_back({{"coefficient", coef}, {"psi_power", m.psi_power}, {"factors", m.names}});
    return terms;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw ConfigError("failed writing '" + path + "'");
}

json counts_json(const std::map<int, int>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

Outcome cmd_census(const RunConfig& c) {
    CensusOptions opt;
    if (c.model == "pt")
        opt.model = CensusModel::PTInvariant;
    else if (c.model == "six-vertex")
        opt.model = CensusModel::SixVertex;
    else
        throw ConfigError("unknown model '" + c.model + "', expected pt or six-vertex");
    const auto rep = ybe_census(opt);

    Outcome o;
    o.extra["census"] = {{"model", c.model},
                         {"local_dim", rep.local_dim},
                         {"nonzero_components", rep.nonzero_components},
                         {"counts", counts_json(rep.counts)},
                         {"total", rep.total}};
    if (opt.model == CensusModel::PTInvariant) {
        o.extra["census"]["substituted_counts"] = counts_json(rep.substituted_counts);
        o.extra["census"]["substituted_total"] = rep.substituted_total;
        const std::map<int, int> expect{{2, 6}, {3, 36}, {4, 57}, {5, 24}};
        int mismatch = 0;
        for (int n = 1; n <= 6; ++n) {
            const int got = rep.counts.contains(n) ? rep.counts.at(n) : 0;
            const int want = expect.contains(n) ? expect.at(n) : 0;
            mismatch += std::abs(got - want);
        }
        o.checks.push_back(make_check("census.counts", mismatch, 0.0, "absolute count mismatch over buckets"));
    } else {
        const int three = rep.counts.contains(3) ? rep.counts.at(3) : 0;
        o.checks.push_back(make_check("census.three_term", std::abs(three - 6), 0.0, "six-vertex three-term relations"));
    }
    if (!c.dump.empty()) {
        json entries = json::array();
        for (const auto& e : rep.distinct)
            entries.push_back({{"id", e.id}, {"row", e.row}, {"col", e.col}, {"terms", polynomial_json(e.poly)}});
        write_text(c.dump, entries.dump(1) + "\n");
        o.extra["dump"] = {{"path", c.dump}, {"entries", rep.distinct.size()}};
    }
    return o;
}

Outcome cmd_relations_dump(const RunConfig& c, std::string& data) {
    json entries = json::array();
    for (const auto& r : catalog()) {
        json terms = json::array();
        for (const auto& t : r.terms) {
            json f = json::array();
            for (const auto& s : t.factors) f.push_back(s.name);
            terms.push_back({{"coefficient", t.coefficient}, {"psi_power", t.psi_power}, {"factors", f}});
        }
        entries.push_back({{"id", r.id}, {"group", to_string(r.group)}, {"terms", terms}});
    }
    Outcome o;
    o.extra["relations"] = catalog().size();
    const std::string text = entries.dump(1) + "\n";
    if (!c.dump.empty())
        write_text(c.dump, text);
    else
        data = text;
    o.checks.push_back(make_check("relations.catalog", catalog().empty() ? 1.0 : 0.0, 0.0));
    return o;
}

std::string spectrum_json(const std::vector<SpectrumRow>& rows) {
    json a = json::array();
    for (const auto& r : rows)
        a.push_back({{"branch", r.branch},
                     {"L", r.L},
                     {"sz_sector", r.sz_sector},
                     {"index", r.index},
                     {"re", r.value.real()},
                     {"im", r.value.imag()},
                     {"method", r.method},
                     {"residual", r.residual}});
    return a.dump(1) + "\n";
}

Outcome cmd_spectrum(const RunConfig& c, std::string& data) {
    const BranchId b = parse_branch(c.branch);
    const auto p = params_of(c);
    if (c.L < 2) throw ConfigError("L must be at least 2");
    if (ipow3(c.L) > sparse_budget_dim())
        throw BudgetError("3^" + std::to_string(c.L) + " exceeds the configured budget (VLAB_BUDGET_DIM)");
    DenseMatrix two;
    if (c.hamiltonian == "logderiv")
        two = two_site_from_log_derivative(b, p);
    else if (c.hamiltonian == "couplings")
        two = two_site_from_couplings(coupling_table(b, p));
    else
        throw ConfigError("unknown hamiltonian '" + c.hamiltonian + "'");

    std::vector<int> sectors;
    if (c.sector) {
        if (std::abs(*c.sector) > c.L) throw ConfigError("sector outside [-L, L]");
        sectors = {*c.sector};
    } else {
        for (int s = -c.L; s <= c.L; ++s) sectors.push_back(s);
    }

    std::vector<SpectrumRow> rows;
    double worst = 0.0;
    for (int s : sectors) {
        const auto basis = SectorBasis::build(c.L, s);
        const auto h = chain_hamiltonian(two, p.j0, basis);
        EigenMethod m;
        if (c.method == "dense")
            m = EigenMethod::Dense;
        else if (c.method == "iterative")
            m = EigenMethod::Iterative;
        else if (c.method == "auto")
            m = basis.size() <= kDenseSectorCap ? EigenMethod::Dense : EigenMethod::Iterative;
        else
            throw ConfigError("unknown method '" + c.method + "'");
        int k = c.k;
        if (m == EigenMethod::Iterative) {
            if (k <= 0) k = 6;
            k = std::min<int>(k, int(basis.size()));
        }
        const auto spec = eigenspectrum(h, m, k);
        for (std::size_t i = 0; i < spec.values.size(); ++i) {
            rows.push_back({to_string(b), c.L, s, int(i), spec.values[i],
                            m == EigenMethod::Dense ? "dense" : "iterative", spec.residuals[i]});
            worst = std::max(worst, spec.residuals[i]);
        }
    }
    std::ostringstream os;
    if (c.format == "csv")
        write_spectrum_csv(os, rows);
    else if (c.format == "json")
        os << spectrum_json(rows);
    else
        throw ConfigError("unknown format '" + c.format + "'");
    data = os.str();

    Outcome o;
    o.checks.push_back(make_check("spectrum.residual", worst, threshold(c, 1e-8), std::to_string(rows.size()) + " eigenvalues"));
    double lowest = INFINITY;
    for (const auto& r : rows) lowest = std::min(lowest, r.value.real());
    o.extra["rows"] = rows.size();
    o.extra["lowest_real"] = lowest;
    return o;
}

Outcome cmd_bethe_solve(const RunConfig& c, std::string& data) {
    const auto st = solve_ground_state(c.L, c.epsilon1);
    const double e = energy(st, c.epsilon1);
    double dev = 0.0;
    for (std::size_t j = 0; j < st.roots.size() / 2; ++j)
        dev = std::max(dev, std::abs(st.roots[j].imag() - std::numbers::pi / 3.0));

    std::ostringstream os;
    if (c.format == "csv") {
        write_roots_csv(os, st);
    } else if (c.format == "json") {
        json roots = json::array();
        for (cplx r : st.roots) roots.push_back({r.real(), r.imag()});
        os << json{{"L", st.L}, {"mu", st.mu}, {"q_numbers", st.q_numbers}, {"roots", roots}}.dump(1) << "\n";
    } else {
        throw ConfigError("unknown format '" + c.format + "'");
    }
    data = os.str();

    Outcome o;
    double bae = 0.0;
    for (cplx v : bae_residual(st, c.epsilon1)) bae = std::max(bae, std::abs(v));
    o.checks.push_back(make_check("bethe.residual", st.residual, threshold(c, 1e-8), "ratio form"));
    o.extra["energy"] = e;
    o.extra["energy_per_site"] = e / c.L;
    o.extra["bae_difference_form"] = bae;
    o.extra["max_string_deviation"] = dev;
    return o;
}

Outcome cmd_bethe_dispersion(const RunConfig& c, std::string& data) {
    const auto s = hole_samples(c.samples);
    std::ostringstream os;
    os << std::setprecision(17);
    if (c.format == "csv") {
        os << "mu_hole,energy,momentum,deviation\n";
        for (const auto& x : s)
            os << x.mu_hole << ',' << x.energy << ',' << x.momentum << ',' << x.energy - 2.0 * std::sin(x.momentum)
               << '\n';
    } else if (c.format == "json") {
        json a = json::array();
        for (const auto& x : s) a.push_back({{"mu_hole", x.mu_hole}, {"energy", x.energy}, {"momentum", x.momentum}});
        os << a.dump(1) << "\n";
    } else {
        throw ConfigError("unknown format '" + c.format + "'");
    }
    data = os.str();
    Outcome o;
    o.checks.push_back(make_check("dispersion", dispersion_check(s), threshold(c, 1e-8),
                                  std::to_string(s.size()) + " holes"));
    return o;
}

Outcome cmd_bethe_thermo(const RunConfig& c, std::string& data) {
    const auto ed = ground_energy_density();
    auto sizes = c.sizes;
    std::sort(sizes.begin(), sizes.end());
    const auto per_site = parallel_map<double>(int(sizes.size()), worker_count(c), [&](int i) {
        return energy(solve_ground_state(sizes[i], 1), 1) / sizes[i];
    });
    const double disp = dispersion_check(hole_samples(c.samples));

    json by_l = json::object();
    for (std::size_t i = 0; i < sizes.size(); ++i) by_l[std::to_string(sizes[i])] = per_site[i];
    json report = {{"e_inf_closed", ed.closed_form},
                   {"e_inf_quadrature", ed.quadrature},
                   {"e_per_site_by_L", by_l},
                   {"dispersion_max_dev", disp}};
    data = report.dump(1) + "\n";

    Outcome o;
    o.checks.push_back(make_check("thermo.quadrature", std::abs(ed.quadrature - ed.closed_form), threshold(c, 1e-10)));
    if (!sizes.empty()) {
        o.checks.push_back(make_check("thermo.finite_size", std::abs(per_site.back() - ed.closed_form), 1e-3,
                                      "L = " + std::to_string(sizes.back())));
        int breaks = 0;
        for (std::size_t i = 1; i < sizes.size(); ++i)
            breaks += std::abs(per_site[i] - ed.closed_form) >= std::abs(per_site[i - 1] - ed.closed_form);
        o.checks.push_back(make_check("thermo.monotone", breaks, 0.0, "non-decreasing gaps"));
    }
    o.checks.push_back(make_check("thermo.dispersion", disp, threshold(c, 1e-8)));
    return o;
}

json config_json(const RunConfig& c) {
    json j = {{"branch", c.branch},
              {"eps1", c.epsilon1},
              {"eps2", c.epsilon2},
              {"dsign", c.d_sign},
              {"gamma", {c.gamma.real(), c.gamma.imag()}},
              {"seed", c.seed},
              {"tol", c.tolerance ? json(*c.tolerance) : json(nullptr)},
              {"out", c.out},
              {"format", c.format},
              {"L", c.L},
              {"sector", c.sector ? json(*c.sector) : json(nullptr)},
              {"samples", c.samples},
              {"workers", c.workers},
              {"scope", c.scope},
              {"gamma_perturb", c.gamma_perturb},
              {"model", c.model},
              {"k", c.k},
              {"method", c.method},
              {"hamiltonian", c.hamiltonian},
              {"sizes", c.sizes},
              {"dump", c.dump}};
    return j;
}

int check_sign(int v, const char* what) {
    if (v != 1 && v != -1) throw ConfigError(std::string(what) + " must be +1 or -1");
    return v;
}

// Fills fields from a JSON file where the matching flag was not given on the command line.
void apply_config_file(const std::string& path, RunConfig& c, const CLI::App& sub) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");

    auto given = [&](const std::string& flag) {
        const CLI::Option* o = sub.get_option_no_throw(flag);
        return o != nullptr && o->count() > 0;
    };
    using Setter = std::function<void(const json&)>;
    const std::map<std::string, std::pair<std::string, Setter>> keys = {
        {"branch", {"--branch", [&](const json& v) { c.branch = v.get<std::string>(); }}},
        {"eps1", {"--eps1", [&](const json& v) { c.epsilon1 = v.get<int>(); }}},
        {"eps2", {"--eps2", [&](const json& v) { c.epsilon2 = v.get<int>(); }}},
        {"dsign", {"--dsign", [&](const json& v) { c.d_sign = v.get<int>(); }}},
        {"gamma",
         {"--gamma",
          [&](const json& v) {
              if (v.is_array()) {
                  if (v.size() != 2) throw ConfigError("gamma array needs [re, im]");
                  c.gamma = {v[0].get<double>(), v[1].get<double>()};
              } else if (v.is_number()) {
                  c.gamma = {v.get<double>(), 0.0};
              } else {
                  c.gamma = parse_gamma(v.get<std::string>());
              }
          }}},
        {"seed", {"--seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }}},
        {"tol", {"--tol", [&](const json& v) { c.tolerance = v.get<double>(); }}},
        {"out", {"--out", [&](const json& v) { c.out = v.get<std::string>(); }}},
        {"format", {"--format", [&](const json& v) { c.format = v.get<std::string>(); }}},
        {"L", {"--L", [&](const json& v) { c.L = v.get<int>(); }}},
        {"sector", {"--sector", [&](const json& v) { c.sector = v.get<int>(); }}},
        {"samples", {"--samples", [&](const json& v) { c.samples = v.get<int>(); }}},
        {"workers", {"--workers", [&](const json& v) { c.workers = v.get<int>(); }}},
        {"scope", {"--scope", [&](const json& v) { c.scope = v.get<std::string>(); }}},
        {"gamma_perturb", {"--gamma-perturb", [&](const json& v) { c.gamma_perturb = v.get<double>(); }}},
        {"model", {"--model", [&](const json& v) { c.model = v.get<std::string>(); }}},
        {"k", {"--k", [&](const json& v) { c.k = v.get<int>(); }}},
        {"method", {"--method", [&](const json& v) { c.method = v.get<std::string>(); }}},
        {"hamiltonian", {"--hamiltonian", [&](const json& v) { c.hamiltonian = v.get<std::string>(); }}},
        {"sizes", {"--sizes", [&](const json& v) { c.sizes = v.get<std::vector<int>>(); }}},
        {"dump", {"--dump", [&](const json& v) { c.dump = v.get<std::string>(); }}},
    };
    for (const auto& [k, v] : j.items()) {
        const auto it = keys.find(k);
        if (it == keys.end()) throw ConfigError("unknown config key '" + k + "'");
        if (given(it->second.first)) continue;
        try {
            it->second.second(v);
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + k + "': " + e.what());
        }
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    RunConfig cfg;
    std::string gamma_text, config_path;

    CLI::App app{"Nineteen-vertex model toolkit", "vlab"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    auto common = [&](CLI::App* s) {
        s->add_option("--config", config_path, "JSON config file (flags take precedence)");
        s->add_option("--branch", cfg.branch, "1A|1B|2A|2B|1S|2S");
        s->add_option("--eps1", cfg.epsilon1, "epsilon1 sign");
        s->add_option("--eps2", cfg.epsilon2, "epsilon2 sign");
        s->add_option("--dsign", cfg.d_sign, "sign of the d square root");
        s->add_option("--gamma", gamma_text, "anisotropy RE[,IM]");
        s->add_option("--seed", cfg.seed, "sampling seed");
        s->add_option("--tol", cfg.tolerance, "override every check threshold");
        s->add_option("--out", cfg.out, "output file (data goes to stdout otherwise)");
        s->add_option("--format", cfg.format, "csv|json");
        s->add_option("--workers", cfg.workers, "worker threads (0 = all cores)");
        s->add_option("--L", cfg.L, "chain length");
        s->add_option("--samples", cfg.samples, "sampled points");
    };

    auto* verify = app.add_subcommand("verify", "verification suites");
    common(verify);
    verify->add_option("--scope", cfg.scope, "ybe|invariants|relations|commute|hamiltonian|all");
    verify->add_option("--gamma-perturb", cfg.gamma_perturb, "shift gamma of the second operator");

    auto* census = app.add_subcommand("census", "Yang-Baxter equation census");
    common(census);
    census->add_option("--model", cfg.model, "pt|six-vertex");
    census->add_option("--dump", cfg.dump, "write the distinct equations as JSON");

    auto* spectrum = app.add_subcommand("spectrum", "Hamiltonian spectrum by S^z sector");
    common(spectrum);
    spectrum->add_option("--sector", cfg.sector, "total S^z (all sectors when omitted)");
    spectrum->add_option("--k", cfg.k, "eigenvalues per sector (iterative default 6)");
    spectrum->add_option("--method", cfg.method, "auto|dense|iterative");
    spectrum->add_option("--hamiltonian", cfg.hamiltonian, "logderiv|couplings");

    auto* bethe = app.add_subcommand("bethe", "2B Bethe ansatz");
    bethe->require_subcommand(1);
    auto* solve = bethe->add_subcommand("solve", "ground-state roots");
    auto* thermo = bethe->add_subcommand("thermo", "energy density and finite-size sequence");
    auto* disp = bethe->add_subcommand("dispersion", "hole dispersion");
    for (auto* s : {solve, thermo, disp}) common(s);
    thermo->add_option("--sizes", cfg.sizes, "chain lengths for E(L)/L")->delimiter(',');

    auto* relations = app.add_subcommand("relations", "functional relation catalog");
    common(relations);
    relations->add_option("--dump", cfg.dump, "write the catalog as JSON");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);

    std::string command;
    CLI::App* active = nullptr;
    json envelope;
    int code = kExitPass;
    std::string data;
    try {
        try {
            app.parse(args);
        } catch (const CLI::Success& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            throw ConfigError(e.what());
        }
        for (auto* s : {verify, census, spectrum, relations}) {
            if (s->parsed()) {
                command = s->get_name();
                active = s;
            }
        }
        for (auto* s : {solve, thermo, disp}) {
            if (s->parsed()) {
                command = "bethe " + s->get_name();
                active = s;
            }
        }
        if (!config_path.empty()) apply_config_file(config_path, cfg, *active);
        if (!gamma_text.empty()) cfg.gamma = parse_gamma(gamma_text);
        check_sign(cfg.epsilon1, "eps1");
        check_sign(cfg.epsilon2, "eps2");
        check_sign(cfg.d_sign, "dsign");
        parse_branch(cfg.branch);
        if (cfg.workers < 0) throw ConfigError("workers must be >= 0");

        Outcome o;
        if (active == verify) o = cmd_verify(cfg);
        if (active == census) o = cmd_census(cfg);
        if (active == spectrum) o = cmd_spectrum(cfg, data);
        if (active == relations) o = cmd_relations_dump(cfg, data);
        if (active == solve) o = cmd_bethe_solve(cfg, data);
        if (active == thermo) o = cmd_bethe_thermo(cfg, data);
        if (active == disp) o = cmd_bethe_dispersion(cfg, data);

        json checks = json::array();
        for (const auto& ch : o.checks) {
            checks.push_back({{"name", ch.name},
                              {"pass", ch.pass},
                              {"residual", ch.residual},
                              {"threshold", ch.threshold},
                              {"detail", ch.detail}});
            if (!ch.pass) code = kExitCheckFailed;
        }
        envelope["checks"] = checks;
        if (!o.extra.empty()) envelope["results"] = o.extra;
    } catch (const BudgetError& e) {
        code = kExitBudget;
        envelope["error"] = {{"kind", "budget"}, {"message", e.what()}};
    } catch (const ConfigError& e) {
        code = kExitConfig;
        envelope["error"] = {{"kind", "config"}, {"message", e.what()}};
    } catch (const NoConvergenceError& e) {
        code = kExitCheckFailed;
        envelope["error"] = {{"kind", "no_convergence"}, {"message", e.what()}, {"best_residual", e.best_residual}};
    } catch (const std::exception& e) {
        code = kExitCheckFailed;
        envelope["error"] = {{"kind", "failure"}, {"message", e.what()}};
    }

    bool data_on_stdout = false;
    if (!data.empty()) {
        if (!cfg.out.empty()) {
            try {
                write_text(cfg.out, data);
            } catch (const ConfigError& e) {
                code = kExitConfig;
                envelope["error"] = {{"kind", "config"}, {"message", e.what()}};
            }
        } else {
            out << data;
            data_on_stdout = true;
        }
    }

    json full;
    full["tool"] = "vlab";
    full["version"] = kToolVersion;
    full["command"] = command;
    full["config"] = config_json(cfg);
    full["rng"] = "splitmix64, sample i seeded with seed ^ (0xd1b54a32d192ed03 * (i + 1))";
    full["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& [k, v] : envelope.items()) full[k] = v;
    full["status"] = code == kExitPass ? "pass" : "fail";
    full["exit_code"] = code;
    (data_on_stdout ? err : out) << full.dump(2) << "\n";
    return code;
}

}  // namespace vlab
