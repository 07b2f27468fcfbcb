#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "vlab/operators.hpp"

using namespace vlab;

namespace {

const cplx I{0.0, 1.0};
const BranchId kBranches[] = {BranchId::B1A, BranchId::B1B, BranchId::B2A, BranchId::B2B};

std::vector<BranchParams> sign_choices(double gamma) {
    std::vector<BranchParams> out;
    for (int e1 : {1, -1})
        for (int e2 : {1, -1})
            for (int ds : {1, -1}) {
                BranchParams p;
                p.gamma = gamma;
                p.epsilon1 = e1;
                p.epsilon2 = e2;
                p.d_sign = ds;
                out.push_back(p);
            }
    return out;
}

cplx random_lambda(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return {u(rng), u(rng)};
}

double rel_commutator(const DenseMatrix& a, const DenseMatrix& b) {
    const DenseMatrix ab = a * b;
    return (ab - b * a).cwiseAbs().maxCoeff() / ab.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("LinearOperator conversions and triplets") {
    std::vector<Triplet> t = {{2, 1, {1.0, 2.0}}, {0, 0, 3.0}, {2, 1, {0.5, 0.0}}, {1, 2, 0.0}};
    const auto op = LinearOperator::from_triplets(3, 3, t);
    const auto trip = op.triplets();
    REQUIRE(trip.size() == 2);
    CHECK(trip[0].row == 0);
    CHECK(trip[1].row == 2);
    CHECK(trip[1].value == cplx(1.5, 2.0));
    const auto dense = LinearOperator::from_dense(op.to_dense());
    CHECK(max_abs_diff(op, dense) == 0.0);
    CHECK(dense.triplets().size() == 2);

    std::stringstream buf;
    write_operator_binary(buf, op);
    CHECK(buf.str().substr(0, 8) == "VLAB-OP1");
    CHECK(buf.str().size() == 16 + 2 * 32);
    const auto back = read_operator_binary(buf);
    CHECK(back.rows() == 3);
    CHECK(max_abs_diff(back, op) == 0.0);
}

TEST_CASE("sector bases partition the chain") {
    for (int L = 1; L <= 8; ++L) {
        std::uint64_t total = 0;
        for (int sz = -L; sz <= L; ++sz) total += SectorBasis::build(L, sz).size();
        CHECK(total == ipow3(L));
    }
    // central trinomial coefficients
    const std::uint64_t central[] = {1, 1, 3, 7, 19, 51, 141, 393, 1107, 3139, 8953};
    for (int L = 1; L <= 10; ++L) CHECK(SectorBasis::build(L, 0).size() == central[L]);
    const auto s = SectorBasis::build(3, 1);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.index_of(s.states[i]) == std::int64_t(i));
}

TEST_CASE("spin-1 algebra") {
    const auto s = spin_matrices();
    const DenseMatrix c1 = s.s_z * s.s_plus - s.s_plus * s.s_z;
    const DenseMatrix c2 = s.s_z * s.s_minus - s.s_minus * s.s_z;
    const DenseMatrix c3 = s.s_plus * s.s_minus - s.s_minus * s.s_plus;
    CHECK((c1 - s.s_plus).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((c2 + s.s_minus).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((c3 - 2.0 * s.s_z).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("L-operator layout") {
    BranchParams p;
    p.gamma = 0.7;
    CHECK((l_operator(make_weights(BranchId::B1A, p, 0.0)) - permutation9()).cwiseAbs().maxCoeff() < 1e-14);

    const auto w = make_weights(BranchId::B2A, p, {0.3, 0.2});
    const auto m = l_operator(w);
    // ((1,3),(3,1)) and ((3,1),(1,3)) in one-based labels
    CHECK(m(0 * 3 + 2, 2 * 3 + 0) == w.h);
    CHECK(m(2 * 3 + 0, 0 * 3 + 2) == w.h_tilde);
    int nnz = 0;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) nnz += m(i, j) != cplx(0.0);
    CHECK(nnz == 19);

    WeightSet only_a{};
    only_a.a_plus = 2.0;
    const auto r = l_operator(only_a);
    Eigen::ComplexEigenSolver<DenseMatrix> es(r);
    int rank = 0;
    for (int i = 0; i < 9; ++i) rank += std::abs(es.eigenvalues()(i)) > 1e-12;
    CHECK(rank == 1);
}

TEST_CASE("Yang-Baxter residuals") {
    std::mt19937_64 rng(42);
    for (BranchId b : kBranches)
        for (const auto& p : sign_choices(0.65))
            for (int k = 0; k < 20; ++k) {
                const cplx l1 = random_lambda(rng), l2 = random_lambda(rng);
                INFO(to_string(b), " e1=", p.epsilon1, " e2=", p.epsilon2, " ds=", p.d_sign);
                CHECK(ybe_residual(b, p, l1, l2) < 1e-10);
            }
    for (BranchId b : {BranchId::S1S, BranchId::S2S})
        for (int s : {1, -1}) {
            BranchParams p;
            p.epsilon1 = s;
            CHECK(ybe_residual(b, p, {0.3, 0.1}, {-0.2, 0.25}) < 1e-10);
        }

    BranchParams q;
    q.epsilon1 = -1;
    q.epsilon2 = 1;
    CHECK(ybe_residual(BranchId::B2A, q, {0.4, 0.1}, -0.2) < 1e-11);

    BranchParams a;
    a.gamma = 0.8;
    const cplx l1 = {0.3, 0.2}, l2 = {-0.1, 0.4};
    CHECK(ybe_residual(BranchId::B1A, a, l1, l1) < 1e-12);
    BranchParams shifted = a;
    shifted.gamma += 0.05;
    const double broken = ybe_residual(l_operator(make_weights(BranchId::B1A, a, l1 - l2)),
                                       l_operator(make_weights(BranchId::B1A, a, l1)),
                                       l_operator(make_weights(BranchId::B1A, shifted, l2)));
    CHECK(broken > 1e-6);
}

TEST_CASE("transfer matrices commute") {
    std::mt19937_64 rng(5);
    for (BranchId b : kBranches)
        for (const auto& p : sign_choices(0.55)) {
            if (p.epsilon2 < 0 && (b == BranchId::B1A || b == BranchId::B1B)) continue;
            for (int L = 2; L <= 5; ++L) {
                const cplx l1 = random_lambda(rng), l2 = random_lambda(rng);
                const DenseMatrix t1 = transfer_matrix(b, p, l1, L, Representation::Dense).to_dense();
                const DenseMatrix t2 = transfer_matrix(b, p, l2, L, Representation::Dense).to_dense();
                INFO(to_string(b), " L=", L, " e1=", p.epsilon1, " e2=", p.epsilon2, " ds=", p.d_sign);
                CHECK(rel_commutator(t1, t2) < 1e-9);
            }
        }
}

TEST_CASE("transfer matrix structure") {
    BranchParams p;
    p.gamma = 0.7;
    // T(0) of the permutation L-operator is the cyclic shift: the swap at L = 2, whose square is 1
    const DenseMatrix t0 = transfer_matrix(BranchId::B1A, p, 0.0, 2, Representation::Dense).to_dense();
    CHECK((t0 - permutation9()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(t0.trace() - 3.0) < 1e-13);
    CHECK(std::abs((t0 * t0).trace() - 9.0) < 1e-13);

    const auto sz = total_sz(4);
    const auto t = transfer_matrix(BranchId::B2B, p, {0.2, 0.1}, 4, Representation::Sparse);
    for (const auto& e : t.triplets()) CHECK(config_sz(e.row, 4) == config_sz(e.col, 4));
    const SparseMatrix c = t.to_sparse() * sz.to_sparse() - sz.to_sparse() * t.to_sparse();
    double m = 0.0;
    for (std::int64_t k = 0; k < c.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(c, k); it; ++it) m = std::max(m, std::abs(it.value()));
    CHECK(m == 0.0);

    // sector block equals the restriction of the full operator
    const auto sec = SectorBasis::build(4, 0);
    const auto block = transfer_matrix(l_operator(make_weights(BranchId::B2B, p, {0.2, 0.1})), sec);
    CHECK(max_abs_diff(block, restrict_to_sector(t, sec)) < 1e-15);
}

TEST_CASE("budget cap") {
    BranchParams p;
    CHECK_THROWS_AS(transfer_matrix(BranchId::B1A, p, 0.1, 9, Representation::Dense), BudgetError);
    CHECK_THROWS_AS(hamiltonian_from_couplings(BranchId::B1A, p, 20), BudgetError);
}

TEST_CASE("coupling table shapes") {
    BranchParams p;
    p.gamma = 0.9;
    const auto a = coupling_table(BranchId::B1A, p);
    CHECK(std::abs(a.delta2 + a.delta1) < 1e-15);
    CHECK(a.delta3 == cplx(0.0));
    CHECK(a.delta4 == cplx(0.0));
    const auto b = coupling_table(BranchId::B2B, p);
    CHECK(b.h1 == cplx(0.0));
    CHECK(b.h2 == cplx(0.0));
    CHECK(std::abs(b.delta2 - 3.0 * b.delta1) < 1e-15);
    CHECK_THROWS_AS(coupling_table(BranchId::S1S, p), ConfigError);

    const auto h = hamiltonian_from_couplings(BranchId::B1B, p, 2, Representation::Dense).to_dense();
    CHECK(h.rows() == 9);
    const DenseMatrix sz = total_sz(2).to_dense();
    CHECK((h * sz - sz * h).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("coupling table agrees with the log-derivative generator") {
    for (BranchId b : kBranches)
        for (const auto& p : sign_choices(0.7))
            for (int L : {3, 4}) {
                const auto hc = hamiltonian_from_couplings(b, p, L);
                const auto hl = hamiltonian_from_log_derivative(b, p, L);
                const auto r = projected_difference(hl, hc, L);
                INFO(to_string(b), " L=", L, " e1=", p.epsilon1, " e2=", p.epsilon2, " ds=", p.d_sign);
                CHECK(r.residual < 1e-7);
            }
}

TEST_CASE("Richardson step refinement") {
    BranchParams p;
    p.gamma = 0.7;
    const auto exact = two_site_from_couplings(coupling_table(BranchId::B1A, p));
    // compare the off-diagonal parts, which carry no chemical-potential ambiguity
    auto offdiag_err = [&](double step) {
        DenseMatrix d = two_site_from_log_derivative(BranchId::B1A, p, step) - exact;
        d.diagonal().setZero();
        return d.cwiseAbs().maxCoeff();
    };
    const double e1 = offdiag_err(0.02), e2 = offdiag_err(0.01);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("transfer matrix commutes with the chain Hamiltonian") {
    std::mt19937_64 rng(9);
    for (BranchId b : kBranches) {
        BranchParams p;
        p.gamma = 0.6;
        const DenseMatrix h = hamiltonian_from_log_derivative(b, p, 4, Representation::Dense).to_dense();
        const DenseMatrix t = transfer_matrix(b, p, random_lambda(rng), 4, Representation::Dense).to_dense();
        INFO(to_string(b));
        CHECK((h * t - t * h).cwiseAbs().maxCoeff() / (h * t).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("hermiticity and reality") {
    BranchParams p;
    p.gamma = 0.8;
    p.j0 = 1.0;
    const DenseMatrix h = hamiltonian_from_log_derivative(BranchId::B1A, p, 4, Representation::Dense).to_dense();
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-9);

    BranchParams q;
    q.epsilon1 = 1;
    for (int L : {4, 5, 6}) {
        const auto hb = hamiltonian_from_log_derivative(BranchId::B2B, q, L);
        for (int sz = 0; sz <= 2; ++sz) {
            const auto sec = SectorBasis::build(L, sz);
            const auto spec = eigenspectrum(chain_hamiltonian(two_site_from_log_derivative(BranchId::B2B, q), q.j0, sec),
                                            EigenMethod::Dense);
            double im = 0.0;
            for (auto v : spec.values) im = std::max(im, std::abs(v.imag()));
            INFO("L=", L, " sz=", sz);
            CHECK(im < 1e-7);
        }
        CHECK((hb.to_dense() - hb.to_dense().adjoint()).cwiseAbs().maxCoeff() > 1e-3);
    }
}

TEST_CASE("eigenspectrum") {
    const auto id = LinearOperator::from_dense(DenseMatrix::Identity(7, 7));
    for (auto v : eigenspectrum(id, EigenMethod::Dense).values) CHECK(std::abs(v - 1.0) < 1e-14);

    BranchParams q;
    const auto sec = SectorBasis::build(4, 0);
    const auto h4 = chain_hamiltonian(two_site_from_log_derivative(BranchId::B2B, q), q.j0, sec);
    CHECK(std::abs(eigenspectrum(h4, EigenMethod::Dense).values.front() - (-2.1831366416)) < 1e-9);
    // the coupling table omits a constant sqrt(3) per site
    const auto h4c = chain_hamiltonian(two_site_from_couplings(coupling_table(BranchId::B2B, q)), q.j0, sec);
    CHECK(std::abs(eigenspectrum(h4c, EigenMethod::Dense).values.front() - (-2.1831366416 - 4.0 * std::sqrt(3.0))) <
          1e-9);

    const auto sec6 = SectorBasis::build(6, 0);
    const auto h6 = chain_hamiltonian(two_site_from_couplings(coupling_table(BranchId::B2B, q)), q.j0, sec6);
    const auto dense = eigenspectrum(h6, EigenMethod::Dense, 3);
    const auto iter = eigenspectrum(h6, EigenMethod::Iterative, 3);
    REQUIRE(iter.values.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(dense.values[i].real() - iter.values[i].real()) < 1e-8);
        CHECK(iter.residuals[i] < 1e-8);
    }
    // sorted by real part
    for (std::size_t i = 1; i < dense.values.size(); ++i) CHECK(dense.values[i - 1].real() <= dense.values[i].real());
}

TEST_CASE("spectrum CSV") {
    std::ostringstream os;
    write_spectrum_csv(os, {{"2B", 4, 0, 0, {-2.5, 0.0}, "dense", 1e-14}});
    const std::string s = os.str();
    CHECK(s.rfind("branch,L,sz_sector,index,re,im,method,residual\n", 0) == 0);
    CHECK(s.find("2B,4,0,0,-2.5,0,dense,") != std::string::npos);
    CHECK(s.find('\r') == std::string::npos);
}

namespace {

// Distance between two spectra after removing their mean and rms and the best global phase.
double affine_distance(std::vector<cplx> a, std::vector<cplx> b) {
    auto normalize = [](std::vector<cplx>& v) {
        cplx m = 0.0;
        for (auto x : v) m += x;
        m /= double(v.size());
        double r = 0.0;
        for (auto& x : v) {
            x -= m;
            r += std::norm(x);
        }
        r = std::sqrt(r / double(v.size()));
        for (auto& x : v) x /= r;
    };
    normalize(a);
    normalize(b);
    double best = 1e300;
    for (int k = 0; k < 720; ++k) {
        const cplx ph = std::polar(1.0, std::numbers::pi * k / 360.0);
        std::vector<cplx> rest = b;
        double worst = 0.0;
        for (auto x : a) {
            auto it = std::min_element(rest.begin(), rest.end(), [&](cplx u, cplx v) {
                return std::abs(ph * x - u) < std::abs(ph * x - v);
            });
            worst = std::max(worst, std::abs(ph * x - *it));
            rest.erase(it);
        }
        best = std::min(best, worst);
    }
    return best;
}

}  // namespace

TEST_CASE("1A with epsilon1 = -1 against epsilon1 = +1 (reported)") {
    // eps1 = -1 at gamma + i pi compared with eps1 = +1 at gamma, up to an affine map of the spectrum.
    for (int L : {2, 3, 4, 5}) {
        BranchParams p, m;
        p.gamma = 0.7;
        m.gamma = cplx(0.7, std::numbers::pi);
        m.epsilon1 = -1;
        const auto a = eigenspectrum(hamiltonian_from_log_derivative(BranchId::B1A, p, L), EigenMethod::Dense).values;
        const auto b = eigenspectrum(hamiltonian_from_log_derivative(BranchId::B1A, m, L), EigenMethod::Dense).values;
        MESSAGE("1A spectra eps1 = +1 (gamma) vs -1 (gamma + i pi), L = ", L, ": affine distance ",
                affine_distance(a, b));
    }
}
