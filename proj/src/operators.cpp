#include "vlab/operators.hpp"

#include <Eigen/Eigenvalues>

#include <complex>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <limits>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

namespace vlab {

namespace {

const cplx I{0.0, 1.0};

using Vec = Eigen::VectorXcd;

}  // namespace

// ---------------------------------------------------------------- LinearOperator

LinearOperator LinearOperator::from_dense(DenseMatrix m) {
    LinearOperator op;
    op.rows_ = std::uint64_t(m.rows());
    op.cols_ = std::uint64_t(m.cols());
    op.dense_ = std::move(m);
    return op;
}

LinearOperator LinearOperator::from_sparse(SparseMatrix m) {
    LinearOperator op;
    op.rows_ = std::uint64_t(m.rows());
    op.cols_ = std::uint64_t(m.cols());
    m.prune(cplx(0.0), 0.0);
    m.makeCompressed();
    op.sparse_ = std::move(m);
    return op;
}

LinearOperator LinearOperator::from_triplets(std::uint64_t rows, std::uint64_t cols, const std::vector<Triplet>& t) {
    std::vector<Eigen::Triplet<cplx, std::int64_t>> et;
    et.reserve(t.size());
    for (const auto& x : t) et.emplace_back(std::int64_t(x.row), std::int64_t(x.col), x.value);
    SparseMatrix m(static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols));
    m.setFromTriplets(et.begin(), et.end());
    return from_sparse(std::move(m));
}

DenseMatrix LinearOperator::to_dense() const {
    if (dense_) return *dense_;
    if (sparse_) return DenseMatrix(*sparse_);
    return DenseMatrix(Eigen::Index(rows_), Eigen::Index(cols_));
}

SparseMatrix LinearOperator::to_sparse() const {
    if (sparse_) return *sparse_;
    SparseMatrix m = dense_ ? dense_->sparseView(cplx(0.0), 0.0) : SparseMatrix(rows_, cols_);
    m.makeCompressed();
    return m;
}

std::vector<Triplet> LinearOperator::triplets() const {
    const SparseMatrix m = to_sparse();
    std::vector<Triplet> out;
    out.reserve(std::size_t(m.nonZeros()));
    for (std::int64_t r = 0; r < m.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(m, r); it; ++it)
            if (it.value() != cplx(0.0)) out.push_back({std::uint64_t(r), std::uint64_t(it.col()), it.value()});
    return out;
}

cplx LinearOperator::at(std::uint64_t r, std::uint64_t c) const {
    if (dense_) return (*dense_)(Eigen::Index(r), Eigen::Index(c));
    if (sparse_) return sparse_->coeff(std::int64_t(r), std::int64_t(c));
    return 0.0;
}

Eigen::VectorXcd LinearOperator::apply(const Eigen::VectorXcd& x) const {
    if (dense_) return (*dense_) * x;
    if (sparse_) return (*sparse_) * x;
    return Eigen::VectorXcd::Zero(Eigen::Index(rows_));
}

double max_abs_diff(const LinearOperator& a, const LinearOperator& b) {
    if (a.is_dense() || b.is_dense()) return (a.to_dense() - b.to_dense()).cwiseAbs().maxCoeff();
    const SparseMatrix d = a.to_sparse() - b.to_sparse();
    double m = 0.0;
    for (std::int64_t k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

// ---------------------------------------------------------------- sectors

std::uint64_t ipow3(int L) {
    std::uint64_t p = 1;
    for (int i = 0; i < L; ++i) p *= 3;
    return p;
}

int config_sz(std::uint64_t config, int L) {
    int sz = 0;
    for (int i = 0; i < L; ++i) {
        sz += 1 - int(config % 3);
        config /= 3;
    }
    return sz;
}

SectorBasis SectorBasis::build(int L, int sz) {
    if (L < 1 || L > 20) throw ConfigError("chain length out of range");
    SectorBasis b;
    b.chain_length = L;
    b.sz_total = sz;
    const std::uint64_t dim = ipow3(L);
    if (dim > sparse_budget_dim()) throw BudgetError("3^L = " + std::to_string(dim) + " exceeds the sector budget");
    b.lookup_.assign(dim, -1);
    for (std::uint64_t s = 0; s < dim; ++s) {
        if (config_sz(s, L) == sz) {
            b.lookup_[s] = std::int32_t(b.states.size());
            b.states.push_back(s);
        }
    }
    return b;
}

std::int64_t SectorBasis::index_of(std::uint64_t config) const {
    if (config >= lookup_.size()) return -1;
    return lookup_[config];
}

// ---------------------------------------------------------------- spin and L-operator

SpinMatrices spin_matrices() {
    SpinMatrices s;
    const double r2 = std::sqrt(2.0);
    s.s_plus = DenseMatrix::Zero(3, 3);
    s.s_plus(0, 1) = r2;
    s.s_plus(1, 2) = r2;
    s.s_minus = s.s_plus.adjoint();
    s.s_z = DenseMatrix::Zero(3, 3);
    s.s_z(0, 0) = 1.0;
    s.s_z(2, 2) = -1.0;
    return s;
}

DenseMatrix l_operator(const WeightSet& w) {
    DenseMatrix m = DenseMatrix::Zero(9, 9);
    // entry (row aux, row quantum, col aux, col quantum); basis +, 0, -
    auto put = [&](int ra, int rq, int ca, int cq, cplx v) { m(ra * 3 + rq, ca * 3 + cq) = v; };
    put(0, 0, 0, 0, w.a_plus);
    put(2, 2, 2, 2, w.a_minus);
    put(1, 1, 1, 1, w.g);
    put(0, 1, 0, 1, w.b_plus);
    put(1, 0, 1, 0, w.b_plus);
    put(1, 2, 1, 2, w.b_minus);
    put(2, 1, 2, 1, w.b_minus);
    put(0, 2, 0, 2, w.f);
    put(2, 0, 2, 0, w.f);
    put(0, 1, 1, 0, w.c_plus);
    put(1, 0, 0, 1, w.c_tilde_plus);
    put(1, 2, 2, 1, w.c_minus);
    put(2, 1, 1, 2, w.c_tilde_minus);
    put(0, 2, 1, 1, w.d);
    put(1, 1, 2, 0, w.d);
    put(1, 1, 0, 2, w.d_tilde);
    put(2, 0, 1, 1, w.d_tilde);
    put(0, 2, 2, 0, w.h);
    put(2, 0, 0, 2, w.h_tilde);
    return m;
}

DenseMatrix permutation9() {
    DenseMatrix p = DenseMatrix::Zero(9, 9);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) p(b * 3 + a, a * 3 + b) = 1.0;
    return p;
}

namespace {

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

DenseMatrix swap23() {
    DenseMatrix p = DenseMatrix::Zero(27, 27);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) p(a * 9 + c * 3 + b, a * 9 + b * 3 + c) = 1.0;
    return p;
}

}  // namespace

DenseMatrix ybe_difference(const DenseMatrix& r, const DenseMatrix& l1, const DenseMatrix& l2) {
    const DenseMatrix id3 = DenseMatrix::Identity(3, 3);
    const DenseMatrix p23 = swap23();
    const DenseMatrix r12 = kron(r, id3);
    const DenseMatrix l13 = p23 * kron(l1, id3) * p23;
    const DenseMatrix l23 = kron(id3, l2);
    return r12 * l13 * l23 - l23 * l13 * r12;
}

double ybe_residual(const DenseMatrix& r, const DenseMatrix& l1, const DenseMatrix& l2) {
    const DenseMatrix id3 = DenseMatrix::Identity(3, 3);
    const DenseMatrix p23 = swap23();
    const DenseMatrix r12 = kron(r, id3);
    const DenseMatrix l13 = p23 * kron(l1, id3) * p23;
    const DenseMatrix l23 = kron(id3, l2);
    const DenseMatrix lhs = r12 * l13 * l23;
    const DenseMatrix rhs = l23 * l13 * r12;
    const double scale = lhs.cwiseAbs().maxCoeff();
    return scale > 0.0 ? (lhs - rhs).cwiseAbs().maxCoeff() / scale : (lhs - rhs).cwiseAbs().maxCoeff();
}

double ybe_residual(BranchId branch, const BranchParams& params, cplx lambda1, cplx lambda2) {
    return ybe_residual(l_operator(make_weights(branch, params, lambda1 - lambda2)),
                        l_operator(make_weights(branch, params, lambda1)),
                        l_operator(make_weights(branch, params, lambda2)));
}

// ---------------------------------------------------------------- budgets

std::uint64_t budget_dim() {
    if (const char* env = std::getenv("VLAB_BUDGET_DIM")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && v > 0) return v;
    }
    return 6561;
}

std::uint64_t sparse_budget_dim() { return std::max<std::uint64_t>(budget_dim(), 531441); }

namespace {

void check_budget(int L, Representation rep) {
    if (L < 2) throw ConfigError("chain length must be at least 2");
    if (L > 20) throw BudgetError("chain length " + std::to_string(L) + " exceeds any budget");
    const std::uint64_t dim = ipow3(L);
    const std::uint64_t cap = rep == Representation::Dense ? budget_dim() : sparse_budget_dim();
    if (dim > cap) {
        throw BudgetError("3^" + std::to_string(L) + " = " + std::to_string(dim) + " exceeds the " +
                          (rep == Representation::Dense ? "dense" : "sparse") + " cap " + std::to_string(cap));
    }
}

LinearOperator finish(std::uint64_t dim, const std::vector<Triplet>& t, Representation rep) {
    LinearOperator sp = LinearOperator::from_triplets(dim, dim, t);
    if (rep == Representation::Dense) return LinearOperator::from_dense(sp.to_dense());
    return sp;
}

struct Move {
    int row_aux, row_q;
    cplx value;
};

// For each column (aux, quantum), the nonzero rows of the L-operator.
std::array<std::vector<Move>, 9> column_moves(const DenseMatrix& l) {
    std::array<std::vector<Move>, 9> cols;
    for (int c = 0; c < 9; ++c)
        for (int r = 0; r < 9; ++r)
            if (l(r, c) != cplx(0.0)) cols[c].push_back({r / 3, r % 3, l(r, c)});
    return cols;
}

// T = tr_aux L_{L-1} ... L_1 L_0: the auxiliary index enters at site 0 and leaves at site L-1.
template <class Emit>
void transfer_column(const std::array<std::vector<Move>, 9>& moves, std::uint64_t in, int L,
                     const std::vector<std::uint64_t>& pow3, Emit&& emit) {
    struct Path {
        int aux;
        std::uint64_t out;
        cplx amp;
    };
    std::vector<Path> cur, nxt;
    for (int a0 = 0; a0 < 3; ++a0) {
        cur.assign(1, {a0, 0, 1.0});
        for (int k = 0; k < L; ++k) {
            const int q = int((in / pow3[L - 1 - k]) % 3);
            nxt.clear();
            for (const auto& p : cur)
                for (const auto& mv : moves[p.aux * 3 + q])
                    nxt.push_back({mv.row_aux, p.out + std::uint64_t(mv.row_q) * pow3[L - 1 - k], p.amp * mv.value});
            std::swap(cur, nxt);
            if (cur.empty()) break;
        }
        for (const auto& p : cur)
            if (p.aux == a0) emit(p.out, p.amp);
    }
}

std::vector<std::uint64_t> powers3(int L) {
    std::vector<std::uint64_t> p(std::size_t(L) + 1, 1);
    for (int i = 1; i <= L; ++i) p[std::size_t(i)] = p[std::size_t(i) - 1] * 3;
    return p;
}

}  // namespace

LinearOperator transfer_matrix(const DenseMatrix& l_op, int L, Representation rep) {
    check_budget(L, rep);
    const auto moves = column_moves(l_op);
    const auto pow3 = powers3(L);
    const std::uint64_t dim = pow3[std::size_t(L)];
    std::vector<Triplet> t;
    for (std::uint64_t in = 0; in < dim; ++in)
        transfer_column(moves, in, L, pow3, [&](std::uint64_t out, cplx v) { t.push_back({out, in, v}); });
    return finish(dim, t, rep);
}

LinearOperator transfer_matrix(const DenseMatrix& l_op, const SectorBasis& sector) {
    const int L = sector.chain_length;
    const auto moves = column_moves(l_op);
    const auto pow3 = powers3(L);
    std::vector<Triplet> t;
    for (std::size_t j = 0; j < sector.size(); ++j) {
        transfer_column(moves, sector.states[j], L, pow3, [&](std::uint64_t out, cplx v) {
            const std::int64_t i = sector.index_of(out);
            if (i < 0) throw std::logic_error("transfer matrix left its charge sector");
            t.push_back({std::uint64_t(i), j, v});
        });
    }
    return LinearOperator::from_triplets(sector.size(), sector.size(), t);
}

LinearOperator transfer_matrix(BranchId branch, const BranchParams& params, cplx lambda, int L, Representation rep) {
    check_budget(L, rep);
    return transfer_matrix(l_operator(make_weights(branch, params, lambda)), L, rep);
}

// ---------------------------------------------------------------- Hamiltonians

Couplings coupling_table(BranchId branch, const BranchParams& p) {
    using std::cosh;
    using std::sinh;
    using std::sqrt;
    const double pi = std::numbers::pi;
    const double r3 = std::sqrt(3.0);
    const double e1 = p.epsilon1, e2 = p.epsilon2, pm = p.d_sign;
    const cplx g = p.gamma;
    const cplx gb = I * (pi / 4.0) * (1.0 - e1);
    Couplings c{};
    switch (branch) {
        case BranchId::B1A: {
            const cplx j1 = pm / (2.0 * sinh(g / 2.0 + gb));
            const cplx j2 = 1.0 / sinh(g) - pm / sinh(g / 2.0 + gb);
            const cplx j3 = -e1 / (4.0 * sinh(g));
            const cplx d1 = (2.0 * cosh(g) + e1) / (2.0 * sinh(g));
            c = {j1, j1, j2, j2, j3, j3, -j2 / 2.0, -j2 / 2.0, j2 / 2.0, j2 / 2.0,
                 0.0, cosh(g) / sinh(g), d1, -d1, 0.0, 0.0};
            break;
        }
        case BranchId::B1B: {
            const cplx g0 = I * pi * e1 / 3.0;
            const cplx r = sinh(g) * sinh(g - g0);
            const cplx sr = sqrt(r);
            const cplx j1 = pm / (2.0 * sr);
            const cplx j2 = r3 * sinh(g - g0 / 2.0) / (2.0 * r) - pm / sr;
            const cplx j3 = -I * r3 * e1 / (8.0 * r);
            const cplx j4 = -1.0 / (2.0 * sinh(g - g0)) + pm / (2.0 * sr);
            const cplx j5 = 1.0 / (2.0 * sinh(g)) - pm / (2.0 * sr);
            c = {j1, j1, j2, j2, j3, j3, j4, j4, j5, j5,
                 sinh(2.0 * g - g0) / (2.0 * r), -r3 * cosh(g + g0 / 2.0) / (4.0 * r * sinh(g - g0)),
                 0.0, 0.0, 0.0, 0.0};
            break;
        }
        case BranchId::B2A: {
            const cplx ch = cosh(1.5 * g + gb);
            const cplx j1 = pm / (2.0 * std::exp(e2 * g) * ch);
            const cplx j2 = 1.0 / sinh(g) + pm * sinh(e2 * g) / ch;
            const cplx j3 = cosh(g / 2.0 + gb) / (4.0 * sinh(g) * ch);
            const cplx j4 = -1.0 / (2.0 * sinh(g)) + pm * std::exp(-e2 * g) / (2.0 * ch);
            const cplx den = 2.0 * (-e1 * sinh(g) + sinh(2.0 * g));
            const cplx d1 = cosh(2.0 * e2 * g) / den;
            const cplx t = std::tanh(2.0 * e2 * g);
            c = {j1, j1, j2, j2, j3, j3, j4, j4, -j4, -j4,
                 0.0, (-3.0 * e1 + 2.0 * cosh(g)) * cosh(g) / (-e1 * sinh(g) + sinh(2.0 * g)),
                 d1, (4.0 * e1 * cosh(g) - cosh(2.0 * e2 * g)) / den, -t * d1, t * d1};
            break;
        }
        case BranchId::B2B: {
            const cplx om = std::exp(I * pi * e2 / 3.0);
            const cplx j1 = -pm * e1 * e2 * om * om / 2.0;
            const cplx j2 = -pm * e1 * e2 / 2.0;
            const cplx j3 = -I * r3 * e1 / 4.0;
            const cplx j4 = -I - pm * e1 * e2 * om * om / 2.0;
            const cplx j5 = -I + pm * e1 * e2 * om * om / 2.0;
            const cplx d1 = -I * r3 * e1 / 4.0;
            c = {j1, j1, j2, j2, j3, j3, j4, j4, j5, j5, 0.0, 0.0, d1, 3.0 * d1, I * e2 * r3 * d1, -I * e2 * r3 * d1};
            break;
        }
        default:
            throw ConfigError("no coupling table for branch " + to_string(branch));
    }
    return c;
}

DenseMatrix two_site_from_couplings(const Couplings& c) {
    const auto s = spin_matrices();
    const DenseMatrix& sp = s.s_plus;
    const DenseMatrix& sm = s.s_minus;
    const DenseMatrix& sz = s.s_z;
    const DenseMatrix id = DenseMatrix::Identity(3, 3);
    const DenseMatrix sz2 = sz * sz;
    DenseMatrix h = c.j1 * kron(sp, sm) + c.j1t * kron(sm, sp);
    h += c.j2 * kron(sp * sz, sm * sz) + c.j2t * kron(sz * sm, sz * sp);
    h += c.j3 * kron(sp * sp, sm * sm) + c.j3t * kron(sm * sm, sp * sp);
    h += c.j4 * kron(sp * sz, sm) + c.j4t * kron(sz * sm, sp);
    h += c.j5 * kron(sp, sm * sz) + c.j5t * kron(sm, sz * sp);
    h += c.h1 * (kron(sz, id) + kron(id, sz)) + c.h2 * (kron(sz2, id) + kron(id, sz2));
    h += c.delta1 * kron(sz, sz) + c.delta2 * kron(sz2, sz2) + c.delta3 * kron(sz2, sz) + c.delta4 * kron(sz, sz2);
    return h;
}

DenseMatrix two_site_from_log_derivative(BranchId branch, const BranchParams& params, double step) {
    auto central = [&](double s) {
        return DenseMatrix((l_operator(make_weights(branch, params, s)) - l_operator(make_weights(branch, params, -s))) /
                           (2.0 * s));
    };
    const DenseMatrix coarse = central(step);
    const DenseMatrix fine = central(step / 2.0);
    const DenseMatrix deriv = (4.0 * fine - coarse) / 3.0;
    return permutation9() * deriv;
}

namespace {

template <class Emit>
void chain_column(const DenseMatrix& h2, cplx j0, std::uint64_t in, int L, const std::vector<std::uint64_t>& pow3,
                  Emit&& emit) {
    for (int i = 0; i < L; ++i) {
        const int j = (i + 1) % L;
        const std::uint64_t pi_ = pow3[L - 1 - i], pj = pow3[L - 1 - j];
        const int qi = int((in / pi_) % 3), qj = int((in / pj) % 3);
        const std::uint64_t base = in - std::uint64_t(qi) * pi_ - std::uint64_t(qj) * pj;
        const int col = qi * 3 + qj;
        for (int row = 0; row < 9; ++row) {
            const cplx v = h2(row, col);
            if (v == cplx(0.0)) continue;
            emit(base + std::uint64_t(row / 3) * pi_ + std::uint64_t(row % 3) * pj, j0 * v);
        }
    }
}

}  // namespace

LinearOperator chain_hamiltonian(const DenseMatrix& two_site, cplx j0, int L, Representation rep) {
    check_budget(L, rep);
    const auto pow3 = powers3(L);
    const std::uint64_t dim = pow3[std::size_t(L)];
    std::vector<Triplet> t;
    for (std::uint64_t in = 0; in < dim; ++in)
        chain_column(two_site, j0, in, L, pow3, [&](std::uint64_t out, cplx v) { t.push_back({out, in, v}); });
    return finish(dim, t, rep);
}

LinearOperator chain_hamiltonian(const DenseMatrix& two_site, cplx j0, const SectorBasis& sector) {
    const int L = sector.chain_length;
    if (L < 2) throw ConfigError("chain length must be at least 2");
    const auto pow3 = powers3(L);
    std::vector<Triplet> t;
    for (std::size_t c = 0; c < sector.size(); ++c) {
        chain_column(two_site, j0, sector.states[c], L, pow3, [&](std::uint64_t out, cplx v) {
            const std::int64_t r = sector.index_of(out);
            if (r < 0) throw std::logic_error("two-site term does not conserve S^z");
            t.push_back({std::uint64_t(r), c, v});
        });
    }
    return LinearOperator::from_triplets(sector.size(), sector.size(), t);
}

LinearOperator hamiltonian_from_couplings(BranchId branch, const BranchParams& params, int L, Representation rep) {
    return chain_hamiltonian(two_site_from_couplings(coupling_table(branch, params)), params.j0, L, rep);
}

LinearOperator hamiltonian_from_log_derivative(BranchId branch, const BranchParams& params, int L,
                                               Representation rep) {
    return chain_hamiltonian(two_site_from_log_derivative(branch, params), params.j0, L, rep);
}

LinearOperator total_sz(int L) {
    check_budget(L, Representation::Sparse);
    const std::uint64_t dim = ipow3(L);
    std::vector<Triplet> t;
    for (std::uint64_t s = 0; s < dim; ++s) {
        const int sz = config_sz(s, L);
        if (sz != 0) t.push_back({s, s, double(sz)});
    }
    return LinearOperator::from_triplets(dim, dim, t);
}

ProjectionResult projected_difference(const LinearOperator& a, const LinearOperator& b, int L) {
    const std::uint64_t dim = ipow3(L);
    if (a.rows() != dim || b.rows() != dim) throw ConfigError("operator dimension does not match chain length");
    const SparseMatrix d = a.to_sparse() - b.to_sparse();

    // The fitted span is diagonal, so only the diagonal enters the least-squares problem.
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(dim), 3);
    Eigen::VectorXcd diag(static_cast<Eigen::Index>(dim));
    for (std::uint64_t s = 0; s < dim; ++s) {
        int sz = 0, sz2 = 0;
        std::uint64_t c = s;
        for (int i = 0; i < L; ++i) {
            const int m = 1 - int(c % 3);
            sz += m;
            sz2 += m * m;
            c /= 3;
        }
        basis(Eigen::Index(s), 0) = 1.0;
        basis(Eigen::Index(s), 1) = sz;
        basis(Eigen::Index(s), 2) = sz2;
        diag(Eigen::Index(s)) = d.coeff(std::int64_t(s), std::int64_t(s));
    }
    const Eigen::MatrixXcd A = basis.cast<cplx>();
    const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(diag);
    const Eigen::VectorXcd rest = diag - A * x;

    ProjectionResult out;
    out.identity_shift = x(0);
    out.sz_shift = x(1);
    out.sz2_shift = x(2);
    out.residual = rest.cwiseAbs().maxCoeff();
    for (std::int64_t k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it)
            if (it.row() != it.col()) out.residual = std::max(out.residual, std::abs(it.value()));
    return out;
}

LinearOperator restrict_to_sector(const LinearOperator& op, const SectorBasis& sector) {
    if (op.rows() != ipow3(sector.chain_length)) throw ConfigError("operator does not act on this chain");
    const SparseMatrix m = op.to_sparse();
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < sector.size(); ++i)
        for (SparseMatrix::InnerIterator it(m, std::int64_t(sector.states[i])); it; ++it) {
            const std::int64_t j = sector.index_of(std::uint64_t(it.col()));
            if (j >= 0) t.push_back({i, std::uint64_t(j), it.value()});
        }
    return LinearOperator::from_triplets(sector.size(), sector.size(), t);
}

// ---------------------------------------------------------------- eigensolvers

namespace {

void sort_by_real(std::vector<std::pair<cplx, double>>& v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.first.real() != b.first.real()) return a.first.real() < b.first.real();
        return a.first.imag() < b.first.imag();
    });
}

Spectrum dense_spectrum(const LinearOperator& op, int k) {
    if (op.rows() > kDenseSectorCap) {
        throw BudgetError("dense eigensolver limited to dimension " + std::to_string(kDenseSectorCap) + ", got " +
                          std::to_string(op.rows()));
    }
    const DenseMatrix a = op.to_dense();
    const lapack_int n = lapack_int(a.rows());
    DenseMatrix work = a;
    Vec w(n);
    DenseMatrix vr(n, n);
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, work.data(), n, w.data(), nullptr, 1,
                                          vr.data(), n);
    if (info != 0) throw NoConvergenceError("zgeev failed with info " + std::to_string(info), 0, -1.0);
    const DenseMatrix res = a * vr - vr * w.asDiagonal();
    std::vector<std::pair<cplx, double>> vals;
    for (lapack_int i = 0; i < n; ++i) vals.push_back({w(i), res.col(i).norm() / vr.col(i).norm()});
    sort_by_real(vals);
    Spectrum s;
    s.method = EigenMethod::Dense;
    const std::size_t count = k > 0 ? std::min<std::size_t>(std::size_t(k), vals.size()) : vals.size();
    for (std::size_t i = 0; i < count; ++i) {
        s.values.push_back(vals[i].first);
        s.residuals.push_back(vals[i].second);
    }
    return s;
}

// Implicitly restarted Arnoldi for the eigenvalue of smallest real part of P A P, where P projects
// out the columns of `locked`. Returns (value, unit vector orthogonal to locked, restarts used).
struct RitzResult {
    cplx value;
    Vec vector;
    int restarts;
    double residual;
};

RitzResult arnoldi_lowest(const SparseMatrix& A, const DenseMatrix& locked, int m, const ArnoldiOptions& opt,
                          std::mt19937_64& rng) {
    const Eigen::Index n = A.rows();
    const Eigen::Index nl = locked.cols();
    const int keep = std::min(m - 2, 12);
    auto project = [&](Vec& w) {
        if (nl == 0) return;
        for (int pass = 0; pass < 2; ++pass) w -= locked * (locked.adjoint() * w);
    };
    auto op = [&](const Vec& x) {
        Vec y = A * x;
        project(y);
        return y;
    };
    auto random_unit = [&]() {
        std::normal_distribution<double> nd;
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
        project(v);
        return Vec(v / v.norm());
    };

    DenseMatrix V = DenseMatrix::Zero(n, m);
    DenseMatrix H = DenseMatrix::Zero(m, m);
    Vec f = Vec::Zero(n);
    V.col(0) = random_unit();

    auto extend = [&](int from) {
        for (int j = from; j < m; ++j) {
            Vec w = op(V.col(j));
            Vec h = V.leftCols(j + 1).adjoint() * w;
            w -= V.leftCols(j + 1) * h;
            const Vec h2 = V.leftCols(j + 1).adjoint() * w;
            w -= V.leftCols(j + 1) * h2;
            h += h2;
            project(w);
            H.block(0, j, j + 1, 1) = h;
            if (j + 1 < m) {
                double beta = w.norm();
                if (beta < 1e-14 * std::max(1.0, h.norm())) {
                    // invariant subspace: continue with a fresh direction
                    Vec r = random_unit();
                    r -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * r);
                    r -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * r);
                    V.col(j + 1) = r / r.norm();
                    H(j + 1, j) = 0.0;
                } else {
                    V.col(j + 1) = w / beta;
                    H(j + 1, j) = beta;
                }
            } else {
                f = w;
            }
        }
    };

    extend(0);
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_restarts; ++it) {
        Eigen::ComplexEigenSolver<DenseMatrix> es(H, true);
        std::vector<int> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), 0);
        const auto& ev = es.eigenvalues();
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (ev(a).real() != ev(b).real()) return ev(a).real() < ev(b).real();
            return ev(a).imag() < ev(b).imag();
        });
        const int w0 = order[0];
        Vec y = es.eigenvectors().col(w0);
        y /= y.norm();
        const cplx theta = ev(w0);
        const double ritz_res = f.norm() * std::abs(y(m - 1));
        best = std::min(best, ritz_res);
        if (ritz_res <= opt.tolerance * std::max(1.0, std::abs(theta))) {
            Vec x = V * y;
            x /= x.norm();
            return {theta, x, it, ritz_res};
        }
        // exact shifts: the unwanted Ritz values
        DenseMatrix Q = DenseMatrix::Identity(m, m);
        DenseMatrix Hs = H;
        for (int s = keep; s < m; ++s) {
            const cplx mu = ev(order[std::size_t(s)]);
            Eigen::HouseholderQR<DenseMatrix> qr(Hs - mu * DenseMatrix::Identity(m, m));
            const DenseMatrix Qj = qr.householderQ();
            Hs = Qj.adjoint() * Hs * Qj;
            Q = Q * Qj;
        }
        const Vec fk = V * Q.col(keep) * Hs(keep, keep - 1) + f * Q(m - 1, keep - 1);
        V.leftCols(keep) = (V * Q.leftCols(keep)).eval();
        H.setZero();
        H.topLeftCorner(keep, keep) = Hs.topLeftCorner(keep, keep);
        const double beta = fk.norm();
        if (beta < 1e-300) {
            Vec r = random_unit();
            r -= V.leftCols(keep) * (V.leftCols(keep).adjoint() * r);
            V.col(keep) = r / r.norm();
            H(keep, keep - 1) = 0.0;
        } else {
            V.col(keep) = fk / beta;
            H(keep, keep - 1) = beta;
        }
        extend(keep);
    }
    throw NoConvergenceError("Arnoldi iteration did not converge", opt.max_restarts, best);
}

Spectrum iterative_spectrum(const LinearOperator& op, int k, const ArnoldiOptions& opt) {
    const SparseMatrix A = op.to_sparse();
    const Eigen::Index n = A.rows();
    if (k <= 0) k = 1;
    int m = opt.krylov_dim > 0 ? opt.krylov_dim : std::max(2 * k + 20, 40);
    if (n <= Eigen::Index(m) + Eigen::Index(k) + 2) {
        // too small for a Krylov space; the dense answer is exact
        Spectrum s = dense_spectrum(op, k);
        return s;
    }
    std::mt19937_64 rng(opt.seed);
    // Partial Schur form built one vector at a time: each new Schur vector is the lowest
    // eigenvector of A compressed to the complement of the previous ones.
    DenseMatrix Qs(n, 0);
    std::vector<cplx> vals;
    int total = 0;
    for (int i = 0; i < k; ++i) {
        const auto r = arnoldi_lowest(A, Qs, m, opt, rng);
        total += r.restarts;
        Qs.conservativeResize(n, Qs.cols() + 1);
        Vec x = r.vector;
        for (int pass = 0; pass < 2; ++pass) x -= Qs.leftCols(i) * (Qs.leftCols(i).adjoint() * x);
        Qs.col(i) = x / x.norm();
        vals.push_back(r.value);
    }
    // Eigenvectors from the small Schur factor T = Q* A Q.
    const DenseMatrix AQ = A * Qs;
    const DenseMatrix T = Qs.adjoint() * AQ;
    Eigen::ComplexEigenSolver<DenseMatrix> es(T, true);
    std::vector<std::pair<cplx, double>> out;
    for (int i = 0; i < k; ++i) {
        const Vec y = es.eigenvectors().col(i);
        const Vec v = Qs * y;
        const cplx mu = es.eigenvalues()(i);
        out.push_back({mu, (A * v - mu * v).norm() / v.norm()});
    }
    sort_by_real(out);
    Spectrum s;
    s.method = EigenMethod::Iterative;
    s.iterations = total;
    for (const auto& [v, r] : out) {
        s.values.push_back(v);
        s.residuals.push_back(r);
    }
    return s;
}

}  // namespace

Spectrum eigenspectrum(const LinearOperator& op, EigenMethod method, int k, const ArnoldiOptions& opt) {
    if (op.rows() != op.cols()) throw ConfigError("eigenspectrum needs a square operator");
    if (method == EigenMethod::Dense) return dense_spectrum(op, k);
    return iterative_spectrum(op, k, opt);
}

Spectrum eigenspectrum(const LinearOperator& op, const SectorBasis& sector, EigenMethod method, int k,
                       const ArnoldiOptions& opt) {
    const LinearOperator block = op.rows() == sector.size() ? op : restrict_to_sector(op, sector);
    return eigenspectrum(block, method, k, opt);
}

// ---------------------------------------------------------------- export

void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows) {
    os << "branch,L,sz_sector,index,re,im,method,residual\n";
    os << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.branch << ',' << r.L << ',' << r.sz_sector << ',' << r.index << ',' << r.value.real() << ','
           << r.value.imag() << ',' << r.method << ',' << r.residual << '\n';
    }
}

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
bool get_le(std::istream& is, T& v) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    std::memcpy(&v, buf, sizeof(T));
    return true;
}

constexpr char kMagic[8] = {'V', 'L', 'A', 'B', '-', 'O', 'P', '1'};

}  // namespace

void write_operator_binary(std::ostream& os, const LinearOperator& op) {
    if (op.rows() > 0xffffffffULL || op.cols() > 0xffffffffULL) throw ConfigError("operator too large to dump");
    os.write(kMagic, 8);
    put_le(os, std::uint32_t(op.rows()));
    put_le(os, std::uint32_t(op.cols()));
    for (const auto& t : op.triplets()) {
        put_le(os, t.row);
        put_le(os, t.col);
        put_le(os, t.value.real());
        put_le(os, t.value.imag());
    }
}

LinearOperator read_operator_binary(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("not a VLAB-OP1 stream");
    std::uint32_t rows = 0, cols = 0;
    if (!get_le(is, rows) || !get_le(is, cols)) throw ConfigError("truncated VLAB-OP1 header");
    std::vector<Triplet> t;
    while (true) {
        Triplet x;
        double re = 0.0, im = 0.0;
        if (!get_le(is, x.row)) break;
        if (!get_le(is, x.col) || !get_le(is, re) || !get_le(is, im)) throw ConfigError("truncated VLAB-OP1 record");
        if (x.row >= rows || x.col >= cols) throw ConfigError("VLAB-OP1 record out of range");
        x.value = cplx(re, im);
        t.push_back(x);
    }
    return LinearOperator::from_triplets(rows, cols, t);
}

}  // namespace vlab
