#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vlab/weights.hpp"

namespace vlab {

using DenseMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor, std::int64_t>;

struct Triplet {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    cplx value;
};

enum class Representation { Dense, Sparse };

class LinearOperator {
public:
    LinearOperator() = default;
    static LinearOperator from_dense(DenseMatrix m);
    static LinearOperator from_sparse(SparseMatrix m);
    // Duplicates are summed; explicit zeros are dropped.
    static LinearOperator from_triplets(std::uint64_t rows, std::uint64_t cols, const std::vector<Triplet>& t);

    std::uint64_t rows() const { return rows_; }
    std::uint64_t cols() const { return cols_; }
    bool is_dense() const { return dense_.has_value(); }

    DenseMatrix to_dense() const;
    SparseMatrix to_sparse() const;
    // Sorted row-major, deduplicated, zeros dropped.
    std::vector<Triplet> triplets() const;
    cplx at(std::uint64_t r, std::uint64_t c) const;

    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

private:
    std::uint64_t rows_ = 0, cols_ = 0;
    std::optional<DenseMatrix> dense_;
    std::optional<SparseMatrix> sparse_;
};

// Max-entry magnitude of a - b.
double max_abs_diff(const LinearOperator& a, const LinearOperator& b);

// Configurations are base-3 integers with site 0 as the most significant digit.
// Digit 0, 1, 2 stands for S^z = +1, 0, -1.
struct SectorBasis {
    int chain_length = 0;
    int sz_total = 0;
    std::vector<std::uint64_t> states;

    static SectorBasis build(int L, int sz);
    std::size_t size() const { return states.size(); }
    // Index of a configuration or -1 when it is not in the sector.
    std::int64_t index_of(std::uint64_t config) const;

private:
    std::vector<std::int32_t> lookup_;
};

int config_sz(std::uint64_t config, int L);
std::uint64_t ipow3(int L);

struct SpinMatrices {
    DenseMatrix s_plus, s_minus, s_z;
};
SpinMatrices spin_matrices();

// 9x9 operator on aux (x) quantum, row-major kron with the aux factor first.
DenseMatrix l_operator(const WeightSet& w);
inline DenseMatrix r_matrix(const WeightSet& w) { return l_operator(w); }
DenseMatrix permutation9();

// max |R12 L13 L23 - L23 L13 R12| / max |R12 L13 L23|
double ybe_residual(const DenseMatrix& r, const DenseMatrix& l1, const DenseMatrix& l2);
double ybe_residual(BranchId branch, const BranchParams& params, cplx lambda1, cplx lambda2);
// The three 27x27 operators, exposed for component-level checks.
DenseMatrix ybe_difference(const DenseMatrix& r, const DenseMatrix& l1, const DenseMatrix& l2);

// Dense-dimension cap: 3^8 unless VLAB_BUDGET_DIM is set.
std::uint64_t budget_dim();
// Full-space sparse cap (3^12, or the dense cap when larger).
std::uint64_t sparse_budget_dim();
// Largest sector handed to the dense eigensolver.
inline constexpr std::uint64_t kDenseSectorCap = 4000;

// Periodic transfer matrix, trace over the auxiliary space.
LinearOperator transfer_matrix(BranchId branch, const BranchParams& params, cplx lambda, int L,
                               Representation rep = Representation::Sparse);
LinearOperator transfer_matrix(const DenseMatrix& l_op, int L, Representation rep = Representation::Sparse);
// Restriction to one S^z sector.
LinearOperator transfer_matrix(const DenseMatrix& l_op, const SectorBasis& sector);

// Nearest-neighbour couplings of the two-site Hamiltonian; tilde fields carry the conjugate hopping.
struct Couplings {
    cplx j1, j1t, j2, j2t, j3, j3t, j4, j4t, j5, j5t;
    cplx h1, h2;
    cplx delta1, delta2, delta3, delta4;
};

Couplings coupling_table(BranchId branch, const BranchParams& params);
DenseMatrix two_site_from_couplings(const Couplings& c);
// P * dL/dlambda at 0, central differences with one Richardson level.
DenseMatrix two_site_from_log_derivative(BranchId branch, const BranchParams& params, double step = 1e-4);

// H = j0 * sum_i h_{i,i+1}, periodic.
LinearOperator chain_hamiltonian(const DenseMatrix& two_site, cplx j0, int L,
                                 Representation rep = Representation::Sparse);
LinearOperator chain_hamiltonian(const DenseMatrix& two_site, cplx j0, const SectorBasis& sector);

LinearOperator hamiltonian_from_couplings(BranchId branch, const BranchParams& params, int L,
                                          Representation rep = Representation::Sparse);
LinearOperator hamiltonian_from_log_derivative(BranchId branch, const BranchParams& params, int L,
                                               Representation rep = Representation::Sparse);

// Diagonal operators sum_i S^z_i and sum_i (S^z_i)^2.
LinearOperator total_sz(int L);

struct ProjectionResult {
    double residual = 0.0;  // max entry of (a - b) after removing the fitted span
    cplx identity_shift, sz_shift, sz2_shift;
};
// Least-squares removal of span{1, sum S^z, sum (S^z)^2} from a - b.
ProjectionResult projected_difference(const LinearOperator& a, const LinearOperator& b, int L);

LinearOperator restrict_to_sector(const LinearOperator& op, const SectorBasis& sector);

enum class EigenMethod { Dense, Iterative };

struct ArnoldiOptions {
    int krylov_dim = 0;  // 0 picks max(2k + 20, 40)
    int max_restarts = 500;
    double tolerance = 1e-12;
    std::uint64_t seed = 0x5eed;
};

struct Spectrum {
    std::vector<cplx> values;        // ascending real part
    std::vector<double> residuals;   // ||A v - mu v|| / ||v|| per value
    EigenMethod method = EigenMethod::Dense;
    int iterations = 0;
};

// Dense: all eigenvalues (k ignored when <= 0). Iterative: k eigenvalues of smallest real part.
Spectrum eigenspectrum(const LinearOperator& op, EigenMethod method, int k = 0, const ArnoldiOptions& opt = {});
Spectrum eigenspectrum(const LinearOperator& op, const SectorBasis& sector, EigenMethod method, int k = 0,
                       const ArnoldiOptions& opt = {});

struct SpectrumRow {
    std::string branch;
    int L = 0;
    int sz_sector = 0;
    int index = 0;
    cplx value;
    std::string method;
    double residual = 0.0;
};

void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows);

// 16-byte header "VLAB-OP1" + u32 rows + u32 cols, then (u64 row, u64 col, f64 re, f64 im) records.
void write_operator_binary(std::ostream& os, const LinearOperator& op);
LinearOperator read_operator_binary(std::istream& is);

}  // namespace vlab
