#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace twistlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

// y = op(x); implementations must not alias x and y.
using LinearMap = std::function<void(const Vector& x, Vector& y)>;

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> residuals = {})
        : std::runtime_error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

// Deterministic vector with entries in [-1, 1), identical on every platform.
Vector seeded_vector(Index dim, std::uint64_t seed);

// Sparse LDLT factorization of (a + shift * I).
class ShiftedInverse {
public:
    ShiftedInverse(const SparseMatrix& a, double shift);
    void apply(const Vector& x, Vector& y) const;
    Vector solve(const Vector& x) const;
    Index dim() const { return dim_; }
    LinearMap as_map() const;
    // number of negative pivots = number of eigenvalues of a below -shift
    Index negative_pivots() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    Index dim_ = 0;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_iterations = 400;
    std::uint64_t seed = 0x7457157ULL;
    // Lanczos residuals are compared with tol * max(|theta|, scale_floor)
    double scale_floor = 0.0;
};

struct Eigenpairs {
    Vector values;
    Matrix vectors;
    Vector residuals;  // ||A v - lambda v||
    int iterations = 0;
};

// k smallest eigenpairs of symmetric a by shift-invert block subspace
// iteration; shift must lie strictly below the spectrum, which is certified
// by the inertia of the factorization.
Eigenpairs lowest_eigenpairs(const SparseMatrix& a, int k, double shift,
                             const SolverOptions& opts = {});

Eigenpairs dense_eigenpairs(const Matrix& a);

struct NormEstimate {
    double value = 0.0;
    double largest = 0.0;
    double smallest = 0.0;
    double residual = 0.0;
    int steps = 0;
};

// Spectral norm of a symmetric operator by Lanczos with full
// reorthogonalization. The dominant end of the spectrum must converge and the
// opposite end, widened by its residual, must stay below it.
NormEstimate symmetric_norm(const LinearMap& op, Index dim, const SolverOptions& opts = {});

double symmetry_defect(const SparseMatrix& a);

}  // namespace twistlab
