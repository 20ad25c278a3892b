#pragma once

#include "twistlab/eigensolver.hpp"
#include "twistlab/oscillator.hpp"
#include "twistlab/transverse.hpp"
#include "twistlab/twist.hpp"

#include <vector>

namespace twistlab {

// Tensor basis (1D grid unknowns) x (transverse modes); flat index i * M + n.
struct MixedBasis {
    Line1DGrid grid;
    std::vector<double> energies;
    CouplingData coupling;

    int n_modes() const { return static_cast<int>(energies.size()); }
    Index dimension() const { return static_cast<Index>(grid.unknowns()) * n_modes(); }
    Index index(int i, int n) const { return static_cast<Index>(i) * n_modes() + n; }
};

MixedBasis make_mixed_basis(const Line1DGrid& grid, const std::vector<TransverseMode>& modes,
                            const CouplingData& coupling, int n_modes);

// Keeps the first m modes of a basis.
MixedBasis truncate_basis(const MixedBasis& basis, int m);

OperatorMatrix assemble_full(const MixedBasis& basis, const ScaledTwist& twist);
OperatorMatrix assemble_intermediate(const MixedBasis& basis, const ScaledTwist& twist);

// Principal submatrix on the modes n >= 2.
SparseMatrix restrict_to_upper_modes(const OperatorMatrix& op);

// Mode-n block of a mixed-basis operator.
SparseMatrix mode_block(const OperatorMatrix& op, int n, int m);

Eigenpairs lowest_eigenpairs(const OperatorMatrix& op, int k, const SolverOptions& opts = {});

struct FormDifference {
    double value = 0.0;
    double potential = 0.0;  // (phi, C sigma^2 psi)
    double cross1 = 0.0;     // (d phi, sigma tau psi)
    double cross2 = 0.0;     // (sigma tau phi, d psi)
    double twist = 0.0;      // (tau phi, sigma^2 tau psi)
    double matrix_value = 0.0;  // h phi^T (H0 - H) psi
    double identity_defect = 0.0;
};

// Real arithmetic: all operators are real symmetric.
FormDifference form_difference_m(const MixedBasis& basis, const ScaledTwist& twist, const Vector& phi,
                                 const Vector& psi);

// y = embed((B - k2)^{-1}) applied on mode 1, zero on the other modes.
LinearMap embedded_mode1_resolvent(const MixedBasis& basis, const SparseMatrix& one_d, double k2);
LinearMap embedded_dirichlet_resolvent(const MixedBasis& basis, double k2);

double resolvent_difference_norm(const LinearMap& ra, const LinearMap& rb, Index dim,
                                 const SolverOptions& opts = {}, double* residual = nullptr);
double resolvent_difference_norm(const OperatorMatrix& a, const OperatorMatrix& b, double k2 = -1.0,
                                 const SolverOptions& opts = {});

// min over deterministic random v of v^T (A + 1) v / |v|^2
double positivity_margin(const OperatorMatrix& op, int samples, std::uint64_t seed);

}  // namespace twistlab
