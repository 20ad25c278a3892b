#include "twistlab/full_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace twistlab {

MixedBasis make_mixed_basis(const Line1DGrid& grid, const std::vector<TransverseMode>& modes,
                            const CouplingData& coupling, int n_modes)
{
    if (n_modes < 2)
        throw std::invalid_argument("mixed basis: at least 2 modes required");
    if (static_cast<int>(modes.size()) < n_modes || coupling.D.rows() < n_modes)
        throw std::invalid_argument("mixed basis: fewer transverse modes available than requested");
    MixedBasis b;
    b.grid = grid;
    for (int n = 0; n < n_modes; ++n)
        b.energies.push_back(modes[static_cast<std::size_t>(n)].energy);
    b.coupling.D = coupling.D.topLeftCorner(n_modes, n_modes);
    b.coupling.G = coupling.G.topLeftCorner(n_modes, n_modes);
    b.coupling.c_omega = coupling.c_omega;
    b.coupling.raw_skew_defect = coupling.raw_skew_defect;
    return b;
}

MixedBasis truncate_basis(const MixedBasis& basis, int m)
{
    if (m < 2 || m > basis.n_modes())
        throw std::invalid_argument("truncate_basis: invalid mode count");
    MixedBasis b = basis;
    b.energies.resize(static_cast<std::size_t>(m));
    b.coupling.D = basis.coupling.D.topLeftCorner(m, m);
    b.coupling.G = basis.coupling.G.topLeftCorner(m, m);
    return b;
}

namespace {

OperatorMatrix assemble(const MixedBasis& basis, const ScaledTwist& twist, bool full)
{
    const Line1DGrid& g = basis.grid;
    check_resolves(g, twist);
    const int M = basis.n_modes();
    const int n = g.unknowns();
    const double eps = twist.epsilon;
    const double k = 1.0 / (g.h * g.h);
    const double cd = 0.5 / g.h;
    const double e1 = basis.energies[0];
    const Matrix& D = basis.coupling.D;
    const Matrix& G = basis.coupling.G;
    const double c_omega = basis.coupling.c_omega;

    std::vector<double> sigma(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        sigma[static_cast<std::size_t>(i)] = twist(g.x_unknown(i));

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n) * M * (3 + 3 * M));
    for (int i = 0; i < n; ++i) {
        const double x = g.x_unknown(i);
        const double si = sigma[static_cast<std::size_t>(i)];
        for (int a = 0; a < M; ++a) {
            const Index r = basis.index(i, a);
            const double shift = (basis.energies[static_cast<std::size_t>(a)] - e1) / (eps * eps);
            double diag = 2.0 * k + x * x / 16.0 + shift;
            if (!full)
                diag += c_omega * si * si;
            t.emplace_back(r, r, diag);
            if (i > 0)
                t.emplace_back(r, basis.index(i - 1, a), -k);
            if (i + 1 < n)
                t.emplace_back(r, basis.index(i + 1, a), -k);
            if (!full)
                continue;
            for (int b = 0; b < M; ++b) {
                if (si != 0.0 && G(a, b) != 0.0)
                    t.emplace_back(r, basis.index(i, b), si * si * G(a, b));
                const double dab = D(a, b);
                if (dab == 0.0)
                    continue;
                // D_ab (C S + S C): row i couples to i+1 with cd (s_{i+1} + s_i), to i-1 with -cd (s_{i-1} + s_i)
                if (i + 1 < n) {
                    const double v = cd * (sigma[static_cast<std::size_t>(i) + 1] + si);
                    if (v != 0.0)
                        t.emplace_back(r, basis.index(i + 1, b), dab * v);
                }
                if (i > 0) {
                    const double v = -cd * (sigma[static_cast<std::size_t>(i) - 1] + si);
                    if (v != 0.0)
                        t.emplace_back(r, basis.index(i - 1, b), dab * v);
                }
            }
        }
    }
    OperatorMatrix op;
    op.matrix.resize(basis.dimension(), basis.dimension());
    op.matrix.setFromTriplets(t.begin(), t.end());
    op.basis = full ? "mixed_full" : "mixed_intermediate";
    op.n_modes = M;
    op.energy_shift = e1 / (eps * eps);
    op.h = g.h;
    return op;
}

}  // namespace

OperatorMatrix assemble_full(const MixedBasis& basis, const ScaledTwist& twist)
{
    return assemble(basis, twist, true);
}

OperatorMatrix assemble_intermediate(const MixedBasis& basis, const ScaledTwist& twist)
{
    return assemble(basis, twist, false);
}

SparseMatrix mode_block(const OperatorMatrix& op, int n, int m)
{
    const int M = op.n_modes;
    const Index rows = op.matrix.rows() / M;
    std::vector<Eigen::Triplet<double>> t;
    for (Index k = 0; k < op.matrix.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it)
            if (it.row() % M == n && it.col() % M == m)
                t.emplace_back(it.row() / M, it.col() / M, it.value());
    SparseMatrix b(rows, rows);
    b.setFromTriplets(t.begin(), t.end());
    return b;
}

SparseMatrix restrict_to_upper_modes(const OperatorMatrix& op)
{
    const int M = op.n_modes;
    const Index rows = op.matrix.rows() / M;
    auto map = [M](Index i) { return (i / M) * (M - 1) + (i % M) - 1; };
    std::vector<Eigen::Triplet<double>> t;
    for (Index k = 0; k < op.matrix.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it)
            if (it.row() % M != 0 && it.col() % M != 0)
                t.emplace_back(map(it.row()), map(it.col()), it.value());
    SparseMatrix b(rows * (M - 1), rows * (M - 1));
    b.setFromTriplets(t.begin(), t.end());
    return b;
}

Eigenpairs lowest_eigenpairs(const OperatorMatrix& op, int k, const SolverOptions& opts)
{
    return lowest_eigenpairs(op.matrix, k, -1.0, opts);
}

FormDifference form_difference_m(const MixedBasis& basis, const ScaledTwist& twist, const Vector& phi,
                                 const Vector& psi)
{
    if (phi.size() != basis.dimension() || psi.size() != basis.dimension())
        throw std::invalid_argument("form_difference_m: state dimension does not match the basis");
    const Line1DGrid& g = basis.grid;
    const int M = basis.n_modes();
    const int n = g.unknowns();
    const double h = g.h;
    const Matrix& D = basis.coupling.D;
    const Matrix& G = basis.coupling.G;
    auto at = [&](const Vector& v, int i, int m) { return (i < 0 || i >= n) ? 0.0 : v[basis.index(i, m)]; };
    auto diff = [&](const Vector& v, int i, int m) { return (at(v, i + 1, m) - at(v, i - 1, m)) / (2.0 * h); };

    FormDifference f;
    for (int i = 0; i < n; ++i) {
        const double s = twist(g.x_unknown(i));
        if (s == 0.0)
            continue;
        double pp = 0.0, tw = 0.0, c1 = 0.0, c2 = 0.0;
        for (int a = 0; a < M; ++a) {
            pp += at(phi, i, a) * at(psi, i, a);
            for (int b = 0; b < M; ++b) {
                tw += at(phi, i, a) * at(psi, i, b) * G(a, b);
                c1 += D(a, b) * diff(phi, i, a) * at(psi, i, b);
                c2 += D(a, b) * at(phi, i, b) * diff(psi, i, a);
            }
        }
        f.potential += h * basis.coupling.c_omega * s * s * pp;
        f.twist += h * s * s * tw;
        f.cross1 += h * s * c1;
        f.cross2 += h * s * c2;
    }
    f.value = f.potential + f.cross1 + f.cross2 - f.twist;
    const SparseMatrix diffm = assemble_intermediate(basis, twist).matrix - assemble_full(basis, twist).matrix;
    f.matrix_value = h * phi.dot(diffm * psi);
    f.identity_defect = std::abs(f.value - f.matrix_value);
    return f;
}

LinearMap embedded_mode1_resolvent(const MixedBasis& basis, const SparseMatrix& one_d, double k2)
{
    auto inv = std::make_shared<const ShiftedInverse>(one_d, -k2);
    const int M = basis.n_modes();
    const int n = basis.grid.unknowns();
    return [inv, M, n](const Vector& x, Vector& y) {
        Vector u(n);
        for (int i = 0; i < n; ++i)
            u[i] = x[static_cast<Index>(i) * M];
        const Vector r = inv->solve(u);
        y = Vector::Zero(x.size());
        for (int i = 0; i < n; ++i)
            y[static_cast<Index>(i) * M] = r[i];
    };
}

LinearMap embedded_dirichlet_resolvent(const MixedBasis& basis, double k2)
{
    const LinearMap r1 = dirichlet_embedded_resolvent(basis.grid, k2);
    const int M = basis.n_modes();
    const int n = basis.grid.unknowns();
    return [r1, M, n](const Vector& x, Vector& y) {
        Vector u(n), r;
        for (int i = 0; i < n; ++i)
            u[i] = x[static_cast<Index>(i) * M];
        r1(u, r);
        y = Vector::Zero(x.size());
        for (int i = 0; i < n; ++i)
            y[static_cast<Index>(i) * M] = r[i];
    };
}

double resolvent_difference_norm(const LinearMap& ra, const LinearMap& rb, Index dim,
                                 const SolverOptions& opts, double* residual)
{
    Vector tmp;
    LinearMap diff = [&](const Vector& x, Vector& y) {
        ra(x, y);
        rb(x, tmp);
        y -= tmp;
    };
    SolverOptions o = opts;
    o.scale_floor = std::max(o.scale_floor, 1.0);
    const NormEstimate est = symmetric_norm(diff, dim, o);
    if (residual)
        *residual = est.residual;
    return est.value;
}

double resolvent_difference_norm(const OperatorMatrix& a, const OperatorMatrix& b, double k2,
                                 const SolverOptions& opts)
{
    if (a.matrix.rows() != b.matrix.rows())
        throw std::invalid_argument("resolvent_difference_norm: operators live in different bases");
    const ShiftedInverse ra(a.matrix, -k2);
    const ShiftedInverse rb(b.matrix, -k2);
    return resolvent_difference_norm(ra.as_map(), rb.as_map(), a.matrix.rows(), opts);
}

double positivity_margin(const OperatorMatrix& op, int samples, std::uint64_t seed)
{
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        const Vector v = seeded_vector(op.matrix.rows(), seed + static_cast<std::uint64_t>(s));
        const double q = v.dot(op.matrix * v) + v.squaredNorm();
        worst = std::min(worst, q / v.squaredNorm());
    }
    return worst;
}

}  // namespace twistlab
