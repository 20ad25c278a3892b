#include "twistlab/oscillator.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_gamma.h>
#include <gsl/gsl_sf_hyperg.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace twistlab {

double hermite_function(int n, double x)
{
    // normalized Hermite functions phi_n(y) in y = x/2, then psi_n(x) = phi_n(x/2) / sqrt(2)
    const double y = 0.5 * x;
    double prev = 0.0;
    double cur = std::pow(M_PI, -0.25) * std::exp(-0.5 * y * y);
    for (int k = 0; k < n; ++k) {
        const double next = std::sqrt(2.0 / (k + 1)) * y * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
        prev = cur;
        cur = next;
    }
    return cur / std::sqrt(2.0);
}

Line1DGrid make_line_grid(double half_width, int n_points)
{
    if (!(half_width > 0.0) || !std::isfinite(half_width))
        throw GridError("line grid: half width must be positive");
    if (n_points < 5)
        throw GridError("line grid: at least 5 points required");
    if (n_points % 2 == 0)
        throw GridError("line grid: the point count must be odd so that x = 0 is a node");
    Line1DGrid g;
    g.half_width = half_width;
    g.n_points = n_points;
    g.h = 2.0 * half_width / (n_points - 1);
    g.nodes.resize(static_cast<std::size_t>(n_points));
    const int c = (n_points - 1) / 2;
    for (int i = 0; i < n_points; ++i)
        g.nodes[static_cast<std::size_t>(i)] = (i - c) * g.h;
    return g;
}

int min_points_for_support(double half_width, double support_width, int min_intervals)
{
    const double intervals = 2.0 * half_width * min_intervals / support_width;
    int n = static_cast<int>(std::ceil(intervals - 1e-9)) + 1;
    if (n % 2 == 0)
        ++n;
    return std::max(n, 5);
}

void check_resolves(const Line1DGrid& grid, const ScaledTwist& twist, int min_intervals)
{
    if (twist.profile.is_zero())
        return;
    const double width = twist.support_width();
    if (width / grid.h < min_intervals * (1.0 - 1e-9)) {
        const int need = min_points_for_support(grid.half_width, width, min_intervals);
        std::ostringstream msg;
        msg << "grid does not resolve the twist support of width " << width << " at epsilon "
            << twist.epsilon << ": n_points must be at least " << need;
        throw GridError(msg.str(), need);
    }
    if (twist.support_lo() <= -grid.half_width || twist.support_hi() >= grid.half_width)
        throw GridError("grid does not contain the twist support");
}

SparseMatrix centered_difference(const Line1DGrid& g)
{
    const int n = g.unknowns();
    std::vector<Eigen::Triplet<double>> t;
    const double c = 0.5 / g.h;
    for (int i = 0; i < n; ++i) {
        if (i > 0)
            t.emplace_back(i, i - 1, -c);
        if (i + 1 < n)
            t.emplace_back(i, i + 1, c);
    }
    SparseMatrix d(n, n);
    d.setFromTriplets(t.begin(), t.end());
    return d;
}

namespace {

SparseMatrix tridiagonal(const Line1DGrid& g, const std::vector<double>& potential)
{
    const int n = g.unknowns();
    const double k = 1.0 / (g.h * g.h);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(3 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (i > 0)
            t.emplace_back(i, i - 1, -k);
        t.emplace_back(i, i, 2.0 * k + potential[static_cast<std::size_t>(i)]);
        if (i + 1 < n)
            t.emplace_back(i, i + 1, -k);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

std::vector<double> harmonic_potential(const Line1DGrid& g)
{
    std::vector<double> v(static_cast<std::size_t>(g.unknowns()));
    for (int i = 0; i < g.unknowns(); ++i) {
        const double x = g.x_unknown(i);
        v[static_cast<std::size_t>(i)] = x * x / 16.0;
    }
    return v;
}

SparseMatrix remove_index(const SparseMatrix& a, int drop)
{
    const Index n = a.rows();
    std::vector<Eigen::Triplet<double>> t;
    for (Index k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
            if (it.row() == drop || it.col() == drop)
                continue;
            const Index r = it.row() > drop ? it.row() - 1 : it.row();
            const Index c = it.col() > drop ? it.col() - 1 : it.col();
            t.emplace_back(r, c, it.value());
        }
    SparseMatrix b(n - 1, n - 1);
    b.setFromTriplets(t.begin(), t.end());
    return b;
}

}  // namespace

OperatorMatrix assemble_h0(const Line1DGrid& g)
{
    OperatorMatrix op;
    op.matrix = tridiagonal(g, harmonic_potential(g));
    op.basis = "grid1d";
    op.h = g.h;
    return op;
}

OperatorMatrix assemble_h0_dirichlet(const Line1DGrid& g)
{
    if (g.n_points % 2 == 0 || std::abs(g.nodes[static_cast<std::size_t>(g.zero_node())]) > 0.0)
        throw GridError("Dirichlet oscillator: the grid has no node at x = 0");
    OperatorMatrix op = assemble_h0(g);
    op.matrix = remove_index(op.matrix, g.zero_unknown());
    op.basis = "grid1d_dirichlet0";
    return op;
}

OperatorMatrix assemble_h_eps(const Line1DGrid& g, double c_omega, const ScaledTwist& twist)
{
    check_resolves(g, twist);
    std::vector<double> v = harmonic_potential(g);
    for (int i = 0; i < g.unknowns(); ++i) {
        const double s = twist(g.x_unknown(i));
        v[static_cast<std::size_t>(i)] += c_omega * s * s;
    }
    OperatorMatrix op;
    op.matrix = tridiagonal(g, v);
    op.basis = "grid1d";
    op.h = g.h;
    return op;
}

OscillatorEigensystem oscillator_spectrum(const OperatorMatrix& op, int count, const SolverOptions& opts)
{
    Eigenpairs ep = lowest_eigenpairs(op.matrix, count, -1.0, opts);
    OscillatorEigensystem sys;
    sys.eigenvalues = ep.values;
    sys.residuals = ep.residuals;
    sys.eigenfunctions = ep.vectors / std::sqrt(op.h);
    for (Index j = 0; j < sys.eigenfunctions.cols(); ++j) {
        auto col = sys.eigenfunctions.col(j);
        // first significant lobe positive
        const double peak = col.cwiseAbs().maxCoeff();
        for (Index i = 0; i < col.size(); ++i)
            if (std::abs(col[i]) > 1e-3 * peak) {
                if (col[i] < 0.0)
                    col = -col;
                break;
            }
    }
    return sys;
}

ExtrapolatedSpectrum extrapolated_spectrum(double half_width, int n_points, int count, bool dirichlet)
{
    ExtrapolatedSpectrum s;
    const Line1DGrid coarse = make_line_grid(half_width, n_points);
    const Line1DGrid fine = make_line_grid(half_width, 2 * n_points - 1);
    auto build = [&](const Line1DGrid& g) { return dirichlet ? assemble_h0_dirichlet(g) : assemble_h0(g); };
    s.coarse = oscillator_spectrum(build(coarse), count).eigenvalues;
    s.fine = oscillator_spectrum(build(fine), count).eigenvalues;
    s.extrapolated = (4.0 * s.fine - s.coarse) / 3.0;
    return s;
}

int sign_changes(const Vector& v, double rel_threshold)
{
    const double thr = rel_threshold * v.cwiseAbs().maxCoeff();
    int changes = 0;
    int last = 0;
    for (Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) <= thr)
            continue;
        const int s = v[i] > 0.0 ? 1 : -1;
        if (last != 0 && s != last)
            ++changes;
        last = s;
    }
    return changes;
}

GreenKernel GreenKernel::for_h0(const Line1DGrid& grid, double k2)
{
    GreenKernel g;
    g.tag_ = GreenTag::h0;
    g.k2_ = k2;
    g.grid_ = std::make_shared<const Line1DGrid>(grid);
    g.inverse_ = std::make_shared<const ShiftedInverse>(assemble_h0(grid).matrix, -k2);
    return g;
}

Vector GreenKernel::raw_column(int j) const
{
    const Line1DGrid& g = *grid_;
    Vector col = Vector::Zero(g.n_points);
    if (j <= 0 || j >= g.n_points - 1)
        return col;
    Vector e = Vector::Zero(g.unknowns());
    e[j - 1] = 1.0 / g.h;
    col.segment(1, g.unknowns()) = inverse_->solve(e);
    return col;
}

Vector GreenKernel::column(int j) const
{
    Vector col = raw_column(j);
    if (tag_ == GreenTag::h0_dirichlet) {
        col -= krein_constant_ * (*zero_column_)[j] * (*zero_column_);
    }
    return col;
}

double GreenKernel::operator()(int i, int j) const { return column(j)[i]; }

GreenKernel dirichlet_green_kernel(const GreenKernel& g)
{
    if (g.tag_ != GreenTag::h0)
        throw std::invalid_argument("dirichlet_green_kernel: input must be the h0 kernel");
    GreenKernel d = g;
    const int z = g.grid_->zero_node();
    auto zc = std::make_shared<Vector>(g.raw_column(z));
    const double r00 = (*zc)[z];
    if (std::abs(r00) < 1e-12)
        throw SolverError("dirichlet_green_kernel: R(0,0) vanishes, the Krein denominator is singular");
    d.tag_ = GreenTag::h0_dirichlet;
    d.zero_column_ = zc;
    d.krein_constant_ = 1.0 / r00;
    return d;
}

double spectral_green_h0(double x, double y, double k2, int N)
{
    double s = 0.0;
    for (int n = 0; n < N; ++n)
        s += hermite_function(n, x) * hermite_function(n, y) / (oscillator_eigenvalue(n) - k2);
    return s;
}

namespace {

struct GslGuard {
    gsl_error_handler_t* old;
    GslGuard() : old(gsl_set_error_handler_off()) {}
    ~GslGuard() { gsl_set_error_handler(old); }
};

double checked(int status, const gsl_sf_result& r, const char* what)
{
    if (status != GSL_SUCCESS)
        throw SolverError(std::string("continuum Green function: ") + what + " failed: " + gsl_strerror(status));
    return r.val;
}

// Parabolic cylinder function U(a, z)
double pcf_u(double a, double z)
{
    GslGuard guard;
    gsl_sf_result r;
    if (z >= 0.0) {
        const double u = checked(gsl_sf_hyperg_U_e(0.5 * a + 0.25, 0.5, 0.5 * z * z, &r), r, "U");
        return std::pow(2.0, -0.25 - 0.5 * a) * std::exp(-0.25 * z * z) * u;
    }
    const double g34 = checked(gsl_sf_gamma_e(0.75 + 0.5 * a, &r), r, "gamma");
    const double g14 = checked(gsl_sf_gamma_e(0.25 + 0.5 * a, &r), r, "gamma");
    const double u0 = std::sqrt(M_PI) / (std::pow(2.0, 0.5 * a + 0.25) * g34);
    const double du0 = -std::sqrt(M_PI) / (std::pow(2.0, 0.5 * a - 0.25) * g14);
    const double e = std::exp(-0.25 * z * z);
    const double m1 = checked(gsl_sf_hyperg_1F1_e(0.5 * a + 0.25, 0.5, 0.5 * z * z, &r), r, "1F1");
    const double m2 = checked(gsl_sf_hyperg_1F1_e(0.5 * a + 0.75, 1.5, 0.5 * z * z, &r), r, "1F1");
    return u0 * e * m1 + du0 * z * e * m2;
}

}  // namespace

double continuum_green_h0(double x, double y, double k2)
{
    // -u'' + (x^2/16 - k2) u = 0 is Weber's equation in z = x / sqrt(2) with a = -2 k2
    const double a = -2.0 * k2;
    GslGuard guard;
    gsl_sf_result r;
    const double g34 = checked(gsl_sf_gamma_e(0.75 + 0.5 * a, &r), r, "gamma");
    const double g14 = checked(gsl_sf_gamma_e(0.25 + 0.5 * a, &r), r, "gamma");
    const double u0 = std::sqrt(M_PI) / (std::pow(2.0, 0.5 * a + 0.25) * g34);
    const double du0 = -std::sqrt(M_PI) / (std::pow(2.0, 0.5 * a - 0.25) * g14);
    // u_plus(x) = U(a, x/sqrt2), u_minus(x) = u_plus(-x); Wronskian sqrt(2) u0 du0
    const double wronskian = std::sqrt(2.0) * u0 * du0;
    const double lo = std::min(x, y), hi = std::max(x, y);
    const double s = 1.0 / std::sqrt(2.0);
    return pcf_u(a, -lo * s) * pcf_u(a, hi * s) / (-wronskian);
}

LinearMap dirichlet_embedded_resolvent(const Line1DGrid& grid, double k2)
{
    auto inv = std::make_shared<const ShiftedInverse>(assemble_h0_dirichlet(grid).matrix, -k2);
    const int z = grid.zero_unknown();
    const int n = grid.unknowns();
    return [inv, z, n](const Vector& x, Vector& y) {
        Vector r(n - 1);
        r.head(z) = x.head(z);
        r.tail(n - 1 - z) = x.tail(n - 1 - z);
        Vector s = inv->solve(r);
        y.resize(n);
        y.head(z) = s.head(z);
        y[z] = 0.0;
        y.tail(n - 1 - z) = s.tail(n - 1 - z);
    };
}

double resolvent_gap_1d(const Line1DGrid& grid, double c_omega, const TwistProfile& profile,
                        double epsilon, double k2, const SolverOptions& opts)
{
    const ScaledTwist tw = scaled_twist(profile, epsilon);
    const ShiftedInverse ra(assemble_h_eps(grid, c_omega, tw).matrix, -k2);
    const LinearMap rb = dirichlet_embedded_resolvent(grid, k2);
    Vector tmp;
    LinearMap diff = [&](const Vector& x, Vector& y) {
        ra.apply(x, y);
        rb(x, tmp);
        y -= tmp;
    };
    SolverOptions o = opts;
    o.scale_floor = std::max(o.scale_floor, 1.0);
    return symmetric_norm(diff, grid.unknowns(), o).value;
}

}  // namespace twistlab
