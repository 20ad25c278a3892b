#include "twistlab/transverse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace twistlab {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b)
{
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

bool on_segment(const Point2& p, const Point2& q, const Point2& r)
{
    return std::min(p[0], r[0]) <= q[0] && q[0] <= std::max(p[0], r[0]) &&
           std::min(p[1], r[1]) <= q[1] && q[1] <= std::max(p[1], r[1]);
}

int orientation(const Point2& p, const Point2& q, const Point2& r)
{
    const double v = cross(p, q, r);
    if (v > 0.0)
        return 1;
    if (v < 0.0)
        return -1;
    return 0;
}

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& p3, const Point2& p4)
{
    const int d1 = orientation(p3, p4, p1), d2 = orientation(p3, p4, p2);
    const int d3 = orientation(p1, p2, p3), d4 = orientation(p1, p2, p4);
    if (d1 * d2 < 0 && d3 * d4 < 0)
        return true;
    if (d1 == 0 && on_segment(p3, p1, p4))
        return true;
    if (d2 == 0 && on_segment(p3, p2, p4))
        return true;
    if (d3 == 0 && on_segment(p1, p3, p2))
        return true;
    if (d4 == 0 && on_segment(p1, p4, p2))
        return true;
    return false;
}

double distance_to_segment(const Point2& p, const Point2& a, const Point2& b)
{
    const double dx = b[0] - a[0], dy = b[1] - a[1];
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a[0] + t * dx - p[0], ey = a[1] + t * dy - p[1];
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

bool point_in_polygon(const std::vector<Point2>& poly, const Point2& p)
{
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = poly[i];
        const Point2& b = poly[j];
        if ((a[1] > p[1]) != (b[1] > p[1])) {
            const double xc = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if (p[0] < xc)
                inside = !inside;
        }
    }
    return inside;
}

double polygon_area(const std::vector<Point2>& poly)
{
    double s = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = poly[i];
        const Point2& b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    return 0.5 * s;
}

Point2 polygon_centroid(const std::vector<Point2>& poly)
{
    const double area = polygon_area(poly);
    double cx = 0.0, cy = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = poly[i];
        const Point2& b = poly[(i + 1) % n];
        const double c = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * c;
        cy += (a[1] + b[1]) * c;
    }
    return {cx / (6.0 * area), cy / (6.0 * area)};
}

bool polygon_is_simple(const std::vector<Point2>& poly)
{
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = poly[i];
        const Point2& b = poly[(i + 1) % n];
        if (a == b)
            return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            const Point2& c = poly[j];
            const Point2& d = poly[(j + 1) % n];
            if (adjacent) {
                // adjacent edges share one vertex; they must not fold back onto each other
                const Point2& shared = j == i + 1 ? b : a;
                const Point2& far1 = j == i + 1 ? a : b;
                const Point2& far2 = j == i + 1 ? d : c;
                if (orientation(far1, shared, far2) == 0) {
                    const double dot = (far1[0] - shared[0]) * (far2[0] - shared[0]) +
                                       (far1[1] - shared[1]) * (far2[1] - shared[1]);
                    if (dot > 0.0)
                        return false;
                }
                continue;
            }
            if (segments_intersect(a, b, c, d))
                return false;
        }
    }
    return true;
}

void validate_cross_section(const CrossSectionSpec& spec)
{
    if (!(spec.resolution > 0.0) || !std::isfinite(spec.resolution))
        throw GeometryError("cross-section: resolution must be positive");
    if (!std::isfinite(spec.axis_offset[0]) || !std::isfinite(spec.axis_offset[1]))
        throw GeometryError("cross-section: axis offset must be finite");
    if (spec.kind == CrossSectionSpec::Kind::rectangle) {
        if (!(spec.a > 0.0) || !(spec.b > 0.0) || !std::isfinite(spec.a) || !std::isfinite(spec.b))
            throw GeometryError("rectangle cross-section: side lengths must be positive");
        if (spec.a == spec.b && !spec.allow_square)
            throw GeometryError("rectangle cross-section: a square is rejected because its "
                                "symmetry suppresses the first-mode twist coupling diagnostics; "
                                "set allow_square or pass --override-square to accept it");
        return;
    }
    const auto& v = spec.vertices;
    if (v.size() < 3)
        throw GeometryError("polygon cross-section: at least 3 vertices required");
    for (const auto& p : v)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
            throw GeometryError("polygon cross-section: vertices must be finite");
    if (std::abs(polygon_area(v)) < 1e-12)
        throw GeometryError("polygon cross-section: zero area");
    if (!polygon_is_simple(v))
        throw GeometryError("polygon cross-section: polygon is self-intersecting");
}

CrossSectionGrid build_cross_section(const CrossSectionSpec& spec)
{
    validate_cross_section(spec);
    CrossSectionGrid g;
    std::vector<Point2> poly = spec.vertices;
    if (spec.kind == CrossSectionSpec::Kind::rectangle) {
        const int Nx = std::max(2, static_cast<int>(std::lround(spec.a * spec.resolution)));
        const int Ny = std::max(2, static_cast<int>(std::lround(spec.b * spec.resolution)));
        g.hx = spec.a / Nx;
        g.hy = spec.b / Ny;
        g.nx = Nx + 1;
        g.ny = Ny + 1;
        g.x0 = 0.0;
        g.y0 = 0.0;
        g.area = spec.a * spec.b;
        g.centroid = {0.5 * spec.a, 0.5 * spec.b};
    } else {
        double xmin = poly[0][0], xmax = xmin, ymin = poly[0][1], ymax = ymin;
        for (const auto& p : poly) {
            xmin = std::min(xmin, p[0]);
            xmax = std::max(xmax, p[0]);
            ymin = std::min(ymin, p[1]);
            ymax = std::max(ymax, p[1]);
        }
        const double h = 1.0 / spec.resolution;
        g.hx = g.hy = h;
        g.nx = static_cast<int>(std::ceil((xmax - xmin) / h)) + 3;
        g.ny = static_cast<int>(std::ceil((ymax - ymin) / h)) + 3;
        g.x0 = xmin - h;
        g.y0 = ymin - h;
        g.area = std::abs(polygon_area(poly));
        g.centroid = polygon_centroid(poly);
    }
    g.axis = {g.centroid[0] + spec.axis_offset[0], g.centroid[1] + spec.axis_offset[1]};

    const int total = g.nx * g.ny;
    g.interior_mask.assign(total, 0);
    g.lattice_to_interior.assign(total, -1);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            bool inside;
            if (spec.kind == CrossSectionSpec::Kind::rectangle) {
                inside = i > 0 && i < g.nx - 1 && j > 0 && j < g.ny - 1;
            } else {
                const Point2 p{g.x0 + i * g.hx, g.y0 + j * g.hy};
                inside = point_in_polygon(poly, p);
                if (inside) {
                    for (std::size_t k = 0; k < poly.size(); ++k)
                        if (distance_to_segment(p, poly[k], poly[(k + 1) % poly.size()]) < 1e-9 * g.hx) {
                            inside = false;
                            break;
                        }
                }
            }
            if (inside) {
                const int id = g.lattice_id(i, j);
                g.interior_mask[id] = 1;
                g.lattice_to_interior[id] = static_cast<int>(g.interior.size());
                g.interior.push_back(id);
            }
        }
    }
    if (g.interior.size() < 100) {
        std::ostringstream msg;
        msg << "cross-section: only " << g.interior.size()
            << " interior nodes, at least 100 are required (increase resolution)";
        throw GeometryError(msg.str());
    }
    for (int id = 0; id < total; ++id) {
        if (g.interior_mask[id])
            continue;
        const int i = id % g.nx, j = id / g.nx;
        const int nb[4][2] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
        for (const auto& q : nb) {
            if (q[0] < 0 || q[0] >= g.nx || q[1] < 0 || q[1] >= g.ny)
                continue;
            if (g.interior_mask[g.lattice_id(q[0], q[1])]) {
                g.ring.push_back(id);
                break;
            }
        }
    }
    return g;
}

SparseMatrix dirichlet_laplacian(const CrossSectionGrid& g)
{
    const int n = static_cast<int>(g.interior.size());
    const double cx = 1.0 / (g.hx * g.hx), cy = 1.0 / (g.hy * g.hy);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(5 * static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const int id = g.interior[k];
        const int i = id % g.nx, j = id / g.nx;
        t.emplace_back(k, k, 2.0 * cx + 2.0 * cy);
        const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
        const double w[4] = {cx, cx, cy, cy};
        for (int q = 0; q < 4; ++q) {
            const int ii = nb[q][0], jj = nb[q][1];
            if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny)
                continue;
            const int m = g.lattice_to_interior[g.lattice_id(ii, jj)];
            if (m >= 0)
                t.emplace_back(k, m, -w[q]);
        }
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

Vector angular_derivative(const CrossSectionGrid& g, const Vector& u)
{
    auto value = [&](int i, int j) -> double {
        if (i < 0 || i >= g.nx || j < 0 || j >= g.ny)
            return 0.0;
        const int m = g.lattice_to_interior[g.lattice_id(i, j)];
        return m >= 0 ? u[m] : 0.0;
    };
    auto is_interior = [&](int i, int j) -> bool {
        if (i < 0 || i >= g.nx || j < 0 || j >= g.ny)
            return false;
        return g.interior_mask[g.lattice_id(i, j)] != 0;
    };
    // derivative along direction (di, dj) with spacing h
    auto derivative = [&](int i, int j, int di, int dj, double h, bool interior_node) -> double {
        const bool fwd = is_interior(i + di, j + dj);
        const bool bwd = is_interior(i - di, j - dj);
        if (interior_node || (fwd && bwd))
            return (value(i + di, j + dj) - value(i - di, j - dj)) / (2.0 * h);
        if (fwd)
            return (4.0 * value(i + di, j + dj) - value(i + 2 * di, j + 2 * dj)) / (2.0 * h);
        if (bwd)
            return -(4.0 * value(i - di, j - dj) - value(i - 2 * di, j - 2 * dj)) / (2.0 * h);
        return 0.0;
    };
    const std::size_t ni = g.interior.size();
    Vector tau(ni + g.ring.size());
    for (std::size_t k = 0; k < ni + g.ring.size(); ++k) {
        const bool interior_node = k < ni;
        const int id = interior_node ? g.interior[k] : g.ring[k - ni];
        const int i = id % g.nx, j = id / g.nx;
        const double d2 = derivative(i, j, 1, 0, g.hx, interior_node);
        const double d3 = derivative(i, j, 0, 1, g.hy, interior_node);
        tau[static_cast<Index>(k)] = g.x3(id) * d2 - g.x2(id) * d3;
    }
    return tau;
}

Vector tau_weights(const CrossSectionGrid& g)
{
    const std::size_t ni = g.interior.size();
    Vector w(ni + g.ring.size());
    w.head(ni).setConstant(g.cell());
    w.tail(g.ring.size()).setConstant(0.5 * g.cell());
    return w;
}

std::vector<TransverseMode> solve_dirichlet_modes(const CrossSectionGrid& g, int n_modes,
                                                  const SolverOptions& opts)
{
    if (n_modes < 2)
        throw std::invalid_argument("solve_dirichlet_modes: at least 2 modes required");
    const SparseMatrix lap = dirichlet_laplacian(g);
    const int n = static_cast<int>(lap.rows());
    const int want = std::min(n, n_modes + 2);
    Eigenpairs ep = lowest_eigenpairs(lap, want, 0.0, opts);

    // rotate exactly degenerate clusters onto a generic separable weight
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    Vector weight(n);
    for (int k = 0; k < n; ++k) {
        const double x = g.x2(g.interior[k]), y = g.x3(g.interior[k]);
        weight[k] = x * x + phi * y * y + 0.1 * x + 0.2 * y;
    }
    int start = 0;
    while (start < want) {
        int end = start + 1;
        while (end < want && ep.values[end] - ep.values[start] <= 1e-8 * std::abs(ep.values[start]))
            ++end;
        if (end - start > 1) {
            Matrix v = ep.vectors.middleCols(start, end - start);
            Matrix w = v.transpose() * weight.asDiagonal() * v;
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (w + w.transpose()));
            ep.vectors.middleCols(start, end - start) = v * es.eigenvectors();
            const double mean = ep.values.segment(start, end - start).mean();
            ep.values.segment(start, end - start).setConstant(mean);
        }
        start = end;
    }
    if (!(ep.values[1] > ep.values[0] * (1.0 + 1e-8)))
        throw SolverError("solve_dirichlet_modes: the first transverse eigenvalue is degenerate");

    std::vector<TransverseMode> modes;
    const double scale = 1.0 / std::sqrt(g.cell());
    for (int m = 0; m < n_modes; ++m) {
        TransverseMode mode;
        mode.index = m + 1;
        mode.energy = ep.values[m];
        Vector v = ep.vectors.col(m);
        Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0)
            v = -v;
        mode.values = scale * v;
        mode.residual = (lap * v - mode.energy * v).norm();
        mode.tau_values = angular_derivative(g, mode.values);
        modes.push_back(std::move(mode));
    }
    return modes;
}

CouplingData coupling_matrices(const std::vector<TransverseMode>& modes, const CrossSectionGrid& g,
                               double quadrature_tol)
{
    const int M = static_cast<int>(modes.size());
    if (M < 2)
        throw std::invalid_argument("coupling_matrices: at least 2 modes required");
    const Index ni = static_cast<Index>(g.interior.size());
    const Vector w = tau_weights(g);
    CouplingData c;
    c.D.resize(M, M);
    c.G.resize(M, M);
    for (int n = 0; n < M; ++n) {
        for (int m = 0; m < M; ++m) {
            c.D(n, m) = g.cell() * modes[n].values.dot(modes[m].tau_values.head(ni));
            c.G(n, m) = (w.array() * modes[n].tau_values.array() * modes[m].tau_values.array()).sum();
        }
    }
    c.raw_skew_defect = (c.D + c.D.transpose()).cwiseAbs().maxCoeff();
    if (c.raw_skew_defect > 10.0 * quadrature_tol * std::max(1.0, c.D.cwiseAbs().maxCoeff())) {
        std::ostringstream msg;
        msg << "coupling_matrices: skew defect " << c.raw_skew_defect
            << " exceeds tolerance; the cross-section grid is under-resolved";
        throw SolverError(msg.str(), {c.raw_skew_defect});
    }
    c.D = 0.5 * (c.D - c.D.transpose()).eval();
    c.G = 0.5 * (c.G + c.G.transpose()).eval();
    c.c_omega = c.G(0, 0);
    return c;
}

}  // namespace twistlab
