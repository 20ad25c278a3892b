#pragma once

#include "twistlab/eigensolver.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace twistlab {

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Point2 = std::array<double, 2>;

struct CrossSectionSpec {
    enum class Kind { rectangle, polygon };
    Kind kind = Kind::rectangle;
    double a = 1.0;
    double b = 0.5;
    std::vector<Point2> vertices;
    double resolution = 160.0;  // lattice points per unit length
    Point2 axis_offset{0.0, 0.0};
    bool allow_square = false;
};

void validate_cross_section(const CrossSectionSpec& spec);

// Lattice covering the cross-section. Interior nodes carry the unknowns; ring
// nodes are lattice neighbours of the interior outside the domain, where
// modes vanish but angular derivatives are still sampled for quadrature.
struct CrossSectionGrid {
    double hx = 0.0;
    double hy = 0.0;
    int nx = 0;
    int ny = 0;
    double x0 = 0.0;  // absolute coordinates of lattice node (0, 0)
    double y0 = 0.0;
    Point2 centroid{0.0, 0.0};
    Point2 axis{0.0, 0.0};  // rotation axis, absolute coordinates
    double area = 0.0;
    std::vector<char> interior_mask;  // nx * ny, row-major in x
    std::vector<int> lattice_to_interior;  // -1 if not interior
    std::vector<int> interior;  // lattice ids
    std::vector<int> ring;      // lattice ids

    int lattice_id(int i, int j) const { return j * nx + i; }
    // coordinates relative to the rotation axis
    double x2(int id) const { return x0 + (id % nx) * hx - axis[0]; }
    double x3(int id) const { return y0 + (id / nx) * hy - axis[1]; }
    double cell() const { return hx * hy; }
    std::size_t interior_count() const { return interior.size(); }
};

CrossSectionGrid build_cross_section(const CrossSectionSpec& spec);

bool point_in_polygon(const std::vector<Point2>& poly, const Point2& p);
double polygon_area(const std::vector<Point2>& poly);
Point2 polygon_centroid(const std::vector<Point2>& poly);
bool polygon_is_simple(const std::vector<Point2>& poly);

SparseMatrix dirichlet_laplacian(const CrossSectionGrid& grid);

struct TransverseMode {
    int index = 1;
    double energy = 0.0;
    Vector values;      // on interior nodes
    Vector tau_values;  // on interior nodes followed by ring nodes
    double residual = 0.0;
};

// Angular derivative x3 d/dx2 - x2 d/dx3 of a field given on interior nodes,
// sampled on interior then ring nodes.
Vector angular_derivative(const CrossSectionGrid& grid, const Vector& interior_values);

// Quadrature weights matching the layout of TransverseMode::tau_values.
Vector tau_weights(const CrossSectionGrid& grid);

std::vector<TransverseMode> solve_dirichlet_modes(const CrossSectionGrid& grid, int n_modes,
                                                  const SolverOptions& opts = {});

struct CouplingData {
    Matrix D;  // (J_n, tau J_m), skew
    Matrix G;  // (tau J_n, tau J_m)
    double c_omega = 0.0;
    double raw_skew_defect = 0.0;
};

CouplingData coupling_matrices(const std::vector<TransverseMode>& modes, const CrossSectionGrid& grid,
                               double quadrature_tol = 1e-10);

}  // namespace twistlab
