#pragma once

#include "twistlab/eigensolver.hpp"
#include "twistlab/twist.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace twistlab {

class GridError : public std::invalid_argument {
public:
    GridError(const std::string& what, int required_points = 0)
        : std::invalid_argument(what), required_points_(required_points) {}
    int required_points() const { return required_points_; }

private:
    int required_points_;
};

// Eigenvalues of h0 are alpha * (n + 1/2) with alpha = 1/2 (x = 2y maps h0
// to (-d^2/dy^2 + y^2) / 4).
inline constexpr double oscillator_alpha = 0.5;

inline double oscillator_eigenvalue(int n) { return oscillator_alpha * (n + 0.5); }

// Normalized eigenfunction of h0: 2^{-1/2} pi^{-1/4} (2^n n!)^{-1/2} e^{-x^2/8} H_n(x/2).
double hermite_function(int n, double x);

// Uniform grid on [-L, L] with an odd number of nodes; the end nodes carry
// the Dirichlet condition and the unknowns are nodes 1 .. n-2.
struct Line1DGrid {
    double half_width = 12.0;
    int n_points = 1201;
    double h = 0.02;
    std::vector<double> nodes;

    int zero_node() const { return (n_points - 1) / 2; }
    int unknowns() const { return n_points - 2; }
    int zero_unknown() const { return zero_node() - 1; }
    double x_unknown(int k) const { return nodes[static_cast<std::size_t>(k) + 1]; }
};

Line1DGrid make_line_grid(double half_width = 12.0, int n_points = 1201);

// Smallest odd point count whose spacing puts min_intervals grid intervals
// across a twist support of the given width.
int min_points_for_support(double half_width, double support_width, int min_intervals = 20);

void check_resolves(const Line1DGrid& grid, const ScaledTwist& twist, int min_intervals = 20);

struct OperatorMatrix {
    SparseMatrix matrix;
    std::string basis;
    int n_modes = 1;
    double energy_shift = 0.0;  // subtracted analytically, never numerically
    double h = 0.0;
};

OperatorMatrix assemble_h0(const Line1DGrid& grid);
OperatorMatrix assemble_h0_dirichlet(const Line1DGrid& grid);
OperatorMatrix assemble_h_eps(const Line1DGrid& grid, double c_omega, const ScaledTwist& twist);

// Centered first difference on the unknowns (skew).
SparseMatrix centered_difference(const Line1DGrid& grid);

struct OscillatorEigensystem {
    Vector eigenvalues;
    Matrix eigenfunctions;  // node values on the unknowns, h * sum psi^2 = 1
    Vector residuals;
};

OscillatorEigensystem oscillator_spectrum(const OperatorMatrix& op, int count,
                                          const SolverOptions& opts = {});

struct ExtrapolatedSpectrum {
    Vector coarse;
    Vector fine;
    Vector extrapolated;  // (4 fine - coarse) / 3
};

// Spectrum on n and 2n - 1 points with Richardson extrapolation in h^2.
ExtrapolatedSpectrum extrapolated_spectrum(double half_width, int n_points, int count, bool dirichlet);

int sign_changes(const Vector& v, double rel_threshold = 1e-8);

enum class GreenTag { h0, h0_dirichlet };

// Discrete Green function R(x_i, x_j) = ((A - k2)^{-1})_{ij} / h on grid nodes;
// boundary nodes give 0. The Dirichlet variant is the Krein-corrected kernel.
class GreenKernel {
public:
    static GreenKernel for_h0(const Line1DGrid& grid, double k2);

    GreenTag tag() const { return tag_; }
    double k2() const { return k2_; }
    const Line1DGrid& grid() const { return *grid_; }

    double operator()(int i, int j) const;
    Vector column(int j) const;  // full grid, length n_points
    double krein_constant() const { return krein_constant_; }

    friend GreenKernel dirichlet_green_kernel(const GreenKernel& g);

private:
    GreenTag tag_ = GreenTag::h0;
    double k2_ = -1.0;
    std::shared_ptr<const Line1DGrid> grid_;
    std::shared_ptr<const ShiftedInverse> inverse_;
    std::shared_ptr<const Vector> zero_column_;
    double krein_constant_ = 0.0;
    Vector raw_column(int j) const;
};

GreenKernel dirichlet_green_kernel(const GreenKernel& g);

// Truncated eigenfunction expansion sum_{n<N} psi_n(x) psi_n(y) / (lambda_n - k2).
double spectral_green_h0(double x, double y, double k2, int N);

// Closed-form Green function of h0 - k2 on the real line via parabolic
// cylinder functions; accurate for |x|, |y| up to a few units.
double continuum_green_h0(double x, double y, double k2);

// Map applying (A - k2)^{-1} for h0 with the zero node constrained, embedded
// back into the unconstrained unknowns with 0 at the zero node.
LinearMap dirichlet_embedded_resolvent(const Line1DGrid& grid, double k2);

double resolvent_gap_1d(const Line1DGrid& grid, double c_omega, const TwistProfile& profile,
                        double epsilon, double k2 = -1.0, const SolverOptions& opts = {});

}  // namespace twistlab
