#pragma once

#include "twistlab/eigensolver.hpp"
#include "twistlab/fit.hpp"
#include "twistlab/oscillator.hpp"
#include "twistlab/twist.hpp"

#include <functional>
#include <vector>

namespace twistlab {

using Kernel2 = std::function<double(double, double)>;

struct LocalExpansion {
    double a = 0.0;  // R(0, 0)
    double b = 0.0;  // one-sided slope at 0+
    double slope_left = 0.0;  // slope of x -> R(x, 0) at 0-
    double slope_estimates[3] = {0.0, 0.0, 0.0};  // at steps h, 2h, 4h
    double patch_residual = 0.0;  // max |R - a - b|x-y|| over the patch
};

// a and b of R(x, y) ~ a + b|x - y| near the origin, by one-sided differences
// at steps {h, 2h, 4h} with two Richardson passes.
LocalExpansion local_green_expansion(const Kernel2& kernel, double h = 1e-3, double patch = 0.1);

// max |R(x, y) - a - b|x - y|| over |x|, |y| <= patch on a 21 x 21 sample.
double affine_patch_residual(const Kernel2& kernel, double a, double b, double patch);

struct BSKernelData {
    double epsilon = 0.0;
    Vector nodes;    // quadrature nodes on the profile support (unscaled variable)
    Vector weights;  // trapezoid weights
    Vector V;        // c_omega * dtheta^2
    Vector s;        // sqrt(w V), absorbed symmetrically
    double v_l1 = 0.0;  // quadrature of V
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;  // a * v_l1
    Matrix K;   // s_i R(eps y_i, eps y_j) s_j
    Matrix T;   // (1 + K)^{-1}
    Matrix P;
    Matrix Q;
    Matrix M1;  // b s_i |y_i - y_j| s_j
    Matrix t0;  // (1 + cP)^{-1} = Q + P / (1 + c)
    Matrix t1;  // -t0 M1 t0
    double condition = 1.0;
    double t_norm = 0.0;
    double asymmetry = 0.0;
};

// Builds T(eps k) on n_nodes uniform nodes of the profile support.
BSKernelData birman_schwinger(const TwistProfile& profile, double c_omega, double epsilon,
                              const Kernel2& kernel, const LocalExpansion& local, int n_nodes = 400);

double spectral_norm(const Matrix& a);

struct ExpansionRow {
    double epsilon = 0.0;
    double residual0 = 0.0;  // ||T - t0||
    double residual1 = 0.0;  // ||T - t0 - eps t1||
    double residual_p_over_c = 0.0;  // ||T - (Q + P / c)||
    double neumann_gap = 0.0;  // ||T - (t0 - t0 E t0)||, E = K - cP
    double neumann_bound = 0.0;  // ||E||^2 / (1 - ||E||), infinite if ||E|| >= 1
    double t_norm = 0.0;
    double condition = 1.0;
};

struct ExpansionTable {
    std::vector<ExpansionRow> rows;
    PowerFit fit0;
    PowerFit fit1;
};

ExpansionTable expansion_residuals(const std::vector<BSKernelData>& data);

struct LemmaRow {
    double epsilon = 0.0;
    double projected = 0.0;    // rank-one part against the trace limit
    double full = 0.0;         // multiplication part against the trace limit
    double complement = 0.0;   // Q-part
};

struct LemmaVerdict {
    std::vector<LemmaRow> rows;
    PowerFit fit_projected;
    PowerFit fit_full;
    PowerFit fit_complement;
    double complement_ratio = 0.0;  // value(eps) / value(2 eps), smallest pair
    bool projected_decreasing = false;
    bool full_decreasing = false;
    bool complement_decreasing = false;
    bool complement_order_ok = false;
    bool complement_ratio_ok = false;
};

// Operator-norm limits of the delta-sequence built from V on the 1D grid.
LemmaVerdict lemma_limits(const TwistProfile& profile, const std::vector<double>& epsilons,
                          double k2 = -1.0, double half_width = 12.0);

}  // namespace twistlab
