#include "twistlab/krein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace twistlab {

double affine_patch_residual(const Kernel2& kernel, double a, double b, double patch)
{
    const int n = 21;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = -patch + 2.0 * patch * i / (n - 1);
            const double y = -patch + 2.0 * patch * j / (n - 1);
            worst = std::max(worst, std::abs(kernel(x, y) - a - b * std::abs(x - y)));
        }
    return worst;
}

LocalExpansion local_green_expansion(const Kernel2& kernel, double h, double patch)
{
    LocalExpansion e;
    e.a = kernel(0.0, 0.0);
    auto slope = [&](double step) { return (kernel(step, 0.0) - e.a) / step; };
    for (int k = 0; k < 3; ++k)
        e.slope_estimates[k] = slope(h * (1 << k));
    const double r1 = 2.0 * e.slope_estimates[0] - e.slope_estimates[1];
    const double r2 = 2.0 * e.slope_estimates[1] - e.slope_estimates[2];
    e.b = (4.0 * r1 - r2) / 3.0;
    if (!std::isfinite(e.b) || std::abs(r1 - r2) > 1e-4 * std::max(1.0, std::abs(e.b))) {
        std::ostringstream msg;
        msg << "local_green_expansion: slope extrapolation does not converge; estimates "
            << e.slope_estimates[0] << ", " << e.slope_estimates[1] << ", " << e.slope_estimates[2];
        throw SolverError(msg.str());
    }
    double left[3];
    for (int k = 0; k < 3; ++k) {
        const double step = h * (1 << k);
        left[k] = (e.a - kernel(-step, 0.0)) / step;
    }
    const double l1 = 2.0 * left[0] - left[1];
    const double l2 = 2.0 * left[1] - left[2];
    e.slope_left = (4.0 * l1 - l2) / 3.0;
    e.patch_residual = affine_patch_residual(kernel, e.a, e.b, patch);
    return e;
}

double spectral_norm(const Matrix& a)
{
    if (a.size() == 0)
        return 0.0;
    if (a.rows() == a.cols()) {
        const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        if ((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * scale) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
            return es.eigenvalues().cwiseAbs().maxCoeff();
        }
    }
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues()[0];
}

BSKernelData birman_schwinger(const TwistProfile& profile, double c_omega, double epsilon,
                              const Kernel2& kernel, const LocalExpansion& local, int n_nodes)
{
    if (!(epsilon > 0.0))
        throw std::invalid_argument("birman_schwinger: epsilon must be positive");
    if (n_nodes < 3)
        throw std::invalid_argument("birman_schwinger: at least 3 quadrature nodes required");
    BSKernelData d;
    d.epsilon = epsilon;
    d.a = local.a;
    d.b = local.b;
    const int n = n_nodes;
    const double lo = profile.is_zero() ? -1.0 : profile.support_lo;
    const double hi = profile.is_zero() ? 1.0 : profile.support_hi;
    const double dy = (hi - lo) / (n - 1);
    d.nodes.resize(n);
    d.weights.resize(n);
    d.V.resize(n);
    d.s.resize(n);
    for (int i = 0; i < n; ++i) {
        d.nodes[i] = lo + dy * i;
        d.weights[i] = (i == 0 || i == n - 1) ? 0.5 * dy : dy;
        const double t = profile.dtheta(d.nodes[i]);
        d.V[i] = c_omega * t * t;
        d.s[i] = std::sqrt(d.weights[i] * d.V[i]);
    }
    d.v_l1 = d.weights.dot(d.V);
    d.c = d.a * d.v_l1;

    d.K.resize(n, n);
    d.M1.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double r = (d.s[i] == 0.0 || d.s[j] == 0.0)
                                 ? 0.0
                                 : d.s[i] * kernel(epsilon * d.nodes[i], epsilon * d.nodes[j]) * d.s[j];
            d.K(i, j) = d.K(j, i) = r;
            const double m = d.b * d.s[i] * std::abs(d.nodes[i] - d.nodes[j]) * d.s[j];
            d.M1(i, j) = d.M1(j, i) = m;
        }
    const Matrix id = Matrix::Identity(n, n);
    const Matrix a = id + d.K;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const double emin = es.eigenvalues().minCoeff(), emax = es.eigenvalues().maxCoeff();
    if (!(emin > 1e-12 * emax))
        throw SolverError("birman_schwinger: 1 + K is singular");
    d.condition = emax / emin;
    d.T = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    d.T = 0.5 * (d.T + d.T.transpose()).eval();
    d.asymmetry = (d.K - d.K.transpose()).cwiseAbs().maxCoeff();
    d.t_norm = spectral_norm(d.T);

    if (d.v_l1 > 0.0) {
        d.P = d.s * d.s.transpose() / d.s.squaredNorm();
    } else {
        d.P = Matrix::Zero(n, n);
    }
    d.Q = id - d.P;
    d.t0 = d.Q + d.P / (1.0 + d.c);
    d.t1 = -d.t0 * d.M1 * d.t0;
    return d;
}

ExpansionTable expansion_residuals(const std::vector<BSKernelData>& data)
{
    if (data.size() < 3)
        throw std::invalid_argument("expansion_residuals: at least 3 epsilon values required");
    ExpansionTable table;
    std::vector<double> eps, r0, r1;
    for (const auto& d : data) {
        ExpansionRow row;
        row.epsilon = d.epsilon;
        row.residual0 = spectral_norm(d.T - d.t0);
        row.residual1 = spectral_norm(d.T - d.t0 - d.epsilon * d.t1);
        if (d.c != 0.0)
            row.residual_p_over_c = spectral_norm(d.T - (d.Q + d.P / d.c));
        else
            row.residual_p_over_c = std::numeric_limits<double>::infinity();
        const Matrix E = d.K - d.c * d.P;
        const double en = spectral_norm(E);
        row.neumann_gap = spectral_norm(d.T - (d.t0 - d.t0 * E * d.t0));
        row.neumann_bound = en < 1.0 ? en * en / (1.0 - en) : std::numeric_limits<double>::infinity();
        row.t_norm = d.t_norm;
        row.condition = d.condition;
        table.rows.push_back(row);
        eps.push_back(d.epsilon);
        r0.push_back(row.residual0);
        r1.push_back(row.residual1);
    }
    table.fit0 = fit_rate(eps, r0);
    table.fit1 = fit_rate(eps, r1);
    return table;
}

namespace {

// Spectral norm of X J X^T with J = diag(+1, ..., +1, -1, ...) given by signs.
double signed_gram_norm(const Matrix& x, const Vector& signs)
{
    Matrix g = x.transpose() * x;
    g = 0.5 * (g + g.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Matrix root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Matrix m = root * signs.asDiagonal() * root;
    Eigen::SelfAdjointEigenSolver<Matrix> ms(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return ms.eigenvalues().cwiseAbs().maxCoeff();
}

bool strictly_decreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]))
            return false;
    return true;
}

}  // namespace

LemmaVerdict lemma_limits(const TwistProfile& profile, const std::vector<double>& epsilons,
                          double k2, double half_width)
{
    if (profile.is_zero())
        throw std::invalid_argument("lemma_limits: the profile must be nonzero");
    if (epsilons.size() < 3)
        throw std::invalid_argument("lemma_limits: at least 3 epsilon values required");
    std::vector<double> eps = epsilons;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const double width = profile.support_hi - profile.support_lo;
    const int n_points = min_points_for_support(half_width, eps.back() * width, 40);
    const Line1DGrid grid = make_line_grid(half_width, n_points);
    const ShiftedInverse r0(assemble_h0(grid).matrix, -k2);
    const int n = grid.unknowns();
    const double h = grid.h;
    Vector ez = Vector::Zero(n);
    ez[grid.zero_unknown()] = 1.0;
    const Vector g0 = r0.solve(ez) / h;

    LemmaVerdict out;
    std::vector<double> pj, fl, cp;
    for (double e : eps) {
        std::vector<int> idx;
        std::vector<double> delta;
        double mass = 0.0;
        for (int i = 0; i < n; ++i) {
            const double y = grid.x_unknown(i) / e;
            const double t = profile.dtheta(y);
            if (t == 0.0)
                continue;
            idx.push_back(i);
            delta.push_back(t * t);
            mass += h * t * t;
        }
        for (double& dv : delta)
            dv /= mass;  // h * sum(delta) = 1
        const int m = static_cast<int>(idx.size());
        Vector dfull = Vector::Zero(n);
        for (int k = 0; k < m; ++k)
            dfull[idx[k]] = delta[k];

        LemmaRow row;
        row.epsilon = e;
        {
            Matrix x(n, 2);
            x.col(0) = std::sqrt(h) * r0.solve(dfull);
            x.col(1) = std::sqrt(h) * g0;
            Vector sg(2);
            sg << 1.0, -1.0;
            row.projected = signed_gram_norm(x, sg);
        }
        Matrix cols(n, m);
        for (int k = 0; k < m; ++k) {
            Vector ek = Vector::Zero(n);
            ek[idx[k]] = 1.0;
            cols.col(k) = r0.solve(ek);
        }
        {
            Matrix x(n, m + 1);
            for (int k = 0; k < m; ++k)
                x.col(k) = cols.col(k) * std::sqrt(delta[k]);
            x.col(m) = std::sqrt(h) * g0;
            Vector sg = Vector::Ones(m + 1);
            sg[m] = -1.0;
            row.full = signed_gram_norm(x, sg);
        }
        {
            // support nodes y_j = x_j / e with weights h / e; v normalized in that weight
            const double w = h / e;
            Vector v(m);
            for (int k = 0; k < m; ++k)
                v[k] = std::sqrt(delta[k] * e);
            Vector vt = std::sqrt(w) * v;  // unit vector in the orthonormal coordinates
            Matrix b(n, m);
            for (int k = 0; k < m; ++k)
                b.col(k) = cols.col(k) * (v[k] / (e * std::sqrt(w)));
            Matrix q = Matrix::Identity(m, m) - vt * vt.transpose();
            Matrix s = std::sqrt(h) * b * q;
            Matrix sts = s.transpose() * s;
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sts + sts.transpose()), Eigen::EigenvaluesOnly);
            row.complement = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
        }
        out.rows.push_back(row);
        pj.push_back(row.projected);
        fl.push_back(row.full);
        cp.push_back(row.complement);
    }
    out.fit_projected = fit_rate(eps, pj);
    out.fit_full = fit_rate(eps, fl);
    out.fit_complement = fit_rate(eps, cp);
    out.projected_decreasing = strictly_decreasing(pj);
    out.full_decreasing = strictly_decreasing(fl);
    out.complement_decreasing = strictly_decreasing(cp);
    out.complement_ratio = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i + 1 < eps.size(); ++i)
        if (std::abs(eps[i] - 2.0 * eps.back()) <= 1e-12 * eps[i])
            out.complement_ratio = cp.back() / cp[i];
    out.complement_order_ok = out.fit_complement.exponent >= 1.0;
    out.complement_ratio_ok = out.complement_ratio <= 0.6;
    return out;
}

}  // namespace twistlab
