#include "twistlab/eigensolver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace twistlab {

Vector seeded_vector(Index dim, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        v[i] = 2.0 * u - 1.0;
    }
    return v;
}

struct ShiftedInverse::Impl {
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

ShiftedInverse::ShiftedInverse(const SparseMatrix& a, double shift)
{
    if (a.rows() != a.cols())
        throw SolverError("shifted inverse: matrix is not square");
    dim_ = a.rows();
    SparseMatrix id(dim_, dim_);
    id.setIdentity();
    SparseMatrix m = a + shift * id;
    auto impl = std::make_shared<Impl>();
    impl->ldlt.compute(m);
    if (impl->ldlt.info() != Eigen::Success)
        throw SolverError("shifted inverse: factorization failed (singular shifted matrix)");
    const Vector d = impl->ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(d.cwiseAbs().minCoeff() > 1e-14 * dmax))
        throw SolverError("shifted inverse: singular shifted matrix");
    impl_ = impl;
}

void ShiftedInverse::apply(const Vector& x, Vector& y) const { y = impl_->ldlt.solve(x); }

Index ShiftedInverse::negative_pivots() const
{
    return (impl_->ldlt.vectorD().array() < 0.0).count();
}

Vector ShiftedInverse::solve(const Vector& x) const { return impl_->ldlt.solve(x); }

LinearMap ShiftedInverse::as_map() const
{
    auto impl = impl_;
    return [impl](const Vector& x, Vector& y) { y = impl->ldlt.solve(x); };
}

namespace {

void orthonormalize(Matrix& x)
{
    Eigen::HouseholderQR<Matrix> qr(x);
    Matrix q = qr.householderQ() * Matrix::Identity(x.rows(), x.cols());
    x = q;
}

}  // namespace

Eigenpairs lowest_eigenpairs(const SparseMatrix& a, int k, double shift, const SolverOptions& opts)
{
    const Index n = a.rows();
    if (k < 1 || k > n)
        throw SolverError("lowest_eigenpairs: invalid eigenpair count");
    if (n <= 400) {
        Eigenpairs all = dense_eigenpairs(Matrix(a));
        Eigenpairs out;
        out.values = all.values.head(k);
        out.vectors = all.vectors.leftCols(k);
        out.residuals = all.residuals.head(k);
        return out;
    }
    const int p = static_cast<int>(std::min<Index>(n, std::max(2 * k, k + 8)));
    ShiftedInverse inv(a, -shift);
    if (inv.negative_pivots() > 0) {
        std::ostringstream msg;
        msg << "lowest_eigenpairs: shift " << shift << " is not below the spectrum ("
            << inv.negative_pivots() << " eigenvalues lie below it)";
        throw SolverError(msg.str());
    }

    Matrix x(n, p);
    for (int j = 0; j < p; ++j)
        x.col(j) = seeded_vector(n, opts.seed + static_cast<std::uint64_t>(j));
    orthonormalize(x);

    Eigenpairs out;
    Vector res(k);
    for (int it = 1; it <= opts.max_iterations; ++it) {
        Matrix y(n, p);
        for (int j = 0; j < p; ++j)
            y.col(j) = inv.solve(x.col(j));
        orthonormalize(y);
        Matrix ay = a * y;
        Matrix h = y.transpose() * ay;
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        x = y * es.eigenvectors();
        Matrix ax = ay * es.eigenvectors();
        const Vector& theta = es.eigenvalues();
        double scale = 1.0;
        for (int j = 0; j < k; ++j)
            scale = std::max(scale, std::abs(theta[j]));
        bool done = true;
        for (int j = 0; j < k; ++j) {
            res[j] = (ax.col(j) - theta[j] * x.col(j)).norm();
            if (res[j] > opts.tol * scale)
                done = false;
        }
        if (done || it == opts.max_iterations) {
            out.values = theta.head(k);
            out.vectors = x.leftCols(k);
            out.residuals = res;
            out.iterations = it;
            if (!done) {
                std::ostringstream msg;
                msg << "lowest_eigenpairs: no convergence after " << it << " iterations; residuals";
                for (int j = 0; j < k; ++j)
                    msg << ' ' << res[j];
                throw SolverError(msg.str(), std::vector<double>(res.data(), res.data() + k));
            }
            break;
        }
    }
    return out;
}

Eigenpairs dense_eigenpairs(const Matrix& a)
{
    Matrix s = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success)
        throw SolverError("dense_eigenpairs: eigensolver failed");
    Eigenpairs out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    out.residuals.resize(out.values.size());
    for (Index j = 0; j < out.values.size(); ++j)
        out.residuals[j] = (a * out.vectors.col(j) - out.values[j] * out.vectors.col(j)).norm();
    return out;
}

NormEstimate symmetric_norm(const LinearMap& op, Index dim, const SolverOptions& opts)
{
    NormEstimate est;
    if (dim == 0)
        return est;
    const int max_steps = static_cast<int>(std::min<Index>(dim, std::max(opts.max_iterations, 2)));
    Matrix q(dim, std::min(max_steps, 64));
    std::vector<double> alpha, beta;
    Vector v = seeded_vector(dim, opts.seed);
    v /= v.norm();
    Vector w(dim);
    const int check_every = 4;

    auto ritz_extremes = [&](int m, double& lo, double& hi, double& res_lo, double& res_hi) {
        Vector diag(m), sub(std::max(m - 1, 0));
        for (int i = 0; i < m; ++i)
            diag[i] = alpha[i];
        for (int i = 0; i + 1 < m; ++i)
            sub[i] = beta[i];
        Eigen::SelfAdjointEigenSolver<Matrix> es;
        es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        const Vector& th = es.eigenvalues();
        const double b = beta[m - 1];
        lo = th[0];
        hi = th[m - 1];
        res_lo = std::abs(b * es.eigenvectors()(m - 1, 0));
        res_hi = std::abs(b * es.eigenvectors()(m - 1, m - 1));
    };

    for (int j = 0; j < max_steps; ++j) {
        if (j >= q.cols())
            q.conservativeResize(Eigen::NoChange, std::min<Index>(2 * q.cols(), max_steps));
        q.col(j) = v;
        op(v, w);
        const double a = v.dot(w);
        alpha.push_back(a);
        w -= a * v;
        if (j > 0)
            w -= beta[j - 1] * q.col(j - 1);
        for (int pass = 0; pass < 2; ++pass) {
            Vector c = q.leftCols(j + 1).transpose() * w;
            w -= q.leftCols(j + 1) * c;
        }
        const double b = w.norm();
        beta.push_back(b);
        const int m = j + 1;
        const bool invariant = b <= 1e-14 * std::max(1.0, std::abs(a));
        if (invariant || m % check_every == 0 || m == max_steps) {
            double lo, hi, rlo, rhi;
            ritz_extremes(m, lo, hi, rlo, rhi);
            const bool hi_dominant = std::abs(hi) >= std::abs(lo);
            const double scale = hi_dominant ? std::abs(hi) : std::abs(lo);
            const double r_dom = hi_dominant ? rhi : rlo;
            const double other = hi_dominant ? std::abs(lo) + rlo : std::abs(hi) + rhi;
            est.largest = hi;
            est.smallest = lo;
            est.value = scale;
            est.residual = r_dom;
            est.steps = m;
            // the other end only has to stay clear of the dominant one
            const bool settled = r_dom <= opts.tol * std::max(scale, opts.scale_floor) && other < scale;
            if (invariant || scale == 0.0 || settled)
                return est;
        }
        v = w / b;
    }
    std::ostringstream msg;
    msg << "symmetric_norm: Lanczos did not converge in " << max_steps
        << " steps; residual " << est.residual << " for norm " << est.value;
    throw SolverError(msg.str(), {est.residual});
}

double symmetry_defect(const SparseMatrix& a)
{
    SparseMatrix d = a - SparseMatrix(a.transpose());
    double m = 0.0;
    for (Index k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it)
            m = std::max(m, std::abs(it.value()));
    return m;
}

}  // namespace twistlab
