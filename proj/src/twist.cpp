#include "twistlab/twist.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace twistlab {

double TwistProfile::support_radius() const
{
    return std::max(std::abs(support_lo), std::abs(support_hi));
}

double integrate(const std::function<double(double)>& f, double a, double b)
{
    if (!(b > a))
        return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13, &err);
}

namespace {

// Clamped cubic spline with zero value and slope at both end knots.
struct ClampedSpline {
    std::vector<double> x, y, m;  // m: second derivatives at knots

    ClampedSpline(std::vector<double> knots, std::vector<double> vals)
        : x(std::move(knots)), y(std::move(vals))
    {
        const std::size_t n = x.size();
        std::vector<double> h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i)
            h[i] = x[i + 1] - x[i];
        // tridiagonal system for second derivatives with end slopes 0
        std::vector<double> a(n), b(n), c(n), d(n);
        b[0] = h[0] / 3.0;
        c[0] = h[0] / 6.0;
        d[0] = (y[1] - y[0]) / h[0];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            a[i] = h[i - 1] / 6.0;
            b[i] = (h[i - 1] + h[i]) / 3.0;
            c[i] = h[i] / 6.0;
            d[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
        }
        a[n - 1] = h[n - 2] / 6.0;
        b[n - 1] = h[n - 2] / 3.0;
        d[n - 1] = -(y[n - 1] - y[n - 2]) / h[n - 2];
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        m.assign(n, 0.0);
        m[n - 1] = d[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;)
            m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
    }

    std::size_t segment(double t) const
    {
        auto it = std::upper_bound(x.begin(), x.end(), t);
        std::size_t i = static_cast<std::size_t>(it - x.begin());
        return std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, x.size() - 2);
    }

    double value(double t) const
    {
        if (t <= x.front() || t >= x.back())
            return 0.0;
        const std::size_t i = segment(t);
        const double h = x[i + 1] - x[i];
        const double A = (x[i + 1] - t) / h, B = (t - x[i]) / h;
        return A * y[i] + B * y[i + 1] + ((A * A * A - A) * m[i] + (B * B * B - B) * m[i + 1]) * h * h / 6.0;
    }

    double derivative(double t) const
    {
        if (t <= x.front() || t >= x.back())
            return 0.0;
        const std::size_t i = segment(t);
        const double h = x[i + 1] - x[i];
        const double A = (x[i + 1] - t) / h, B = (t - x[i]) / h;
        return (y[i + 1] - y[i]) / h + ((1.0 - 3.0 * A * A) * m[i] + (3.0 * B * B - 1.0) * m[i + 1]) * h / 6.0;
    }
};

void validate_spline(const TwistParams& p)
{
    const auto& k = p.knots;
    const auto& v = p.values;
    if (k.size() < 3)
        throw TwistError("spline twist: at least 3 knots required");
    if (k.size() != v.size())
        throw TwistError("spline twist: knots and values differ in length");
    for (std::size_t i = 0; i < k.size(); ++i)
        if (!std::isfinite(k[i]) || !std::isfinite(v[i]))
            throw TwistError("spline twist: non-finite knot or value");
    const double span = k.back() - k.front();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        if (!(k[i + 1] > k[i]))
            throw TwistError("spline twist: knots must be strictly increasing");
        if (k[i + 1] - k[i] < 1e-9 * span)
            throw TwistError("spline twist: coincident knots give an unbounded second derivative");
    }
    if (v.front() != 0.0 || v.back() != 0.0)
        throw TwistError("spline twist: values at the end knots must be 0, otherwise the "
                         "profile jumps and its derivative is unbounded");
}

}  // namespace

TwistProfile make_profile(TwistKind kind, const TwistParams& params)
{
    TwistProfile p;
    p.kind = kind;
    p.params = params;
    switch (kind) {
    case TwistKind::zero:
        p.dtheta = [](double) { return 0.0; };
        p.ddtheta = [](double) { return 0.0; };
        return p;
    case TwistKind::bump: {
        const double A = params.amplitude;
        if (!std::isfinite(A))
            throw TwistError("bump twist: amplitude must be finite");
        p.support_lo = -1.0;
        p.support_hi = 1.0;
        p.dtheta = [A](double x) {
            if (std::abs(x) >= 1.0)
                return 0.0;
            return A * std::exp(-1.0 / (1.0 - x * x));
        };
        p.ddtheta = [A](double x) {
            if (std::abs(x) >= 1.0)
                return 0.0;
            const double d = 1.0 - x * x;
            return A * std::exp(-1.0 / d) * (-2.0 * x / (d * d));
        };
        break;
    }
    case TwistKind::spline: {
        validate_spline(params);
        auto s = std::make_shared<ClampedSpline>(params.knots, params.values);
        p.support_lo = params.knots.front();
        p.support_hi = params.knots.back();
        p.dtheta = [s](double x) { return s->value(x); };
        p.ddtheta = [s](double x) { return s->derivative(x); };
        break;
    }
    }
    const std::size_t pieces = kind == TwistKind::spline ? params.knots.size() - 1 : 1;
    for (std::size_t i = 0; i < pieces; ++i) {
        const double a = kind == TwistKind::spline ? params.knots[i] : p.support_lo;
        const double b = kind == TwistKind::spline ? params.knots[i + 1] : p.support_hi;
        p.total_twist += integrate(p.dtheta, a, b);
        p.l2_norm_sq += integrate([&](double x) { double t = p.dtheta(x); return t * t; }, a, b);
    }
    const int samples = 4001;
    for (int i = 0; i < samples; ++i) {
        const double x = p.support_lo + (p.support_hi - p.support_lo) * i / (samples - 1);
        p.max_ddtheta = std::max(p.max_ddtheta, std::abs(p.ddtheta(x)));
    }
    if (!std::isfinite(p.max_ddtheta) || p.max_ddtheta > 1e12)
        throw TwistError("twist profile: second derivative is unbounded");
    return p;
}

std::string to_string(TwistKind kind)
{
    switch (kind) {
    case TwistKind::bump: return "bump";
    case TwistKind::spline: return "spline";
    case TwistKind::zero: return "zero";
    }
    return "zero";
}

TwistKind twist_kind_from_string(const std::string& name)
{
    if (name == "bump")
        return TwistKind::bump;
    if (name == "spline")
        return TwistKind::spline;
    if (name == "zero")
        return TwistKind::zero;
    throw TwistError("unknown twist kind '" + name + "'");
}

ScaledTwist scaled_twist(const TwistProfile& profile, double epsilon)
{
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw TwistError("scaled twist: epsilon must be positive");
    return ScaledTwist{profile, epsilon};
}

}  // namespace twistlab
