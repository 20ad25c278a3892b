#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twistlab {

class TwistError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class TwistKind { bump, spline, zero };

struct TwistParams {
    double amplitude = 1.0;         // bump
    std::vector<double> knots;      // spline, strictly increasing
    std::vector<double> values;     // spline values at the knots, zero at both ends
};

struct TwistProfile {
    TwistKind kind = TwistKind::zero;
    TwistParams params;
    double support_lo = 0.0;
    double support_hi = 0.0;
    std::function<double(double)> dtheta;
    std::function<double(double)> ddtheta;
    double total_twist = 0.0;  // integral of dtheta
    double l2_norm_sq = 0.0;   // integral of dtheta^2
    double max_ddtheta = 0.0;

    double support_radius() const;
    bool is_zero() const { return kind == TwistKind::zero; }
};

TwistProfile make_profile(TwistKind kind, const TwistParams& params = {});

std::string to_string(TwistKind kind);
TwistKind twist_kind_from_string(const std::string& name);

// sigma_eps(x) = dtheta(x / eps) / eps
struct ScaledTwist {
    TwistProfile profile;
    double epsilon = 1.0;

    double operator()(double x) const { return profile.dtheta(x / epsilon) / epsilon; }
    double support_lo() const { return epsilon * profile.support_lo; }
    double support_hi() const { return epsilon * profile.support_hi; }
    double support_width() const { return support_hi() - support_lo(); }
};

ScaledTwist scaled_twist(const TwistProfile& profile, double epsilon);

// Adaptive Gauss-Kronrod integral of f over [a, b].
double integrate(const std::function<double(double)>& f, double a, double b);

}  // namespace twistlab
