#include "twistlab/fit.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace twistlab {

PowerFit fit_rate(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("fit_rate: x and y differ in length");
    PowerFit fit;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(y[i] > 0.0) || !(x[i] > 0.0) || !std::isfinite(y[i])) {
            std::ostringstream msg;
            msg << "dropped point (" << x[i] << ", " << y[i] << "): nonpositive value";
            fit.warnings.push_back(msg.str());
            continue;
        }
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const std::size_t n = lx.size();
    if (n < 3)
        throw std::invalid_argument("fit_rate: fewer than 3 positive points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("fit_rate: x values are not distinct");
    fit.exponent = sxy / sxx;
    fit.intercept = my - fit.exponent * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - fit.intercept - fit.exponent * lx[i];
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    fit.points = static_cast<int>(n);
    return fit;
}

PolynomialFit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree)
{
    const int n = static_cast<int>(x.size());
    if (n != static_cast<int>(y.size()) || degree < 0 || n < degree + 1)
        throw std::invalid_argument("fit_polynomial: not enough points for the degree");
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        double p = 1.0;
        for (int k = 0; k <= degree; ++k) {
            a(i, k) = p;
            p *= x[i];
        }
        b[i] = y[i];
    }
    Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    PolynomialFit fit;
    fit.coefficients.assign(c.data(), c.data() + c.size());
    fit.residual = std::sqrt((a * c - b).squaredNorm() / n);
    return fit;
}

}  // namespace twistlab
