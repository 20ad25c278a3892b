#pragma once

#include <string>
#include <vector>

namespace twistlab {

struct PowerFit {
    double exponent = 0.0;
    double intercept = 0.0;  // log of the prefactor
    double residual = 0.0;   // RMS deviation in log space
    int points = 0;
    std::vector<std::string> warnings;
};

// Least-squares line through (log x, log y). Points with nonpositive y are
// dropped with a warning; fewer than 3 remaining points is an error.
PowerFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);

struct PolynomialFit {
    std::vector<double> coefficients;  // c0 + c1 x + c2 x^2 + ...
    double residual = 0.0;              // RMS
};

PolynomialFit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree);

}  // namespace twistlab
