#include "twistlab/fit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

using namespace twistlab;

namespace {

const std::vector<double> eps{0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05};

}  // namespace

TEST(FitRate, ExactLinearLaw)
{
    std::vector<double> y;
    for (double e : eps)
        y.push_back(3.0 * e);
    const PowerFit f = fit_rate(eps, y);
    EXPECT_NEAR(f.exponent, 1.0, 1e-10);
    EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-9);
    EXPECT_LT(f.residual, 1e-12);
    EXPECT_EQ(f.points, 7);
    EXPECT_TRUE(f.warnings.empty());
}

TEST(FitRate, ExactQuadraticLaw)
{
    std::vector<double> y;
    for (double e : eps)
        y.push_back(e * e / 29.6);
    EXPECT_NEAR(fit_rate(eps, y).exponent, 2.0, 1e-10);
}

TEST(FitRate, ResidualIsRmsInLogSpace)
{
    const std::vector<double> x{1.0, 2.0, 4.0, 8.0};
    const std::vector<double> y{1.0, 2.0 * std::exp(0.1), 4.0 * std::exp(-0.1), 8.0};
    const PowerFit f = fit_rate(x, y);
    EXPECT_GT(f.residual, 0.0);
    EXPECT_LT(f.residual, 0.1);
}

TEST(FitRate, DropsNonpositiveValuesWithWarning)
{
    std::vector<double> y;
    for (double e : eps)
        y.push_back(e);
    y[2] = 0.0;
    y[4] = -1.0;
    const PowerFit f = fit_rate(eps, y);
    EXPECT_EQ(f.points, 5);
    EXPECT_EQ(f.warnings.size(), 2u);
    EXPECT_NEAR(f.exponent, 1.0, 1e-10);
}

TEST(FitRate, TooFewPointsIsAnError)
{
    EXPECT_THROW(fit_rate({0.1, 0.2}, {1.0, 2.0}), std::invalid_argument);
    EXPECT_THROW(fit_rate({0.1, 0.2, 0.3, 0.4}, {1.0, 0.0, -2.0, 3.0}), std::invalid_argument);
    EXPECT_THROW(fit_rate({0.1, 0.2, 0.3}, {1.0, 2.0}), std::invalid_argument);
}

TEST(FitPolynomial, RecoversQuadratic)
{
    std::vector<double> y;
    for (double e : eps)
        y.push_back(0.75 - 2.0 * e + 0.5 * e * e);
    const PolynomialFit p = fit_polynomial(eps, y, 2);
    ASSERT_EQ(p.coefficients.size(), 3u);
    EXPECT_NEAR(p.coefficients[0], 0.75, 1e-12);
    EXPECT_NEAR(p.coefficients[1], -2.0, 1e-11);
    EXPECT_NEAR(p.coefficients[2], 0.5, 1e-10);
    EXPECT_LT(p.residual, 1e-13);
}

TEST(FitPolynomial, NeedsEnoughPoints)
{
    EXPECT_THROW(fit_polynomial({0.1, 0.2}, {1.0, 2.0}, 2), std::invalid_argument);
}
