#include "twistlab/krein.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace twistlab;

namespace {

constexpr double r00_continuum = 0.49311251986477317;
constexpr double c_omega = 0.87034347440906035;

Kernel2 continuum_kernel()
{
    return [](double x, double y) { return continuum_green_h0(x, y, -1.0); };
}

const LocalExpansion& continuum_local()
{
    static const LocalExpansion le = local_green_expansion(continuum_kernel());
    return le;
}

}  // namespace

TEST(LocalExpansion, RecoversExactKink)
{
    const Kernel2 k = [](double x, double y) { return 0.3 - 0.7 * std::abs(x - y) + 0.2 * x * y + 0.4 * (x + y) * (x + y); };
    const LocalExpansion le = local_green_expansion(k);
    EXPECT_NEAR(le.a, 0.3, 1e-14);
    EXPECT_NEAR(le.b, -0.7, 1e-9);
    EXPECT_NEAR(le.slope_left, 0.7, 1e-9);
    EXPECT_NEAR(affine_patch_residual([](double x, double y) { return 1.0 + 2.0 * std::abs(x - y); }, 1.0, 2.0, 0.1),
                0.0, 1e-14);
}

TEST(LocalExpansion, ContinuumGreenFunction)
{
    const LocalExpansion& le = continuum_local();
    EXPECT_NEAR(le.a, r00_continuum, 1e-14);
    EXPECT_NEAR(le.b, -0.5, 1e-8);
    EXPECT_NEAR(le.slope_left, -le.b, 1e-8);
    for (double s : le.slope_estimates)
        EXPECT_NEAR(s, -0.5, 1e-2);
}

TEST(LocalExpansion, PatchResidualShrinksQuadratically)
{
    const LocalExpansion& le = continuum_local();
    const double r1 = affine_patch_residual(continuum_kernel(), le.a, le.b, 0.1);
    const double r2 = affine_patch_residual(continuum_kernel(), le.a, le.b, 0.05);
    EXPECT_GT(r1, 0.0);
    EXPECT_NEAR(r1 / r2, 4.0, 0.5);
}

TEST(BirmanSchwinger, ZeroProfileGivesIdentity)
{
    const BSKernelData d =
        birman_schwinger(make_profile(TwistKind::zero), c_omega, 0.1, continuum_kernel(), continuum_local(), 30);
    EXPECT_EQ(d.v_l1, 0.0);
    EXPECT_EQ((d.T - Matrix::Identity(30, 30)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.P.norm(), 0.0);
}

TEST(BirmanSchwinger, RejectsBadArguments)
{
    const TwistProfile p = make_profile(TwistKind::bump);
    EXPECT_THROW(birman_schwinger(p, c_omega, 0.0, continuum_kernel(), continuum_local(), 30),
                 std::invalid_argument);
    EXPECT_THROW(birman_schwinger(p, c_omega, 0.1, continuum_kernel(), continuum_local(), 2),
                 std::invalid_argument);
}

TEST(BirmanSchwinger, AlgebraicIdentities)
{
    const BSKernelData d =
        birman_schwinger(make_profile(TwistKind::bump), c_omega, 0.1, continuum_kernel(), continuum_local(), 80);
    const Matrix id = Matrix::Identity(80, 80);
    EXPECT_LT((d.P * d.P - d.P).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((d.P * d.Q).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((d.P + d.Q - id).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(d.P.trace(), 1.0, 1e-12);
    EXPECT_LT((d.t0 * (id + d.c * d.P) - id).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((d.T * (id + d.K) - id).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((d.T - d.T.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(d.asymmetry, 0.0);
    EXPECT_LE(d.t_norm, 1.0 + 1e-10);
    EXPECT_NEAR(d.t_norm, spectral_norm(d.T), 1e-15);
    EXPECT_NEAR(d.c, d.a * d.v_l1, 1e-15);
    EXPECT_NEAR(d.v_l1, d.s.squaredNorm(), 1e-12);
}

TEST(BirmanSchwinger, KernelScalingOnRandomPairs)
{
    const double eps = 0.2;
    const BSKernelData d =
        birman_schwinger(make_profile(TwistKind::bump), c_omega, eps, continuum_kernel(), continuum_local(), 60);
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<int> pick(0, 59);
    for (int k = 0; k < 100; ++k) {
        const int i = pick(gen), j = pick(gen);
        const double expect = d.s[i] * continuum_green_h0(eps * d.nodes[i], eps * d.nodes[j], -1.0) * d.s[j];
        EXPECT_NEAR(d.K(i, j), expect, 1e-15);
        EXPECT_NEAR(d.M1(i, j), d.b * d.s[i] * std::abs(d.nodes[i] - d.nodes[j]) * d.s[j], 1e-15);
    }
}

TEST(BirmanSchwinger, ProjectorScalesWithAmplitude)
{
    const Kernel2 k = continuum_kernel();
    const BSKernelData d1 = birman_schwinger(make_profile(TwistKind::bump, {1.0, {}, {}}), c_omega, 0.1, k,
                                             continuum_local(), 40);
    const BSKernelData d2 = birman_schwinger(make_profile(TwistKind::bump, {2.0, {}, {}}), c_omega, 0.1, k,
                                             continuum_local(), 40);
    EXPECT_NEAR(d2.v_l1, 4.0 * d1.v_l1, 1e-12);
    EXPECT_LT((d1.P - d2.P).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Expansion, ResidualSlopes)
{
    const TwistProfile p = make_profile(TwistKind::bump);
    std::vector<BSKernelData> data;
    for (double e : {0.4, 0.2, 0.1, 0.05})
        data.push_back(birman_schwinger(p, c_omega, e, continuum_kernel(), continuum_local(), 150));
    const ExpansionTable t = expansion_residuals(data);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_GT(t.fit0.exponent, 0.8);
    EXPECT_LT(t.fit0.exponent, 1.2);
    EXPECT_GT(t.fit1.exponent, 1.6);
    EXPECT_LT(t.fit1.exponent, 2.4);
    for (const ExpansionRow& r : t.rows) {
        EXPECT_LT(r.residual1, r.residual0);
        EXPECT_LE(r.t_norm, 1.0 + 1e-10);
        if (std::isfinite(r.neumann_bound))
            EXPECT_LE(r.neumann_gap, r.neumann_bound * (1.0 + 1e-9) + 1e-14);
    }
    EXPECT_TRUE(std::isfinite(t.rows.back().neumann_bound));
    // T is not close to Q + P / c
    EXPECT_GT(t.rows.back().residual_p_over_c, 10.0 * t.rows.back().residual0);
}

TEST(Expansion, NeedsThreeEpsilons)
{
    const TwistProfile p = make_profile(TwistKind::bump);
    std::vector<BSKernelData> data;
    for (double e : {0.4, 0.2})
        data.push_back(birman_schwinger(p, c_omega, e, continuum_kernel(), continuum_local(), 20));
    EXPECT_THROW(expansion_residuals(data), std::invalid_argument);
}

TEST(Lemma, LimitsDecrease)
{
    const LemmaVerdict v = lemma_limits(make_profile(TwistKind::bump), {0.4, 0.2, 0.1});
    ASSERT_EQ(v.rows.size(), 3u);
    EXPECT_TRUE(v.projected_decreasing);
    EXPECT_TRUE(v.full_decreasing);
    EXPECT_TRUE(v.complement_decreasing);
    EXPECT_NEAR(v.rows[0].projected, 9.49e-3, 1e-4);
    EXPECT_NEAR(v.rows[2].complement, 1.61e-2, 1e-3);
    EXPECT_GT(v.fit_projected.exponent, 1.3);
    // the complement part is O(eps) with ratio tending to 1/2
    EXPECT_GT(v.fit_complement.exponent, 0.8);
    EXPECT_LT(v.fit_complement.exponent, 1.1);
    EXPECT_NEAR(v.complement_ratio, 0.52, 0.03);
}

TEST(Lemma, RejectsBadInput)
{
    EXPECT_THROW(lemma_limits(make_profile(TwistKind::bump), {0.4, 0.2}), std::invalid_argument);
    EXPECT_THROW(lemma_limits(make_profile(TwistKind::zero), {0.4, 0.2, 0.1}), std::invalid_argument);
}
