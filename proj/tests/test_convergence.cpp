#include "twistlab/convergence.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace twistlab;

namespace {

SweepConfig small_config(TwistKind kind)
{
    SweepConfig c;
    c.epsilons = {0.8, 0.6, 0.4, 0.3};
    c.cross_section.resolution = 20;
    c.twist_kind = kind;
    c.half_width = 8.0;
    c.n_points = 401;
    c.n_modes = 3;
    c.positivity_samples = 10;
    c.truncation_check = false;
    return c;
}

const ConvergenceReport& bump_report()
{
    static const ConvergenceReport r = run_sweep(small_config(TwistKind::bump));
    return r;
}

SweepRow synthetic_row(double eps, double de)
{
    SweepRow r;
    r.epsilon = eps;
    r.ok = true;
    r.gap1 = 0.01 * eps;
    r.gap2 = 0.5 * eps * eps / de;
    r.gap3 = 0.3 * eps;
    r.total_gap = r.gap1 + r.gap2 + r.gap3 - 1e-6;
    r.positivity_min = 1.5;
    r.restricted_min = 2.0 * de / (eps * eps);
    r.lambda0_full = 0.75 - eps;
    r.m_ratio = r.gap1;
    r.u0 = eps;
    return r;
}

}  // namespace

TEST(Check, TriState)
{
    EXPECT_EQ(make_check("a", 1.0, 2.0, 1.0, 0.0, 0.0).verdict, Verdict::pass);
    EXPECT_EQ(make_check("a", 1.0, 2.0, -1e-9, 1e-8, 0.0).verdict, Verdict::pass);
    EXPECT_EQ(make_check("a", 1.0, 2.0, -1.0, 1e-8, 0.0).verdict, Verdict::fail);
    EXPECT_EQ(make_check("a", 1.0, 2.0, -1e-6, 1e-8, 1e-3).verdict, Verdict::inconclusive);
    EXPECT_EQ(make_check("a", 1.0, 2.0, std::nan(""), 1e-8, 0.0).verdict, Verdict::inconclusive);
    EXPECT_EQ(to_string(Verdict::pass), "pass");
    EXPECT_EQ(to_string(Verdict::fail), "fail");
    EXPECT_EQ(to_string(Verdict::inconclusive), "inconclusive");
}

TEST(BoundChecks, SyntheticRowsPass)
{
    const double de = 29.6;
    std::vector<SweepRow> rows;
    for (double e : {0.4, 0.2, 0.1})
        rows.push_back(synthetic_row(e, de));
    const std::vector<Check> c = bound_checks(rows, de, Tolerances{});
    EXPECT_EQ(c.size(), 12u);
    EXPECT_TRUE(all_pass(c));
}

TEST(BoundChecks, ViolationsFail)
{
    const double de = 29.6;
    std::vector<SweepRow> rows{synthetic_row(0.2, de), synthetic_row(0.1, de)};
    rows[0].gap2 = 2.0 * 0.04 / de;
    rows[1].positivity_min = 0.9;
    SweepRow bad;
    bad.epsilon = 0.05;
    bad.error = "solver failed";
    rows.push_back(bad);
    const std::vector<Check> c = bound_checks(rows, de, Tolerances{});
    ASSERT_EQ(c.size(), 9u);
    EXPECT_EQ(c[0].verdict, Verdict::fail);
    EXPECT_EQ(c[0].name, "step_two eps=0.2");
    EXPECT_EQ(c[5].verdict, Verdict::fail);
    EXPECT_EQ(c[8].verdict, Verdict::inconclusive);
    EXPECT_EQ(c[8].detail, "solver failed");
    EXPECT_FALSE(all_pass(c));
}

TEST(Summarize, ExactPowerLaws)
{
    ConvergenceReport rep;
    rep.e1 = 10.0;
    rep.e2 = 39.6;
    for (double e : {0.4, 0.2, 0.1, 0.05})
        rep.rows.push_back(synthetic_row(e, 29.6));
    summarize(rep);
    ASSERT_EQ(rep.rates.size(), 6u);
    EXPECT_EQ(rep.rates[0].name, "gap1");
    EXPECT_NEAR(rep.rates[0].fit.exponent, 1.0, 1e-10);
    EXPECT_TRUE(rep.rates[0].in_window);
    EXPECT_NEAR(rep.rates[1].fit.exponent, 2.0, 1e-10);
    EXPECT_TRUE(rep.rates[1].in_window);
    EXPECT_EQ(rep.rates[5].note, "logged only");
    EXPECT_NEAR(rep.gap3_ratio, 0.5, 1e-14);
    EXPECT_TRUE(rep.lambda0_monotone);
    EXPECT_TRUE(rep.total_gap_decreasing);
    EXPECT_NEAR(rep.lambda0_limit, 0.75, 1e-12);
    EXPECT_TRUE(all_pass(rep.checks));
}

TEST(Summarize, MissingPairGivesNaNRatio)
{
    ConvergenceReport rep;
    rep.e1 = 10.0;
    rep.e2 = 39.6;
    for (double e : {0.4, 0.3, 0.25})
        rep.rows.push_back(synthetic_row(e, 29.6));
    summarize(rep);
    EXPECT_TRUE(std::isnan(rep.gap3_ratio));
    EXPECT_TRUE(std::isnan(rep.lambda0_limit));
}

TEST(Sweep, ZeroTwistStaysAtOscillatorGround)
{
    const ConvergenceReport rep = run_sweep(small_config(TwistKind::zero));
    ASSERT_EQ(rep.rows.size(), 4u);
    for (const SweepRow& r : rep.rows) {
        ASSERT_TRUE(r.ok) << r.error;
        EXPECT_NEAR(r.lambda0_full, 0.25, 5e-4);
        EXPECT_NEAR(r.lambda0_full, r.lambda0_control, 1e-10);
        EXPECT_EQ(r.gap1, 0.0);
        EXPECT_NEAR(r.total_gap, rep.rows.front().total_gap, 1e-8);
    }
    EXPECT_EQ(rep.n_points_used, 401);
    EXPECT_TRUE(all_pass(rep.checks));
}

TEST(Sweep, BumpTwistConverges)
{
    const ConvergenceReport& rep = bump_report();
    ASSERT_EQ(rep.rows.size(), 4u);
    EXPECT_EQ(rep.n_points_used, min_points_for_support(8.0, 0.6, 20));
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const SweepRow& r = rep.rows[i];
        ASSERT_TRUE(r.ok) << r.error;
        EXPECT_GT(r.lambda0_full, 0.25);
        EXPECT_LE(r.total_gap, r.gap1 + r.gap2 + r.gap3 + 1e-7);
        EXPECT_LE(r.gap2, r.epsilon * r.epsilon / (rep.e2 - rep.e1) + 1e-7);
        EXPECT_GE(r.restricted_min, r.restricted_bound);
        EXPECT_GE(r.positivity_min, 1.0);
        EXPECT_LT(r.m_identity_defect, 1e-8);
        if (i > 0)
            EXPECT_LT(r.total_gap, rep.rows[i - 1].total_gap);
    }
    EXPECT_TRUE(rep.total_gap_decreasing);
    EXPECT_TRUE(rep.lambda0_monotone);
    EXPECT_TRUE(all_pass(rep.checks));
    EXPECT_NEAR(rep.gap3_ratio, rep.rows[3].gap3 / rep.rows[1].gap3, 1e-15);
}

TEST(Sweep, IsBitwiseDeterministic)
{
    SweepConfig c = small_config(TwistKind::bump);
    c.threads = 2;
    const ConvergenceReport again = run_sweep(c);
    const ConvergenceReport& ref = bump_report();
    for (std::size_t i = 0; i < ref.rows.size(); ++i) {
        EXPECT_EQ(again.rows[i].lambda0_full, ref.rows[i].lambda0_full);
        EXPECT_EQ(again.rows[i].gap1, ref.rows[i].gap1);
        EXPECT_EQ(again.rows[i].gap3, ref.rows[i].gap3);
        EXPECT_EQ(again.rows[i].total_gap, ref.rows[i].total_gap);
    }
}

TEST(Sweep, FailedRowsAreReported)
{
    SweepConfig c = small_config(TwistKind::bump);
    c.norm_max_steps = 3;
    EXPECT_THROW(run_sweep(c), SweepError);
    c.epsilons.clear();
    EXPECT_THROW(run_sweep(c), SweepError);
}
