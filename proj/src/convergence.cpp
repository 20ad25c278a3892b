#include "twistlab/convergence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace twistlab {

TransverseData compute_transverse(const CrossSectionSpec& spec, int n_modes, const Tolerances& tol)
{
    TransverseData t;
    t.grid = build_cross_section(spec);
    SolverOptions opts;
    opts.tol = tol.lanczos;
    t.modes = solve_dirichlet_modes(t.grid, n_modes, opts);
    t.coupling = coupling_matrices(t.modes, t.grid, tol.quadrature);
    return t;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

Check make_check(const std::string& name, double measured, double bound, double margin, double slack,
                 double residual, const std::string& detail)
{
    Check c;
    c.name = name;
    c.measured = measured;
    c.bound = bound;
    c.margin = margin;
    c.detail = detail;
    if (!std::isfinite(margin))
        c.verdict = Verdict::inconclusive;
    else if (residual > slack && residual > std::abs(margin))
        c.verdict = Verdict::inconclusive;
    else
        c.verdict = margin >= -slack ? Verdict::pass : Verdict::fail;
    return c;
}

namespace {

Vector smooth_state(const MixedBasis& basis, std::uint64_t seed)
{
    const int M = basis.n_modes();
    const int K = 4;
    const Vector c = seeded_vector(K * M, seed);
    Vector v = Vector::Zero(basis.dimension());
    for (int i = 0; i < basis.grid.unknowns(); ++i) {
        const double x = basis.grid.x_unknown(i);
        for (int k = 0; k < K; ++k) {
            const double hk = hermite_function(k, x);
            for (int n = 0; n < M; ++n)
                v[basis.index(i, n)] += c[k * M + n] * hk;
        }
    }
    return v;
}

}  // namespace

SweepRow sweep_row(const MixedBasis& basis, const TwistProfile& profile, double epsilon,
                   const SweepConfig& config)
{
    SweepRow row;
    row.epsilon = epsilon;
    SolverOptions opts;
    opts.tol = config.tol.lanczos;
    SolverOptions nopts = opts;
    nopts.max_iterations = config.norm_max_steps;
    const double k2 = config.k2;
    const ScaledTwist twist = scaled_twist(profile, epsilon);
    const ScaledTwist untwisted = scaled_twist(make_profile(TwistKind::zero), epsilon);
    const Index dim = basis.dimension();

    const OperatorMatrix H = assemble_full(basis, twist);
    const OperatorMatrix H0 = assemble_intermediate(basis, twist);
    const OperatorMatrix Hc = assemble_full(basis, untwisted);
    const OperatorMatrix he = assemble_h_eps(basis.grid, basis.coupling.c_omega, twist);
    row.symmetry_defect = std::max(symmetry_defect(H.matrix), symmetry_defect(H0.matrix));

    const Eigenpairs ev = lowest_eigenpairs(H, 1, opts);
    row.lambda0_full = ev.values[0];
    row.max_residual = ev.residuals[0];
    const Eigenpairs evc = lowest_eigenpairs(Hc, 1, opts);
    row.lambda0_control = evc.values[0];
    const Eigenpairs evh = lowest_eigenpairs(he.matrix, 1, -1.0, opts);
    row.lambda0_h_eps = evh.values[0];

    const ShiftedInverse rH(H.matrix, -k2);
    const ShiftedInverse rH0(H0.matrix, -k2);
    const ShiftedInverse rHc(Hc.matrix, -k2);
    const LinearMap rHe = embedded_mode1_resolvent(basis, he.matrix, k2);
    const LinearMap rD = embedded_dirichlet_resolvent(basis, k2);

    double res = 0.0;
    row.gap1 = resolvent_difference_norm(rH.as_map(), rH0.as_map(), dim, nopts, &res);
    row.max_residual = std::max(row.max_residual, res);
    row.gap2 = resolvent_difference_norm(rH0.as_map(), rHe, dim, nopts, &res);
    row.max_residual = std::max(row.max_residual, res);
    row.total_gap = resolvent_difference_norm(rH.as_map(), rD, dim, nopts, &res);
    row.max_residual = std::max(row.max_residual, res);
    row.total_gap_control = resolvent_difference_norm(rHc.as_map(), rD, dim, nopts, &res);
    row.max_residual = std::max(row.max_residual, res);
    {
        const ShiftedInverse r1(he.matrix, -k2);
        const LinearMap rd1 = dirichlet_embedded_resolvent(basis.grid, k2);
        row.gap3 = resolvent_difference_norm(r1.as_map(), rd1, basis.grid.unknowns(), nopts, &res);
        row.max_residual = std::max(row.max_residual, res);
    }
    const double de = basis.energies[1] - basis.energies[0];
    row.gap2_bound = epsilon * epsilon / de;

    const SparseMatrix upper = restrict_to_upper_modes(H);
    row.restricted_bound = de / (epsilon * epsilon);
    Eigenpairs evu;
    try {
        evu = lowest_eigenpairs(upper, 1, row.restricted_bound - 1.0, opts);
    } catch (const SolverError&) {
        SolverOptions slow = opts;
        slow.max_iterations = 4000;
        evu = lowest_eigenpairs(upper, 1, -1.0, slow);
    }
    row.restricted_min = evu.values[0];
    row.max_residual = std::max(row.max_residual, evu.residuals[0]);

    row.positivity_min = positivity_margin(H, config.positivity_samples, 0x9051717ULL);

    const Vector F = smooth_state(basis, 0xF00DULL);
    const Vector G = smooth_state(basis, 0x600DULL);
    const Vector phi = rH.solve(F);
    const Vector psi = rH0.solve(G);
    const FormDifference m = form_difference_m(basis, twist, phi, psi);
    const double h = basis.grid.h;
    row.m_ratio = std::abs(m.value) / (std::sqrt(h) * F.norm() * std::sqrt(h) * G.norm());
    row.m_identity_defect = m.identity_defect;
    row.u0 = std::abs(phi[basis.index(basis.grid.zero_unknown(), 0)]);
    row.ok = true;
    return row;
}

std::vector<Check> bound_checks(const std::vector<SweepRow>& rows, double e2_minus_e1, const Tolerances& tol)
{
    std::vector<Check> out;
    const double slack = 10.0 * tol.solver;
    for (const auto& r : rows) {
        std::ostringstream tag;
        tag << "eps=" << r.epsilon;
        if (!r.ok) {
            Check c;
            c.name = "row " + tag.str();
            c.verdict = Verdict::inconclusive;
            c.detail = r.error;
            out.push_back(c);
            continue;
        }
        const double bound2 = r.epsilon * r.epsilon / e2_minus_e1;
        out.push_back(make_check("step_two " + tag.str(), r.gap2, bound2, bound2 - r.gap2, slack,
                                 r.max_residual * r.gap2));
        out.push_back(make_check("positivity " + tag.str(), r.positivity_min, 1.0, r.positivity_min - 1.0,
                                 1e-10, 0.0));
        const double bound1 = e2_minus_e1 / (r.epsilon * r.epsilon);
        out.push_back(make_check("upper_modes " + tag.str(), r.restricted_min, bound1,
                                 r.restricted_min - bound1, slack * std::max(1.0, bound1),
                                 r.max_residual * r.restricted_min));
        const double sum = r.gap1 + r.gap2 + r.gap3;
        out.push_back(make_check("triangle " + tag.str(), r.total_gap, sum, sum - r.total_gap, slack,
                                 r.max_residual));
    }
    return out;
}

bool all_pass(const std::vector<Check>& checks)
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.verdict == Verdict::pass; });
}

namespace {

RateResult rate(const std::string& name, const std::vector<double>& eps, const std::vector<double>& v,
                double lo, double hi)
{
    RateResult r;
    r.name = name;
    r.window_lo = lo;
    r.window_hi = hi;
    try {
        r.fit = fit_rate(eps, v);
        r.available = true;
        r.in_window = r.fit.exponent >= lo && r.fit.exponent <= hi;
    } catch (const std::exception& e) {
        r.note = e.what();
    }
    return r;
}

}  // namespace

void summarize(ConvergenceReport& rep)
{
    std::vector<double> eps, g1, g2, g3, tot, mr, u0, lam;
    for (const auto& r : rep.rows) {
        if (!r.ok)
            continue;
        eps.push_back(r.epsilon);
        g1.push_back(r.gap1);
        g2.push_back(r.gap2);
        g3.push_back(r.gap3);
        tot.push_back(r.total_gap);
        mr.push_back(r.m_ratio);
        u0.push_back(r.u0);
        lam.push_back(r.lambda0_full);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.rates.clear();
    rep.rates.push_back(rate("gap1", eps, g1, 0.7, 1.3));
    rep.rates.push_back(rate("gap2", eps, g2, 1.6, 2.4));
    rep.rates.push_back(rate("gap3", eps, g3, 0.7, 1.3));
    rep.rates.push_back(rate("total_gap", eps, tot, 0.7, 1.3));
    rep.rates.push_back(rate("m_form", eps, mr, 0.7, 1.3));
    RateResult ur = rate("u0", eps, u0, -std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity());
    ur.note = "logged only";
    rep.rates.push_back(ur);

    rep.gap3_ratio = nan;
    if (!eps.empty()) {
        const std::size_t last = static_cast<std::size_t>(
            std::min_element(eps.begin(), eps.end()) - eps.begin());
        for (std::size_t i = 0; i < eps.size(); ++i)
            if (std::abs(eps[i] - 2.0 * eps[last]) <= 1e-12 * eps[i])
                rep.gap3_ratio = g3[last] / g3[i];
    }
    // rows are stored in decreasing epsilon order
    rep.lambda0_monotone = lam.size() >= 2;
    rep.total_gap_decreasing = tot.size() >= 2;
    for (std::size_t i = 1; i < lam.size(); ++i) {
        if (!(lam[i] >= lam[i - 1]))
            rep.lambda0_monotone = false;
        if (!(tot[i] < tot[i - 1]))
            rep.total_gap_decreasing = false;
    }
    rep.lambda0_limit = nan;
    rep.lambda0_limit_residual = nan;
    if (eps.size() >= 4) {
        const PolynomialFit pf = fit_polynomial(eps, lam, 2);
        rep.lambda0_limit = pf.coefficients[0];
        rep.lambda0_limit_residual = pf.residual;
    }
    rep.checks = bound_checks(rep.rows, rep.e2 - rep.e1, rep.config.tol);
}

ConvergenceReport run_sweep(const SweepConfig& config)
{
    if (config.epsilons.empty())
        throw SweepError("run_sweep: no epsilon values");
    ConvergenceReport rep;
    rep.config = config;
    std::vector<double> eps = config.epsilons;
    std::sort(eps.begin(), eps.end(), std::greater<>());

    const int extra = config.truncation_check ? 2 : 0;
    const TransverseData tr = compute_transverse(config.cross_section, config.n_modes + extra, config.tol);
    rep.e1 = tr.modes[0].energy;
    rep.e2 = tr.modes[1].energy;
    rep.c_omega = tr.coupling.c_omega;
    for (int n = 0; n < config.n_modes; ++n)
        rep.energies.push_back(tr.modes[static_cast<std::size_t>(n)].energy);

    const TwistProfile profile = make_profile(config.twist_kind, config.twist_params);
    rep.total_twist = profile.total_twist;
    int n_points = config.n_points;
    if (!profile.is_zero()) {
        const double width = eps.back() * (profile.support_hi - profile.support_lo);
        n_points = std::max(n_points, min_points_for_support(config.half_width, width, config.min_support_intervals));
    }
    if (n_points % 2 == 0)
        ++n_points;
    rep.n_points_used = n_points;
    const Line1DGrid grid = make_line_grid(config.half_width, n_points);
    const MixedBasis wide = make_mixed_basis(grid, tr.modes, tr.coupling, config.n_modes + extra);
    const MixedBasis basis = truncate_basis(wide, config.n_modes);

    rep.rows.resize(eps.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= eps.size())
                return;
            try {
                rep.rows[i] = sweep_row(basis, profile, eps[i], config);
            } catch (const std::exception& e) {
                SweepRow r;
                r.epsilon = eps[i];
                r.ok = false;
                r.error = e.what();
                rep.rows[i] = r;
            }
        }
    };
    const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(eps.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (std::none_of(rep.rows.begin(), rep.rows.end(), [](const SweepRow& r) { return r.ok; }))
        throw SweepError("run_sweep: every epsilon failed; first error: " + rep.rows.front().error);

    rep.truncation_lambda0 = std::numeric_limits<double>::quiet_NaN();
    rep.truncation_lambda0_more = std::numeric_limits<double>::quiet_NaN();
    if (config.truncation_check && rep.rows.back().ok) {
        SolverOptions opts;
        opts.tol = config.tol.lanczos;
        const ScaledTwist tw = scaled_twist(profile, eps.back());
        rep.truncation_lambda0 = rep.rows.back().lambda0_full;
        rep.truncation_lambda0_more = lowest_eigenpairs(assemble_full(wide, tw), 1, opts).values[0];
    }
    summarize(rep);
    return rep;
}

}  // namespace twistlab
