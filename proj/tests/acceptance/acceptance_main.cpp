#include "twistlab/cli_io.hpp"
#include "twistlab/convergence.hpp"
#include "twistlab/krein.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

using namespace twistlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
    std::vector<std::string> details;
};

std::string num(double v) { return format_number(v); }

const char* supplementary_config = "{\n  \"twist\": {\"amplitude\": 3}\n}\n";

ConvergenceReport load_report(const fs::path& dir)
{
    const fs::path p = dir / "sweep_report.json";
    if (!fs::exists(p))
        throw std::runtime_error(p.string() + " missing; run with --prepare-sweep first");
    return report_from_json(Json::parse(read_file(p)));
}

std::vector<const SweepRow*> ok_rows(const ConvergenceReport& rep)
{
    std::vector<const SweepRow*> out;
    for (const auto& r : rep.rows)
        if (r.ok)
            out.push_back(&r);
    return out;
}

const TransverseData& default_transverse()
{
    static const TransverseData t = compute_transverse(CrossSectionSpec{}, 6, Tolerances{});
    return t;
}

Outcome criterion_1()
{
    const ExtrapolatedSpectrum free = extrapolated_spectrum(12.0, 1201, 1, false);
    const ExtrapolatedSpectrum dir = extrapolated_spectrum(12.0, 1201, 1, true);
    const double l0 = free.extrapolated[0], l0d = dir.extrapolated[0];
    const double ratio = l0d / l0;
    Outcome o;
    o.pass = std::abs(ratio - 3.0) <= 1e-5 && std::abs(l0 - 0.25) <= 1e-6 && std::abs(l0d - 0.75) <= 1e-6;
    o.summary = "Dirichlet ratio " + num(ratio) + " (lambda0 " + num(l0) + ", Dirichlet " + num(l0d) + ")";
    o.details.push_back("raw n=1201 values " + num(free.coarse[0]) + " and " + num(dir.coarse[0]) +
                        "; Richardson with n=2401");
    return o;
}

Outcome criterion_2()
{
    const TransverseData& t = default_transverse();
    const Line1DGrid grid = make_line_grid(12.0, 1201);
    const MixedBasis basis = make_mixed_basis(grid, t.modes, t.coupling, 6);
    const TwistProfile zero = make_profile(TwistKind::zero);
    Outcome o;
    o.pass = true;
    double worst = 0.0;
    for (double eps : {0.4, 0.1, 0.05}) {
        const double l0 = lowest_eigenpairs(assemble_full(basis, scaled_twist(zero, eps)), 1).values[0];
        worst = std::max(worst, std::abs(l0 - 0.25));
        o.details.push_back("eps " + num(eps) + ": lambda0 " + num(l0));
        if (std::abs(l0 - 0.25) > 5e-4)
            o.pass = false;
    }
    o.summary = "untwisted lambda0 within " + num(worst) + " of 0.25 (limit 5e-4)";
    return o;
}

Outcome criterion_3(const fs::path& work)
{
    const ConvergenceReport rep = load_report(work / "sweep");
    const auto rows = ok_rows(rep);
    Outcome o;
    const double last = rows.empty() ? std::nan("") : rows.back()->lambda0_full;
    const bool limit_ok = rep.lambda0_limit >= 0.70 && rep.lambda0_limit <= 0.80;
    o.pass = rows.size() == rep.rows.size() && rep.lambda0_monotone && last > 0.6 && limit_ok;
    o.summary = std::string("lambda0 monotone ") + (rep.lambda0_monotone ? "yes" : "no") + ", final " + num(last) +
                " (needs > 0.6), quadratic limit " + num(rep.lambda0_limit) + " (needs [0.7, 0.8])";
    for (const SweepRow* r : rows)
        o.details.push_back("eps " + num(r->epsilon) + ": lambda0 " + num(r->lambda0_full));
    const fs::path extra = work / "sweep_a3";
    if (fs::exists(extra / "sweep_report.json")) {
        const ConvergenceReport a3 = load_report(extra);
        for (const SweepRow* r : ok_rows(a3))
            o.details.push_back("info: amplitude 3, eps " + num(r->epsilon) + ": lambda0 " + num(r->lambda0_full));
        o.details.push_back("info: amplitude 3 quadratic limit " + num(a3.lambda0_limit));
    }
    return o;
}

Outcome criterion_4(const fs::path& work)
{
    const ConvergenceReport rep = load_report(work / "sweep");
    const double de = 3.0 * std::numbers::pi * std::numbers::pi;
    const double slack = 10.0 * rep.config.tol.solver;
    Outcome o;
    o.pass = !rep.rows.empty();
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows) {
        if (!r.ok) {
            o.pass = false;
            o.details.push_back("eps " + num(r.epsilon) + ": row failed: " + r.error);
            continue;
        }
        const double bound = r.epsilon * r.epsilon / de;
        worst = std::max(worst, r.gap2 - bound);
        if (r.gap2 > bound + slack)
            o.pass = false;
        o.details.push_back("eps " + num(r.epsilon) + ": gap " + num(r.gap2) + ", bound " + num(bound) +
                            ", discrete bound " + num(r.gap2_bound));
    }
    o.summary = "largest excess over eps^2/(3 pi^2) is " + num(worst) + " (slack " + num(slack) + ")";
    return o;
}

Outcome criterion_5(const fs::path& work)
{
    const ConvergenceReport rep = load_report(work / "sweep");
    Outcome o;
    for (const auto& r : rep.rates)
        if (r.name == "gap1") {
            o.pass = r.available && r.in_window;
            o.summary = "fitted exponent " + (r.available ? num(r.fit.exponent) : std::string("n/a")) +
                        " (window [0.7, 1.3])";
        }
    for (const SweepRow* r : ok_rows(rep))
        o.details.push_back("eps " + num(r->epsilon) + ": gap " + num(r->gap1));
    if (fs::exists(work / "sweep_a3" / "sweep_report.json"))
        for (const auto& r : load_report(work / "sweep_a3").rates)
            if (r.name == "gap1" && r.available)
                o.details.push_back("info: amplitude 3 fitted exponent " + num(r.fit.exponent));
    return o;
}

Outcome criterion_6(const fs::path& work)
{
    const ConvergenceReport rep = load_report(work / "sweep");
    const auto rows = ok_rows(rep);
    bool decreasing = rows.size() >= 2;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i]->gap3 < rows[i - 1]->gap3))
            decreasing = false;
    Outcome o;
    o.pass = decreasing && rep.gap3_ratio <= 0.7;
    o.summary = std::string("decreasing ") + (decreasing ? "yes" : "no") + ", ratio at smallest pair " +
                num(rep.gap3_ratio) + " (needs <= 0.7)";
    for (const SweepRow* r : rows)
        o.details.push_back("eps " + num(r->epsilon) + ": gap " + num(r->gap3));
    if (fs::exists(work / "sweep_a3" / "sweep_report.json"))
        o.details.push_back("info: amplitude 3 ratio " + num(load_report(work / "sweep_a3").gap3_ratio));
    return o;
}

Outcome criterion_7()
{
    const TransverseData& t = default_transverse();
    const TwistProfile p = make_profile(TwistKind::bump);
    const Kernel2 kernel = [](double x, double y) { return continuum_green_h0(x, y, -1.0); };
    const LocalExpansion le = local_green_expansion(kernel);
    std::vector<BSKernelData> data;
    for (double e : {0.4, 0.2, 0.1, 0.05, 0.025})
        data.push_back(birman_schwinger(p, t.coupling.c_omega, e, kernel, le, 400));
    const ExpansionTable table = expansion_residuals(data);
    Outcome o;
    o.pass = table.fit0.exponent >= 0.8 && table.fit0.exponent <= 1.2 && table.fit1.exponent >= 1.6 &&
             table.fit1.exponent <= 2.4;
    o.summary = "slopes " + num(table.fit0.exponent) + " (window [0.8, 1.2]) and " + num(table.fit1.exponent) +
                " (window [1.6, 2.4])";
    for (const auto& r : table.rows)
        o.details.push_back("eps " + num(r.epsilon) + ": " + num(r.residual0) + ", " + num(r.residual1));
    return o;
}

Outcome criterion_8()
{
    const TransverseData& t = default_transverse();
    const TwistProfile bump = make_profile(TwistKind::bump);
    Outcome o;
    o.pass = true;
    auto record = [&](const std::string& name, bool ok, const std::string& detail) {
        o.details.push_back(std::string(ok ? "pass" : "FAIL") + ": " + name + " (" + detail + ")");
        if (!ok)
            o.pass = false;
    };

    const Matrix& D = t.coupling.D;
    const double skew = (D + D.transpose()).cwiseAbs().maxCoeff();
    record("D skew with D11 = 0", skew <= 1e-10 && D(0, 0) == 0.0,
           "skew defect " + num(skew) + ", raw " + num(t.coupling.raw_skew_defect));

    const double de = t.modes[1].energy - t.modes[0].energy;
    for (double eps : {0.4, 0.1}) {
        const Line1DGrid grid = make_line_grid(12.0, std::max(1201, min_points_for_support(12.0, 2.0 * eps, 20)));
        const MixedBasis basis = make_mixed_basis(grid, t.modes, t.coupling, 6);
        const ScaledTwist tw = scaled_twist(bump, eps);
        const OperatorMatrix h = assemble_full(basis, tw);
        const std::string tag = " at eps " + num(eps);
        const double sym = symmetry_defect(h.matrix);
        record("matrix symmetry" + tag, sym <= 1e-12, "defect " + num(sym));
        const double pos = positivity_margin(h, 100, 0x9051717ULL);
        record("positivity" + tag, pos >= 1.0 - 1e-10, "min quotient " + num(pos));

        const SparseMatrix upper = restrict_to_upper_modes(h);
        const double bound = de / (eps * eps);
        Eigenpairs ev;
        try {
            ev = lowest_eigenpairs(upper, 1, bound - 1.0);
        } catch (const SolverError&) {
            SolverOptions slow;
            slow.max_iterations = 4000;
            ev = lowest_eigenpairs(upper, 1, -1.0, slow);
        }
        record("upper-mode lower bound" + tag, ev.values[0] >= bound - 1e-7 * bound,
               "Ritz value " + num(ev.values[0]) + ", bound " + num(bound));

        Vector phi = Vector::Zero(basis.dimension());
        for (int i = 0; i < grid.unknowns(); ++i)
            phi[basis.index(i, 0)] = hermite_function(0, grid.x_unknown(i));
        const FormDifference f = form_difference_m(basis, tw, phi, phi);
        record("ground-mode cancellation" + tag, std::abs(f.value) <= 1e-10 * std::max(1.0, f.potential),
               "residual " + num(f.value) + " against potential term " + num(f.potential));
    }

    const Line1DGrid grid = make_line_grid(12.0, 1201);
    const GreenKernel dk = dirichlet_green_kernel(GreenKernel::for_h0(grid, -1.0));
    const LinearMap rd = dirichlet_embedded_resolvent(grid, -1.0);
    double kerr = 0.0;
    for (int j = 1; j < grid.n_points - 1; j += 37) {
        Vector e = Vector::Zero(grid.unknowns());
        e[j - 1] = 1.0 / grid.h;
        Vector y;
        rd(e, y);
        kerr = std::max(kerr, (dk.column(j).segment(1, grid.unknowns()) - y).cwiseAbs().maxCoeff());
    }
    record("Krein kernel against constrained inverse", kerr <= 1e-6, "max difference " + num(kerr));

    double ierr = 0.0;
    for (double eps : {0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05, 0.025}) {
        const ScaledTwist s = scaled_twist(bump, eps);
        ierr = std::max(ierr, std::abs(integrate([&](double x) { return s(x); }, s.support_lo(), s.support_hi()) -
                                       bump.total_twist));
    }
    record("integral of the scaled twist", ierr <= 1e-10, "max deviation " + num(ierr));
    int passed = 0;
    for (const auto& d : o.details)
        passed += d.rfind("pass", 0) == 0 ? 1 : 0;
    o.summary = std::to_string(passed) + " of " + std::to_string(o.details.size()) + " structural checks pass";
    return o;
}

Outcome criterion_9()
{
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double exact[] = {5 * pi2, 8 * pi2, 13 * pi2};
    std::vector<double> err[2];
    int k = 0;
    for (double res : {40.0, 80.0}) {
        CrossSectionSpec s;
        s.resolution = res;
        const CrossSectionGrid g = build_cross_section(s);
        const auto modes = solve_dirichlet_modes(g, 3);
        for (int n = 0; n < 3; ++n)
            err[k].push_back(std::abs(modes[static_cast<std::size_t>(n)].energy - exact[n]));
        ++k;
    }
    Outcome o;
    o.pass = true;
    double lo = 1e300, hi = 0.0;
    for (int n = 0; n < 3; ++n) {
        const double ratio = err[0][static_cast<std::size_t>(n)] / err[1][static_cast<std::size_t>(n)];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        if (ratio < 3.5 || ratio > 4.5)
            o.pass = false;
        o.details.push_back("mode " + std::to_string(n + 1) + ": errors " + num(err[0][static_cast<std::size_t>(n)]) +
                            " and " + num(err[1][static_cast<std::size_t>(n)]) + ", ratio " + num(ratio));
    }
    o.summary = "error ratios between resolutions 40 and 80 lie in [" + num(lo) + ", " + num(hi) +
                "] (window [3.5, 4.5])";
    return o;
}

int prepare(const fs::path& work)
{
    std::ostringstream log;
    const DispatchResult r = dispatch(Command::sweep, parse_config("{}\n"), "{}\n", work / "sweep", log);
    std::cout << "default sweep written to " << (work / "sweep").string() << " (bound checks "
              << (r.exit_status == 0 ? "pass" : "do not all pass") << ")\n";
    const DispatchResult a3 = dispatch(Command::sweep, parse_config(supplementary_config), supplementary_config,
                                       work / "sweep_a3", log);
    std::cout << "amplitude 3 sweep written to " << (work / "sweep_a3").string() << " (bound checks "
              << (a3.exit_status == 0 ? "pass" : "do not all pass") << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    int criterion = 0;
    std::string work = "acceptance_work";
    bool prepare_sweep = false;
    app.add_option("--criterion", criterion, "run one criterion (1-9); all when omitted")
        ->check(CLI::Range(1, 9));
    app.add_option("--work", work, "directory for sweep data");
    app.add_flag("--prepare-sweep", prepare_sweep, "run the parameter sweeps used by criteria 3-6");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir(work);
    try {
        if (prepare_sweep)
            return prepare(dir);
        if (criterion == 0 && !fs::exists(dir / "sweep" / "sweep_report.json"))
            prepare(dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const std::map<int, std::function<Outcome()>> checks{
        {1, criterion_1},
        {2, criterion_2},
        {3, [&] { return criterion_3(dir); }},
        {4, [&] { return criterion_4(dir); }},
        {5, [&] { return criterion_5(dir); }},
        {6, [&] { return criterion_6(dir); }},
        {7, criterion_7},
        {8, criterion_8},
        {9, criterion_9},
    };
    bool all = true;
    for (const auto& [n, fn] : checks) {
        if (criterion != 0 && n != criterion)
            continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("error: ") + e.what();
        }
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.summary << "\n";
        for (const auto& d : o.details)
            std::cout << "    " << d << "\n";
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
