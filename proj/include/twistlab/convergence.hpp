#pragma once

#include "twistlab/eigensolver.hpp"
#include "twistlab/fit.hpp"
#include "twistlab/full_operator.hpp"
#include "twistlab/transverse.hpp"
#include "twistlab/twist.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace twistlab {

class SweepError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Tolerances {
    double solver = 1e-8;       // absolute scale for bound verdicts
    double lanczos = 1e-10;     // relative Ritz residual for norms and eigenpairs
    double quadrature = 1e-10;  // transverse quadrature (skew defect)
};

struct SweepConfig {
    std::vector<double> epsilons{0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05};
    CrossSectionSpec cross_section;
    TwistKind twist_kind = TwistKind::bump;
    TwistParams twist_params;
    double half_width = 12.0;
    int n_points = 1201;
    int min_support_intervals = 20;
    int n_modes = 6;
    double k2 = -1.0;
    Tolerances tol;
    int threads = 1;
    int positivity_samples = 100;
    int norm_max_steps = 1600;
    bool truncation_check = true;
};

struct TransverseData {
    CrossSectionGrid grid;
    std::vector<TransverseMode> modes;
    CouplingData coupling;
};

TransverseData compute_transverse(const CrossSectionSpec& spec, int n_modes, const Tolerances& tol);

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct Check {
    std::string name;
    Verdict verdict = Verdict::inconclusive;
    double measured = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    std::string detail;
};

// pass iff margin >= -slack; inconclusive when the solver residual exceeds
// both the slack and the size of the margin.
Check make_check(const std::string& name, double measured, double bound, double margin, double slack,
                 double residual, const std::string& detail = {});

struct SweepRow {
    double epsilon = 0.0;
    bool ok = false;
    std::string error;
    double lambda0_full = 0.0;
    double lambda0_h_eps = 0.0;
    double lambda0_control = 0.0;
    double gap1 = 0.0;
    double gap2 = 0.0;
    double gap2_bound = 0.0;
    double gap3 = 0.0;
    double total_gap = 0.0;
    double total_gap_control = 0.0;
    double restricted_min = 0.0;
    double restricted_bound = 0.0;
    double positivity_min = 0.0;
    double m_ratio = 0.0;
    double m_identity_defect = 0.0;
    double u0 = 0.0;
    double symmetry_defect = 0.0;
    double max_residual = 0.0;  // largest solver residual in the row
};

struct RateResult {
    std::string name;
    PowerFit fit;
    bool available = false;
    double window_lo = 0.0;
    double window_hi = 0.0;
    bool in_window = false;
    std::string note;
};

struct ConvergenceReport {
    SweepConfig config;
    int n_points_used = 0;
    double e1 = 0.0;
    double e2 = 0.0;
    double c_omega = 0.0;
    double total_twist = 0.0;
    std::vector<double> energies;
    std::vector<SweepRow> rows;
    std::vector<RateResult> rates;
    double gap3_ratio = 0.0;  // gap3(eps_min) / gap3(2 eps_min); NaN without that pair
    bool lambda0_monotone = false;
    bool total_gap_decreasing = false;
    double lambda0_limit = 0.0;  // quadratic least-squares fit in eps, value at 0
    double lambda0_limit_residual = 0.0;
    double truncation_lambda0 = 0.0;       // smallest eps with M modes
    double truncation_lambda0_more = 0.0;  // smallest eps with M + 2 modes
    std::vector<Check> checks;
};

ConvergenceReport run_sweep(const SweepConfig& config);

// Per-row results for one epsilon; shared transverse data is read-only.
SweepRow sweep_row(const MixedBasis& basis, const TwistProfile& profile, double epsilon,
                   const SweepConfig& config);

std::vector<Check> bound_checks(const std::vector<SweepRow>& rows, double e2_minus_e1, const Tolerances& tol);

void summarize(ConvergenceReport& report);

bool all_pass(const std::vector<Check>& checks);

}  // namespace twistlab
