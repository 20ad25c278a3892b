#include "twistlab/cli_io.hpp"

#include "twistlab/krein.hpp"
#include "twistlab/oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace twistlab {

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += sep;
        out += v[i];
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument("invalid configuration: " + join(violations, "; ")),
      violations_(std::move(violations))
{
}

namespace {

// Reads typed members of one JSON object, recording violations instead of
// throwing, and remembers which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const Json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors)
    {
    }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return obj_.contains(key);
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void number(const std::string& key, double& out)
    {
        if (!has(key))
            return;
        const Json& v = obj_.at(key);
        if (!v.is_number()) {
            errors_.push_back(where(key) + ": expected a number");
            return;
        }
        out = v.get<double>();
        if (!std::isfinite(out))
            errors_.push_back(where(key) + ": must be finite");
    }

    void integer(const std::string& key, int& out)
    {
        if (!has(key))
            return;
        const Json& v = obj_.at(key);
        if (!v.is_number_integer()) {
            errors_.push_back(where(key) + ": expected an integer");
            return;
        }
        const auto x = v.get<long long>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
            errors_.push_back(where(key) + ": integer out of range");
            return;
        }
        out = static_cast<int>(x);
    }

    void boolean(const std::string& key, bool& out)
    {
        if (!has(key))
            return;
        const Json& v = obj_.at(key);
        if (!v.is_boolean()) {
            errors_.push_back(where(key) + ": expected true or false");
            return;
        }
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out)
    {
        if (!has(key))
            return;
        const Json& v = obj_.at(key);
        if (!v.is_string()) {
            errors_.push_back(where(key) + ": expected a string");
            return;
        }
        out = v.get<std::string>();
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (!has(key))
            return;
        const Json& v = obj_.at(key);
        if (!v.is_array()) {
            errors_.push_back(where(key) + ": expected an array of numbers");
            return;
        }
        std::vector<double> tmp;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                errors_.push_back(where(key) + ": expected an array of finite numbers");
                return;
            }
            tmp.push_back(e.get<double>());
        }
        out = tmp;
    }

    void point(const std::string& key, Point2& out)
    {
        if (!has(key))
            return;
        const Json& v = obj_.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            errors_.push_back(where(key) + ": expected [x, y]");
            return;
        }
        out = {v[0].get<double>(), v[1].get<double>()};
    }

    const Json* object(const std::string& key)
    {
        if (!has(key))
            return nullptr;
        const Json& v = obj_.at(key);
        if (!v.is_object()) {
            errors_.push_back(where(key) + ": expected an object");
            return nullptr;
        }
        return &v;
    }

    const Json& raw(const std::string& key)
    {
        seen_.insert(key);
        return obj_.at(key);
    }

    void reject_unknown()
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key()))
                errors_.push_back(where(it.key()) + ": unknown key");
    }

private:
    const Json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

void check_decreasing(const std::vector<double>& eps, const std::string& name, std::size_t min_count,
                      std::vector<std::string>& errors)
{
    if (eps.size() < min_count)
        errors.push_back(name + ": at least " + std::to_string(min_count) + " values required");
    for (double e : eps)
        if (!(e > 0.0) || e > 1.0) {
            errors.push_back(name + ": values must lie in (0, 1]");
            break;
        }
    for (std::size_t i = 1; i < eps.size(); ++i)
        if (!(eps[i] < eps[i - 1])) {
            errors.push_back(name + ": values must be distinct and strictly decreasing");
            break;
        }
}

void read_cross_section(const Json& obj, RunConfig& cfg, bool override_square, std::vector<std::string>& errors)
{
    ObjectReader r(obj, "cross_section", errors);
    CrossSectionSpec& s = cfg.cross_section;
    std::string kind = "rectangle";
    r.string("kind", kind);
    if (kind == "rectangle")
        s.kind = CrossSectionSpec::Kind::rectangle;
    else if (kind == "polygon")
        s.kind = CrossSectionSpec::Kind::polygon;
    else
        errors.push_back("cross_section.kind: expected \"rectangle\" or \"polygon\"");
    r.number("a", s.a);
    r.number("b", s.b);
    r.number("resolution", s.resolution);
    r.point("axis_offset", s.axis_offset);
    r.boolean("allow_square", s.allow_square);
    if (r.has("vertices")) {
        const Json& v = r.raw("vertices");
        bool ok = v.is_array();
        std::vector<Point2> pts;
        if (ok)
            for (const auto& p : v) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                    ok = false;
                    break;
                }
                pts.push_back({p[0].get<double>(), p[1].get<double>()});
            }
        if (!ok)
            errors.push_back("cross_section.vertices: expected an array of [x, y] pairs");
        else
            s.vertices = pts;
    }
    r.reject_unknown();
    if (override_square)
        s.allow_square = true;
    if (s.kind == CrossSectionSpec::Kind::rectangle && !s.vertices.empty())
        errors.push_back("cross_section.vertices: only valid for kind \"polygon\"");
    try {
        validate_cross_section(s);
    } catch (const GeometryError& e) {
        errors.push_back(std::string("cross_section: ") + e.what());
    }
}

void read_twist(const Json& obj, RunConfig& cfg, std::vector<std::string>& errors)
{
    ObjectReader r(obj, "twist", errors);
    std::string kind = to_string(cfg.twist_kind);
    r.string("kind", kind);
    try {
        cfg.twist_kind = twist_kind_from_string(kind);
    } catch (const std::exception&) {
        errors.push_back("twist.kind: expected \"bump\", \"spline\" or \"zero\"");
        return;
    }
    r.number("amplitude", cfg.twist_params.amplitude);
    r.numbers("knots", cfg.twist_params.knots);
    r.numbers("values", cfg.twist_params.values);
    r.reject_unknown();
    try {
        (void)make_profile(cfg.twist_kind, cfg.twist_params);
    } catch (const std::exception& e) {
        errors.push_back(std::string("twist: ") + e.what());
    }
}

}  // namespace

RunConfig parse_config(const std::string& text, bool override_square)
{
    Json doc;
    try {
        doc = Json::parse(text, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError({std::string("syntax error: ") + e.what()});
    }
    if (!doc.is_object())
        throw ConfigError({"top level: expected a JSON object"});

    RunConfig cfg;
    std::vector<std::string> errors;
    ObjectReader top(doc, "", errors);

    if (const Json* cs = top.object("cross_section"))
        read_cross_section(*cs, cfg, override_square, errors);
    else {
        if (override_square)
            cfg.cross_section.allow_square = true;
    }
    if (const Json* tw = top.object("twist"))
        read_twist(*tw, cfg, errors);
    if (const Json* g = top.object("grid")) {
        ObjectReader r(*g, "grid", errors);
        r.number("half_width", cfg.half_width);
        r.integer("n_points", cfg.n_points);
        r.integer("min_support_intervals", cfg.min_support_intervals);
        r.reject_unknown();
    }
    top.integer("modes", cfg.n_modes);
    top.numbers("epsilons", cfg.epsilons);
    top.number("shift", cfg.k2);
    if (const Json* t = top.object("tolerances")) {
        ObjectReader r(*t, "tolerances", errors);
        r.number("solver", cfg.tol.solver);
        r.number("lanczos", cfg.tol.lanczos);
        r.number("quadrature", cfg.tol.quadrature);
        r.reject_unknown();
    }
    if (const Json* k = top.object("krein")) {
        ObjectReader r(*k, "krein", errors);
        r.numbers("epsilons", cfg.krein.epsilons);
        r.integer("nodes", cfg.krein.nodes);
        r.numbers("lemma_epsilons", cfg.krein.lemma_epsilons);
        r.reject_unknown();
    }
    if (const Json* s = top.object("spectrum")) {
        ObjectReader r(*s, "spectrum", errors);
        r.integer("count", cfg.spectrum_count);
        r.reject_unknown();
    }
    if (const Json* s = top.object("sweep")) {
        ObjectReader r(*s, "sweep", errors);
        r.integer("positivity_samples", cfg.positivity_samples);
        r.integer("norm_max_steps", cfg.norm_max_steps);
        r.boolean("truncation_check", cfg.truncation_check);
        r.reject_unknown();
    }
    top.integer("threads", cfg.threads);
    top.string("output_dir", cfg.output_dir);
    top.reject_unknown();

    if (!(cfg.half_width > 0.0))
        errors.push_back("grid.half_width: must be positive");
    if (cfg.n_points < 5 || cfg.n_points % 2 == 0)
        errors.push_back("grid.n_points: must be odd and at least 5");
    if (cfg.min_support_intervals < 1)
        errors.push_back("grid.min_support_intervals: must be at least 1");
    if (cfg.n_modes < 2)
        errors.push_back("modes: at least 2 transverse modes required");
    check_decreasing(cfg.epsilons, "epsilons", 4, errors);
    if (!(cfg.k2 < 0.25))
        errors.push_back("shift: must lie below the oscillator ground level 0.25");
    if (!(cfg.tol.solver > 0.0) || !(cfg.tol.lanczos > 0.0) || !(cfg.tol.quadrature > 0.0))
        errors.push_back("tolerances: every tolerance must be positive");
    check_decreasing(cfg.krein.epsilons, "krein.epsilons", 3, errors);
    check_decreasing(cfg.krein.lemma_epsilons, "krein.lemma_epsilons", 3, errors);
    if (cfg.krein.nodes < 10)
        errors.push_back("krein.nodes: at least 10 quadrature nodes required");
    if (cfg.spectrum_count < 1 || cfg.spectrum_count > 50)
        errors.push_back("spectrum.count: must lie in [1, 50]");
    if (cfg.positivity_samples < 1)
        errors.push_back("sweep.positivity_samples: must be at least 1");
    if (cfg.norm_max_steps < 10)
        errors.push_back("sweep.norm_max_steps: must be at least 10");
    if (cfg.threads < 1)
        errors.push_back("threads: must be at least 1");

    if (!errors.empty())
        throw ConfigError(errors);
    return cfg;
}

namespace {

Json numbers_json(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v)
        a.push_back(x);
    return a;
}

Json vector_json(const Vector& v)
{
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

Json matrix_json(const Matrix& m)
{
    Json a = Json::array();
    for (Index i = 0; i < m.rows(); ++i)
        a.push_back(vector_json(m.row(i).transpose()));
    return a;
}

Json fit_json(const PowerFit& f)
{
    Json j;
    j["exponent"] = f.exponent;
    j["intercept"] = f.intercept;
    j["residual"] = f.residual;
    j["points"] = f.points;
    j["warnings"] = f.warnings;
    return j;
}

}  // namespace

Json config_to_json(const RunConfig& c)
{
    Json j;
    Json cs;
    const bool rect = c.cross_section.kind == CrossSectionSpec::Kind::rectangle;
    cs["kind"] = rect ? "rectangle" : "polygon";
    if (rect) {
        cs["a"] = c.cross_section.a;
        cs["b"] = c.cross_section.b;
    } else {
        Json v = Json::array();
        for (const auto& p : c.cross_section.vertices)
            v.push_back(Json::array({p[0], p[1]}));
        cs["vertices"] = v;
    }
    cs["resolution"] = c.cross_section.resolution;
    cs["axis_offset"] = Json::array({c.cross_section.axis_offset[0], c.cross_section.axis_offset[1]});
    cs["allow_square"] = c.cross_section.allow_square;
    j["cross_section"] = cs;
    Json tw;
    tw["kind"] = to_string(c.twist_kind);
    tw["amplitude"] = c.twist_params.amplitude;
    tw["knots"] = numbers_json(c.twist_params.knots);
    tw["values"] = numbers_json(c.twist_params.values);
    j["twist"] = tw;
    j["grid"] = {{"half_width", c.half_width}, {"n_points", c.n_points},
                 {"min_support_intervals", c.min_support_intervals}};
    j["modes"] = c.n_modes;
    j["epsilons"] = numbers_json(c.epsilons);
    j["shift"] = c.k2;
    j["tolerances"] = {{"solver", c.tol.solver}, {"lanczos", c.tol.lanczos}, {"quadrature", c.tol.quadrature}};
    j["krein"] = {{"epsilons", numbers_json(c.krein.epsilons)}, {"nodes", c.krein.nodes},
                  {"lemma_epsilons", numbers_json(c.krein.lemma_epsilons)}};
    j["spectrum"] = {{"count", c.spectrum_count}};
    j["sweep"] = {{"positivity_samples", c.positivity_samples}, {"norm_max_steps", c.norm_max_steps},
                  {"truncation_check", c.truncation_check}};
    j["threads"] = c.threads;
    return j;
}

SweepConfig to_sweep_config(const RunConfig& c)
{
    SweepConfig s;
    s.epsilons = c.epsilons;
    s.cross_section = c.cross_section;
    s.twist_kind = c.twist_kind;
    s.twist_params = c.twist_params;
    s.half_width = c.half_width;
    s.n_points = c.n_points;
    s.min_support_intervals = c.min_support_intervals;
    s.n_modes = c.n_modes;
    s.k2 = c.k2;
    s.tol = c.tol;
    s.threads = c.threads;
    s.positivity_samples = c.positivity_samples;
    s.norm_max_steps = c.norm_max_steps;
    s.truncation_check = c.truncation_check;
    return s;
}

Command command_from_string(const std::string& name)
{
    static const std::map<std::string, Command> table{
        {"transverse", Command::transverse}, {"spectrum1d", Command::spectrum1d},
        {"krein", Command::krein},           {"assemble", Command::assemble},
        {"sweep", Command::sweep},           {"report", Command::report}};
    const auto it = table.find(name);
    if (it == table.end())
        throw std::invalid_argument("unknown command '" + name +
                                    "' (expected transverse, spectrum1d, krein, assemble, sweep or report)");
    return it->second;
}

std::string to_string(Command c)
{
    switch (c) {
    case Command::transverse: return "transverse";
    case Command::spectrum1d: return "spectrum1d";
    case Command::krein: return "krein";
    case Command::assemble: return "assemble";
    case Command::sweep: return "sweep";
    case Command::report: return "report";
    }
    return "unknown";
}

Json check_to_json(const Check& c)
{
    Json j;
    j["name"] = c.name;
    j["verdict"] = to_string(c.verdict);
    j["measured"] = c.measured;
    j["bound"] = c.bound;
    j["margin"] = c.margin;
    j["detail"] = c.detail;
    return j;
}

namespace {

const char* row_fields[] = {"epsilon",        "lambda0_full",      "lambda0_h_eps",   "lambda0_control",
                            "gap1",           "gap2",              "gap2_bound",      "gap3",
                            "total_gap",      "total_gap_control", "restricted_min",  "restricted_bound",
                            "positivity_min", "m_ratio",           "m_identity_defect", "u0",
                            "symmetry_defect", "max_residual"};

double* row_field(SweepRow& r, const std::string& name)
{
    if (name == "epsilon") return &r.epsilon;
    if (name == "lambda0_full") return &r.lambda0_full;
    if (name == "lambda0_h_eps") return &r.lambda0_h_eps;
    if (name == "lambda0_control") return &r.lambda0_control;
    if (name == "gap1") return &r.gap1;
    if (name == "gap2") return &r.gap2;
    if (name == "gap2_bound") return &r.gap2_bound;
    if (name == "gap3") return &r.gap3;
    if (name == "total_gap") return &r.total_gap;
    if (name == "total_gap_control") return &r.total_gap_control;
    if (name == "restricted_min") return &r.restricted_min;
    if (name == "restricted_bound") return &r.restricted_bound;
    if (name == "positivity_min") return &r.positivity_min;
    if (name == "m_ratio") return &r.m_ratio;
    if (name == "m_identity_defect") return &r.m_identity_defect;
    if (name == "u0") return &r.u0;
    if (name == "symmetry_defect") return &r.symmetry_defect;
    if (name == "max_residual") return &r.max_residual;
    return nullptr;
}

double json_number(const Json& j)
{
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

Json report_to_json(const ConvergenceReport& rep)
{
    Json j;
    j["schema_version"] = summary_schema_version;
    j["n_points_used"] = rep.n_points_used;
    j["e1"] = rep.e1;
    j["e2"] = rep.e2;
    j["c_omega"] = rep.c_omega;
    j["total_twist"] = rep.total_twist;
    j["energies"] = numbers_json(rep.energies);
    j["epsilons"] = numbers_json(rep.config.epsilons);
    j["modes"] = rep.config.n_modes;
    j["shift"] = rep.config.k2;
    j["tolerances"] = {{"solver", rep.config.tol.solver},
                       {"lanczos", rep.config.tol.lanczos},
                       {"quadrature", rep.config.tol.quadrature}};
    Json rows = Json::array();
    for (const auto& r : rep.rows) {
        SweepRow copy = r;
        Json row;
        row["ok"] = r.ok;
        row["error"] = r.error;
        for (const char* f : row_fields)
            row[f] = *row_field(copy, f);
        rows.push_back(row);
    }
    j["rows"] = rows;
    Json rates = Json::array();
    for (const auto& r : rep.rates) {
        Json x;
        x["name"] = r.name;
        x["available"] = r.available;
        x["exponent"] = r.fit.exponent;
        x["intercept"] = r.fit.intercept;
        x["fit_residual"] = r.fit.residual;
        x["points"] = r.fit.points;
        x["window"] = Json::array({r.window_lo, r.window_hi});
        x["in_window"] = r.in_window;
        x["note"] = r.note;
        rates.push_back(x);
    }
    j["rates"] = rates;
    j["gap3_ratio"] = rep.gap3_ratio;
    j["lambda0_monotone"] = rep.lambda0_monotone;
    j["total_gap_decreasing"] = rep.total_gap_decreasing;
    j["lambda0_limit"] = rep.lambda0_limit;
    j["lambda0_limit_residual"] = rep.lambda0_limit_residual;
    j["truncation_lambda0"] = rep.truncation_lambda0;
    j["truncation_lambda0_more_modes"] = rep.truncation_lambda0_more;
    Json checks = Json::array();
    for (const auto& c : rep.checks)
        checks.push_back(check_to_json(c));
    j["checks"] = checks;
    return j;
}

ConvergenceReport report_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("schema_version") || j.at("schema_version") != summary_schema_version)
        throw std::runtime_error("sweep report: missing or unsupported schema_version");
    ConvergenceReport rep;
    try {
        rep.n_points_used = j.at("n_points_used").get<int>();
        rep.e1 = json_number(j.at("e1"));
        rep.e2 = json_number(j.at("e2"));
        rep.c_omega = json_number(j.at("c_omega"));
        rep.total_twist = json_number(j.at("total_twist"));
        for (const auto& e : j.at("energies"))
            rep.energies.push_back(json_number(e));
        rep.config.epsilons.clear();
        for (const auto& e : j.at("epsilons"))
            rep.config.epsilons.push_back(json_number(e));
        rep.config.n_modes = j.at("modes").get<int>();
        rep.config.k2 = json_number(j.at("shift"));
        const Json& t = j.at("tolerances");
        rep.config.tol.solver = json_number(t.at("solver"));
        rep.config.tol.lanczos = json_number(t.at("lanczos"));
        rep.config.tol.quadrature = json_number(t.at("quadrature"));
        for (const auto& row : j.at("rows")) {
            SweepRow r;
            r.ok = row.at("ok").get<bool>();
            r.error = row.at("error").get<std::string>();
            for (const char* f : row_fields)
                *row_field(r, f) = json_number(row.at(f));
            rep.rows.push_back(r);
        }
        rep.truncation_lambda0 = json_number(j.at("truncation_lambda0"));
        rep.truncation_lambda0_more = json_number(j.at("truncation_lambda0_more_modes"));
    } catch (const Json::exception& e) {
        throw std::runtime_error(std::string("sweep report: malformed document: ") + e.what());
    }
    summarize(rep);
    return rep;
}

std::string sweep_csv(const ConvergenceReport& rep)
{
    std::vector<std::string> header{"ok"};
    for (const char* f : row_fields)
        header.push_back(f);
    header.push_back("error");
    CsvTable t(header);
    for (const auto& r : rep.rows) {
        SweepRow copy = r;
        std::vector<std::string> fields{r.ok ? "true" : "false"};
        for (const char* f : row_fields)
            fields.push_back(format_number(*row_field(copy, f)));
        fields.push_back(r.error);
        t.add_row(fields);
    }
    return t.str();
}

namespace {

constexpr double pi = std::numbers::pi;

Check flag_check(const std::string& name, bool ok, const std::string& detail = {})
{
    Check c;
    c.name = name;
    c.verdict = ok ? Verdict::pass : Verdict::fail;
    c.measured = ok ? 1.0 : 0.0;
    c.bound = 1.0;
    c.margin = ok ? 0.0 : -1.0;
    c.detail = detail;
    return c;
}

// pass iff measured <= bound
Check upper_check(const std::string& name, double measured, double bound, const std::string& detail = {})
{
    return make_check(name, measured, bound, bound - measured, 0.0, 0.0, detail);
}

// pass iff lo <= measured <= hi
Check window_check(const std::string& name, double measured, double lo, double hi)
{
    const double margin = std::min(measured - lo, hi - measured);
    std::ostringstream d;
    d << "window [" << lo << ", " << hi << "]";
    return make_check(name, measured, hi, margin, 0.0, 0.0, d.str());
}

class Run {
public:
    Run(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log)
        : cfg_(cfg), out_(out), log_(log)
    {
    }

    void file(const std::string& name, const std::string& content)
    {
        write_file(out_ / name, content);
        files_.push_back(name);
    }

    void verdict(Check c) { verdicts_.push_back(std::move(c)); }

    Json results = Json::object();
    const RunConfig& cfg_;
    std::filesystem::path out_;
    std::ostream& log_;
    std::vector<std::string> files_;
    std::vector<Check> verdicts_;
};

TransverseData transverse_for(const RunConfig& cfg, int n_modes)
{
    return compute_transverse(cfg.cross_section, n_modes, cfg.tol);
}

void run_transverse(Run& run)
{
    const RunConfig& cfg = run.cfg_;
    const TransverseData t = transverse_for(cfg, cfg.n_modes);
    const CrossSectionGrid& g = t.grid;
    const int M = static_cast<int>(t.modes.size());

    std::vector<std::string> header{"x2", "x3"};
    for (int n = 0; n < M; ++n)
        header.push_back("J" + std::to_string(n + 1));
    CsvTable nodes(header);
    for (std::size_t k = 0; k < g.interior.size(); ++k) {
        const int id = g.interior[k];
        std::vector<double> row{g.x2(id), g.x3(id)};
        for (const auto& m : t.modes)
            row.push_back(m.values[static_cast<Index>(k)]);
        nodes.add_numbers(row);
    }
    run.file("modes.csv", nodes.str());

    const bool rect = cfg.cross_section.kind == CrossSectionSpec::Kind::rectangle;
    std::vector<double> exact;
    if (rect) {
        for (int p = 1; p <= 12; ++p)
            for (int q = 1; q <= 12; ++q)
                exact.push_back(pi * pi * (p * p / (cfg.cross_section.a * cfg.cross_section.a) +
                                           q * q / (cfg.cross_section.b * cfg.cross_section.b)));
        std::sort(exact.begin(), exact.end());
    }
    std::vector<std::string> eh{"n", "energy", "energy_over_pi2", "residual"};
    if (rect)
        eh.push_back("exact");
    CsvTable energies(eh);
    Json modes = Json::array();
    for (int n = 0; n < M; ++n) {
        const auto& m = t.modes[static_cast<std::size_t>(n)];
        std::vector<std::string> row{std::to_string(n + 1), format_number(m.energy),
                                     format_number(m.energy / (pi * pi)), format_number(m.residual)};
        Json mj;
        mj["n"] = n + 1;
        mj["energy"] = m.energy;
        mj["residual"] = m.residual;
        if (rect) {
            row.push_back(format_number(exact[static_cast<std::size_t>(n)]));
            mj["exact"] = exact[static_cast<std::size_t>(n)];
        }
        energies.add_row(row);
        modes.push_back(mj);
    }
    run.file("energies.csv", energies.str());

    const double cell = g.cell();
    const int K = std::min(M, 5);
    double gram = 0.0;
    for (int p = 0; p < K; ++p)
        for (int q = 0; q < K; ++q) {
            const double ip = cell * t.modes[static_cast<std::size_t>(p)].values.dot(
                                         t.modes[static_cast<std::size_t>(q)].values);
            gram = std::max(gram, std::abs(ip - (p == q ? 1.0 : 0.0)));
        }
    const double g_min = Eigen::SelfAdjointEigenSolver<Matrix>(t.coupling.G).eigenvalues().minCoeff();

    Json j;
    j["e1"] = t.modes[0].energy;
    j["e2"] = t.modes[1].energy;
    j["c_omega"] = t.coupling.c_omega;
    j["raw_skew_defect"] = t.coupling.raw_skew_defect;
    j["gram_defect"] = gram;
    j["area"] = g.area;
    j["centroid"] = Json::array({g.centroid[0], g.centroid[1]});
    j["axis"] = Json::array({g.axis[0], g.axis[1]});
    j["interior_nodes"] = g.interior.size();
    j["spacing"] = Json::array({g.hx, g.hy});
    j["modes"] = modes;
    j["D"] = matrix_json(t.coupling.D);
    j["G"] = matrix_json(t.coupling.G);
    run.file("transverse.json", dump_json(j));
    run.results = j;

    run.verdict(make_check("spectral gap E2 - E1", t.modes[1].energy - t.modes[0].energy, 0.0,
                           t.modes[1].energy - t.modes[0].energy, 0.0, 0.0));
    run.verdict(upper_check("gram identity", gram, 1e-8));
    run.verdict(upper_check("skew defect of D", t.coupling.raw_skew_defect, 10.0 * cfg.tol.quadrature));
    run.verdict(make_check("G positive semidefinite", g_min, 0.0, g_min, 1e-10, 0.0));
    double res = 0.0;
    for (const auto& m : t.modes)
        res = std::max(res, m.residual);
    run.verdict(upper_check("eigenpair residuals", res, 1e-8 * std::max(1.0, t.modes.back().energy)));
    run.log_ << "E1 = " << format_number(t.modes[0].energy) << ", E2 = " << format_number(t.modes[1].energy)
             << ", C_omega = " << format_number(t.coupling.c_omega) << "\n";
}

void run_spectrum1d(Run& run)
{
    const RunConfig& cfg = run.cfg_;
    const int count = cfg.spectrum_count;
    const Line1DGrid grid = make_line_grid(cfg.half_width, cfg.n_points);
    const OscillatorEigensystem s0 = oscillator_spectrum(assemble_h0(grid), count);
    const OscillatorEigensystem sd = oscillator_spectrum(assemble_h0_dirichlet(grid), count);
    const ExtrapolatedSpectrum e0 = extrapolated_spectrum(cfg.half_width, cfg.n_points, count, false);
    const ExtrapolatedSpectrum ed = extrapolated_spectrum(cfg.half_width, cfg.n_points, count, true);

    CsvTable t({"n", "h0", "h0_dirichlet", "h0_extrapolated", "h0_dirichlet_extrapolated", "h0_exact",
                "h0_dirichlet_exact", "h0_residual", "h0_dirichlet_residual"});
    for (int n = 0; n < count; ++n) {
        // Dirichlet levels come in pairs, one per half line
        const double exact_d = oscillator_eigenvalue(2 * (n / 2) + 1);
        t.add_row({std::to_string(n), format_number(s0.eigenvalues[n]), format_number(sd.eigenvalues[n]),
                   format_number(e0.extrapolated[n]), format_number(ed.extrapolated[n]),
                   format_number(oscillator_eigenvalue(n)), format_number(exact_d),
                   format_number(s0.residuals[n]), format_number(sd.residuals[n])});
    }
    run.file("spectrum1d.csv", t.str());

    const double l0 = e0.extrapolated[0];
    const double ld = ed.extrapolated[0];
    const double ratio = ld / l0;
    Json j;
    j["grid"] = {{"half_width", cfg.half_width}, {"n_points", cfg.n_points}, {"h", grid.h}};
    j["lambda0_h0"] = s0.eigenvalues[0];
    j["lambda0_h0_dirichlet"] = sd.eigenvalues[0];
    j["lambda0_h0_extrapolated"] = l0;
    j["lambda0_h0_dirichlet_extrapolated"] = ld;
    j["ratio"] = ratio;
    j["ratio_unextrapolated"] = sd.eigenvalues[0] / s0.eigenvalues[0];
    run.results = j;
    run.verdict(window_check("ratio lambda0(h0 Dirichlet) / lambda0(h0)", ratio, 3.0 - 1e-5, 3.0 + 1e-5));
    run.verdict(window_check("lambda0(h0)", l0, 0.25 - 1e-6, 0.25 + 1e-6));
    run.verdict(window_check("lambda0(h0 Dirichlet)", ld, 0.75 - 1e-6, 0.75 + 1e-6));
    run.log_ << "lambda0(h0) = " << format_number(l0) << ", lambda0(h0^D) = " << format_number(ld)
             << ", ratio = " << format_number(ratio) << "\n";
}

void run_krein(Run& run)
{
    const RunConfig& cfg = run.cfg_;
    const TwistProfile profile = make_profile(cfg.twist_kind, cfg.twist_params);
    if (profile.is_zero())
        throw std::invalid_argument("krein: the twist profile is identically zero");
    const TransverseData t = transverse_for(cfg, 2);
    const double k2 = cfg.k2;
    const Kernel2 kernel = [k2](double x, double y) { return continuum_green_h0(x, y, k2); };
    const LocalExpansion le = local_green_expansion(kernel);

    std::vector<BSKernelData> data;
    for (double e : cfg.krein.epsilons)
        data.push_back(birman_schwinger(profile, t.coupling.c_omega, e, kernel, le, cfg.krein.nodes));
    const ExpansionTable tab = expansion_residuals(data);

    CsvTable bs({"epsilon", "residual0", "residual1", "residual_p_over_c", "neumann_gap", "neumann_bound",
                 "t_norm", "condition"});
    bool neumann_ok = true;
    double t_max = 0.0;
    for (const auto& r : tab.rows) {
        bs.add_numbers({r.epsilon, r.residual0, r.residual1, r.residual_p_over_c, r.neumann_gap,
                        r.neumann_bound, r.t_norm, r.condition});
        neumann_ok = neumann_ok && r.neumann_gap <= r.neumann_bound;
        t_max = std::max(t_max, r.t_norm);
    }
    run.file("bs_residuals.csv", bs.str());

    const LemmaVerdict lv = lemma_limits(profile, cfg.krein.lemma_epsilons, k2, cfg.half_width);
    CsvTable lt({"epsilon", "projected", "full", "complement"});
    for (const auto& r : lv.rows)
        lt.add_numbers({r.epsilon, r.projected, r.full, r.complement});
    run.file("lemma_limits.csv", lt.str());

    Json j;
    j["c_omega"] = t.coupling.c_omega;
    j["local_expansion"] = {{"a", le.a},
                            {"b", le.b},
                            {"slope_left", le.slope_left},
                            {"slope_estimates", Json::array({le.slope_estimates[0], le.slope_estimates[1],
                                                             le.slope_estimates[2]})},
                            {"patch_residual", le.patch_residual}};
    j["c"] = data.empty() ? 0.0 : data.front().c;
    j["v_l1"] = data.empty() ? 0.0 : data.front().v_l1;
    j["fit_residual0"] = fit_json(tab.fit0);
    j["fit_residual1"] = fit_json(tab.fit1);
    j["lemma"] = {{"fit_projected", fit_json(lv.fit_projected)},
                  {"fit_full", fit_json(lv.fit_full)},
                  {"fit_complement", fit_json(lv.fit_complement)},
                  {"complement_ratio", lv.complement_ratio}};
    run.file("krein.json", dump_json(j));
    run.results = j;

    run.verdict(make_check("Green function value a > 0", le.a, 0.0, le.a, 0.0, 0.0));
    run.verdict(upper_check("slope symmetry |b + slope_left|", std::abs(le.b + le.slope_left), 1e-6));
    run.verdict(window_check("slope of ||T - t0||", tab.fit0.exponent, 0.8, 1.2));
    run.verdict(window_check("slope of ||T - t0 - eps t1||", tab.fit1.exponent, 1.6, 2.4));
    run.verdict(flag_check("Neumann form within its residual bound", neumann_ok));
    run.verdict(upper_check("||T||", t_max, 1.0 + 1e-10));
    run.verdict(flag_check("lemma (i) decreasing", lv.projected_decreasing));
    run.verdict(flag_check("lemma (ii) decreasing", lv.full_decreasing));
    run.verdict(flag_check("lemma (iii) decreasing", lv.complement_decreasing));
    {
        Check c = make_check("lemma (iii) fitted order >= 1", lv.fit_complement.exponent, 1.0,
                             lv.fit_complement.exponent - 1.0, 0.0, 0.0);
        run.verdict(c);
    }
    run.verdict(upper_check("lemma (iii) ratio at the smallest pair", lv.complement_ratio, 0.6));
    run.log_ << "slopes " << format_number(tab.fit0.exponent) << " " << format_number(tab.fit1.exponent) << "\n";
}

int points_for(const RunConfig& cfg, const TwistProfile& profile, double eps_min)
{
    int n = cfg.n_points;
    if (!profile.is_zero())
        n = std::max(n, min_points_for_support(cfg.half_width, eps_min * (profile.support_hi - profile.support_lo),
                                               cfg.min_support_intervals));
    if (n % 2 == 0)
        ++n;
    return n;
}

void run_assemble(Run& run)
{
    const RunConfig& cfg = run.cfg_;
    const double eps = cfg.epsilons.front();
    const TwistProfile profile = make_profile(cfg.twist_kind, cfg.twist_params);
    const TransverseData t = transverse_for(cfg, cfg.n_modes);
    const Line1DGrid grid = make_line_grid(cfg.half_width, points_for(cfg, profile, eps));
    const MixedBasis basis = make_mixed_basis(grid, t.modes, t.coupling, cfg.n_modes);
    const ScaledTwist tw = scaled_twist(profile, eps);
    if (!profile.is_zero())
        check_resolves(grid, tw, cfg.min_support_intervals);

    const OperatorMatrix H = assemble_full(basis, tw);
    const OperatorMatrix H0 = assemble_intermediate(basis, tw);
    const OperatorMatrix he = assemble_h_eps(grid, t.coupling.c_omega, tw);
    run.file("H_full.triplets", sparse_triplets(H.matrix));
    run.file("H_intermediate.triplets", sparse_triplets(H0.matrix));
    run.file("h_eps.triplets", sparse_triplets(he.matrix));

    CsvTable sig({"x", "sigma"});
    std::vector<double> xs, ss;
    for (int i = 0; i < grid.unknowns(); ++i) {
        const double x = grid.x_unknown(i);
        sig.add_numbers({x, tw(x)});
        xs.push_back(x);
        ss.push_back(tw(x));
    }
    run.file("sigma.csv", sig.str());
    run.file("sigma.dat", gnuplot_columns("x sigma", xs, ss));

    const double sym = std::max(symmetry_defect(H.matrix), symmetry_defect(H0.matrix));
    const double pos = positivity_margin(H, cfg.positivity_samples, 0x9051717ULL);
    const double integral = profile.is_zero() ? 0.0 : integrate([&](double x) { return tw(x); },
                                                                 tw.support_lo(), tw.support_hi());
    Json j;
    j["epsilon"] = eps;
    j["n_points"] = grid.n_points;
    j["h"] = grid.h;
    j["modes"] = cfg.n_modes;
    j["dimension"] = basis.dimension();
    j["nonzeros_full"] = H.matrix.nonZeros();
    j["nonzeros_intermediate"] = H0.matrix.nonZeros();
    j["energy_shift"] = H.energy_shift;
    j["c_omega"] = t.coupling.c_omega;
    j["symmetry_defect"] = sym;
    j["positivity_min"] = pos;
    j["sigma_integral"] = integral;
    j["total_twist"] = profile.total_twist;
    run.results = j;
    run.verdict(upper_check("matrix symmetry", sym, 0.0));
    run.verdict(make_check("positivity v^T (A + 1) v >= |v|^2", pos, 1.0, pos - 1.0, 1e-10, 0.0));
    run.verdict(upper_check("integral of sigma equals total twist", std::abs(integral - profile.total_twist),
                            1e-10));
}

void write_sweep_files(Run& run, const ConvergenceReport& rep)
{
    run.file("sweep_report.json", dump_json(report_to_json(rep)));
    run.file("sweep.csv", sweep_csv(rep));
    auto column = [&](const std::string& name, double SweepRow::*field) {
        std::vector<double> x, y;
        for (const auto& r : rep.rows)
            if (r.ok) {
                x.push_back(r.epsilon);
                y.push_back(r.*field);
            }
        run.file(name + ".dat", gnuplot_columns("epsilon " + name, x, y));
    };
    column("lambda0", &SweepRow::lambda0_full);
    column("lambda0_control", &SweepRow::lambda0_control);
    column("lambda0_h_eps", &SweepRow::lambda0_h_eps);
    column("gap1", &SweepRow::gap1);
    column("gap2", &SweepRow::gap2);
    column("gap3", &SweepRow::gap3);
    column("total_gap", &SweepRow::total_gap);
    column("total_gap_control", &SweepRow::total_gap_control);
}

Json sweep_results(const ConvergenceReport& rep)
{
    Json j;
    j["n_points_used"] = rep.n_points_used;
    j["lambda0_limit"] = rep.lambda0_limit;
    j["lambda0_monotone"] = rep.lambda0_monotone;
    j["total_gap_decreasing"] = rep.total_gap_decreasing;
    j["gap3_ratio"] = rep.gap3_ratio;
    Json rates = Json::object();
    for (const auto& r : rep.rates)
        rates[r.name] = {{"exponent", r.available ? Json(r.fit.exponent) : Json(nullptr)},
                         {"in_window", r.in_window}};
    j["rates"] = rates;
    int failed = 0;
    for (const auto& r : rep.rows)
        failed += r.ok ? 0 : 1;
    j["failed_rows"] = failed;
    return j;
}

void run_sweep_command(Run& run)
{
    const ConvergenceReport rep = run_sweep(to_sweep_config(run.cfg_));
    write_sweep_files(run, rep);
    run.results = sweep_results(rep);
    for (const auto& c : rep.checks)
        run.verdict(c);
    for (const auto& r : rep.rows)
        run.log_ << "eps " << format_number(r.epsilon) << (r.ok ? "" : " FAILED: " + r.error) << " lambda0 "
                 << format_number(r.lambda0_full) << "\n";
}

void run_report(Run& run)
{
    const std::filesystem::path src = run.out_ / "sweep_report.json";
    if (!std::filesystem::exists(src))
        throw std::runtime_error("report: " + src.string() + " not found; run the sweep command first");
    Json doc;
    try {
        doc = Json::parse(read_file(src));
    } catch (const Json::parse_error& e) {
        throw std::runtime_error(std::string("report: cannot parse sweep_report.json: ") + e.what());
    }
    const ConvergenceReport rep = report_from_json(doc);

    std::ostringstream txt;
    txt << "epsilon lambda0 gap1 gap2 gap3 total_gap\n";
    for (const auto& r : rep.rows) {
        txt << format_number(r.epsilon);
        if (!r.ok) {
            txt << " failed: " << r.error << "\n";
            continue;
        }
        txt << " " << format_number(r.lambda0_full) << " " << format_number(r.gap1) << " "
            << format_number(r.gap2) << " " << format_number(r.gap3) << " " << format_number(r.total_gap)
            << "\n";
    }
    txt << "\nrates\n";
    for (const auto& r : rep.rates)
        txt << r.name << " " << (r.available ? format_number(r.fit.exponent) : "n/a") << " window ["
            << format_number(r.window_lo) << ", " << format_number(r.window_hi) << "] "
            << (r.in_window ? "in" : "out") << "\n";
    txt << "\nlambda0 limit (quadratic fit) " << format_number(rep.lambda0_limit) << "\n";
    txt << "\nchecks\n";
    for (const auto& c : rep.checks)
        txt << to_string(c.verdict) << " " << c.name << " margin " << format_number(c.margin) << "\n";
    run.file("report.txt", txt.str());
    run.results = sweep_results(rep);
    for (const auto& c : rep.checks)
        run.verdict(c);
}

}  // namespace

DispatchResult dispatch(Command command, const RunConfig& config, const std::string& config_text,
                        const std::filesystem::path& out_dir, std::ostream& log)
{
    std::filesystem::create_directories(out_dir);
    Run run(config, out_dir, log);
    run.file("run_config.json", config_text);
    switch (command) {
    case Command::transverse: run_transverse(run); break;
    case Command::spectrum1d: run_spectrum1d(run); break;
    case Command::krein: run_krein(run); break;
    case Command::assemble: run_assemble(run); break;
    case Command::sweep: run_sweep_command(run); break;
    case Command::report: run_report(run); break;
    }

    DispatchResult res;
    res.verdicts = run.verdicts_;
    const bool ok = all_pass(res.verdicts);
    res.exit_status = ok ? 0 : 1;
    Json s;
    s["schema_version"] = summary_schema_version;
    s["command"] = to_string(command);
    s["status"] = ok ? "pass" : "fail";
    Json v = Json::array();
    for (const auto& c : res.verdicts)
        v.push_back(check_to_json(c));
    s["verdicts"] = v;
    s["results"] = run.results;
    run.files_.push_back("summary.json");
    s["files"] = run.files_;
    s["config"] = config_to_json(config);
    res.summary = s;
    res.files = run.files_;
    write_file(out_dir / "summary.json", dump_json(s));
    return res;
}

void write_error_summary(const std::filesystem::path& out_dir, const std::string& command,
                         const std::string& message, const std::vector<std::string>& details)
{
    Json s;
    s["schema_version"] = summary_schema_version;
    s["command"] = command;
    s["status"] = "error";
    s["error"] = message;
    s["details"] = details;
    s["verdicts"] = Json::array();
    write_file(out_dir / "summary.json", dump_json(s));
}

}  // namespace twistlab
