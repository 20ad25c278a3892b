#include "twistlab/json_writer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace twistlab {

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

void emit(const Json& j, int indent, int depth, std::string& out)
{
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first)
                out += ",\n";
            first = false;
            out += pad;
            out += Json(it.key()).dump();
            out += ": ";
            emit(it.value(), indent, depth + 1, out);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        const bool flat = std::all_of(j.begin(), j.end(), is_scalar);
        if (flat) {
            out += "[";
            bool first = true;
            for (const auto& v : j) {
                if (!first)
                    out += ", ";
                first = false;
                emit(v, indent, depth + 1, out);
            }
            out += "]";
            return;
        }
        out += "[\n";
        bool first = true;
        for (const auto& v : j) {
            if (!first)
                out += ",\n";
            first = false;
            out += pad;
            emit(v, indent, depth + 1, out);
        }
        out += "\n" + close_pad + "]";
        return;
    }
    case Json::value_t::number_float: {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_number(v) : "null";
        return;
    }
    default:
        out += j.dump();
        return;
    }
}

}  // namespace

std::string dump_json(const Json& j, int indent)
{
    std::string out;
    emit(j, indent, 0, out);
    out += "\n";
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f)
        throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header))
{
    if (header_.empty())
        throw std::invalid_argument("csv: empty header");
}

void CsvTable::add_row(std::vector<std::string> fields)
{
    if (fields.size() != header_.size())
        throw std::invalid_argument("csv: row width does not match the header");
    rows_.push_back(std::move(fields));
}

void CsvTable::add_numbers(const std::vector<double>& values)
{
    std::vector<std::string> f;
    f.reserve(values.size());
    for (double v : values)
        f.push_back(format_number(v));
    add_row(std::move(f));
}

std::string CsvTable::quote(const std::string& field)
{
    if (field.find_first_of(",\"\r\n") == std::string::npos)
        return field;
    std::string q = "\"";
    for (char c : field) {
        if (c == '"')
            q += '"';
        q += c;
    }
    q += '"';
    return q;
}

std::string CsvTable::str() const
{
    std::string out;
    auto line = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i)
                out += ',';
            out += quote(fields[i]);
        }
        out += "\r\n";
    };
    line(header_);
    for (const auto& r : rows_)
        line(r);
    return out;
}

std::string sparse_triplets(const SparseMatrix& m)
{
    std::string out = "% " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " " +
                      std::to_string(m.nonZeros()) + "\n";
    for (Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            out += std::to_string(it.row()) + " " + std::to_string(it.col()) + " " +
                   format_number(it.value()) + "\n";
    return out;
}

std::string gnuplot_columns(const std::string& comment, const std::vector<double>& x,
                            const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("gnuplot: column lengths differ");
    std::string out = "# " + comment + "\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        out += format_number(x[i]) + " " + format_number(y[i]) + "\n";
    return out;
}

}  // namespace twistlab
