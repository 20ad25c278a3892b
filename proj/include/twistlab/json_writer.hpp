#pragma once

#include "twistlab/eigensolver.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace twistlab {

using Json = nlohmann::ordered_json;

// %.17g; non-finite values become "nan", "inf" or "-inf".
std::string format_number(double v);

// Deterministic JSON text: keys in insertion order, floating-point numbers
// at 17 significant digits, NaN and infinities as null. Arrays of scalars
// stay on one line.
std::string dump_json(const Json& j, int indent = 2);

// Writes bytes exactly as given, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// RFC 4180: CRLF line breaks, fields quoted when they contain a comma,
// quote, CR or LF; quotes doubled.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::vector<std::string> fields);
    void add_numbers(const std::vector<double>& values);
    std::size_t size() const { return rows_.size(); }
    std::string str() const;

    static std::string quote(const std::string& field);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// "row col value" lines (0-based, column-major order) after a header line
// "% rows cols nnz".
std::string sparse_triplets(const SparseMatrix& m);

// Two whitespace-separated columns with a leading comment line.
std::string gnuplot_columns(const std::string& comment, const std::vector<double>& x,
                            const std::vector<double>& y);

}  // namespace twistlab
