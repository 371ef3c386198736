#ifndef RSCRUB_MATIO_HPP
#define RSCRUB_MATIO_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rscrub/report.hpp"
#include "rscrub/types.hpp"

namespace rscrub {

enum class MatrixFormat { delimited, binary };

// ".bin" / ".rsb" are binary, everything else delimited.
MatrixFormat format_for_path(const std::filesystem::path& path);

// Comma- or tab-separated numbers, one observation per line. The first line is
// a header (column labels) when none of its cells is numeric. Missing or
// non-finite cells are errors; line and column numbers in errors are 1-based.
DenseMatrix parse_delimited(std::string_view text, const std::string& source = "<memory>");

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format);
inline DenseMatrix load_matrix(const std::filesystem::path& path) { return load_matrix(path, format_for_path(path)); }

// Delimited output uses shortest round-trip formatting; binary is bit-exact.
void save_matrix(const DenseMatrix& m, const std::filesystem::path& path, MatrixFormat format);
inline void save_matrix(const DenseMatrix& m, const std::filesystem::path& path) {
  save_matrix(m, path, format_for_path(path));
}

// Shortest decimal string that parses back to exactly `v`.
std::string format_number(double v);

// JSON report document with "schema": 1. Lossless through report_from_string.
std::string report_to_string(const ScrubReport& report);
ScrubReport report_from_string(const std::string& text);

void save_report(const ScrubReport& report, const std::filesystem::path& path);
ScrubReport load_report(const std::filesystem::path& path);

// Plain comma-separated table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
};

std::string table_to_string(const Table& t);
void save_table(const Table& t, const std::filesystem::path& path);

// Reads a whole file; throws IoError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rscrub

#endif  // RSCRUB_MATIO_HPP
