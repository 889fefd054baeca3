#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ctxtag {

using CsvRow = std::vector<std::string>;

// Quotes a field when it holds a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const CsvRow& row);

// Parses quoted fields, including embedded newlines.
std::vector<CsvRow> parse_csv(std::string_view text);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

// Shortest decimal form that reads back to the same double; "nan" for NaN.
std::string format_double(double v);

}  // namespace ctxtag
