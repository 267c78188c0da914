#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace heatcast::csv {

// Plain comma-separated text without quoting; none of the project's schemas
// carry commas inside fields.
std::vector<std::string_view> split(std::string_view line, char sep = ',');

// Shortest decimal text that parses back to the identical double.
std::string format(double v);
std::string format(const std::optional<double>& v);

// Whole-field numeric parse; throws DomainError on trailing junk or empty text.
double parse_double(std::string_view s);
std::optional<double> parse_optional(std::string_view s);
long parse_long(std::string_view s);

struct Row {
  std::size_t line = 0;  // 1-based, header is line 1
  std::vector<std::string> fields;
};

// Reads a file whose first line must equal `header` exactly (CR stripped).
// Blank lines are skipped. Throws IoError / ParseError.
std::vector<Row> read_table(const std::filesystem::path& path, std::string_view header);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace heatcast::csv
