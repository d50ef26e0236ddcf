#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schoolconn/error.hpp"

namespace schoolconn::csv {

// RFC 4180 subset: comma separated, double-quoted fields may contain commas,
// quotes ("") and newlines. Blank lines are skipped.
struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;
};

// Rows whose field count differs from the header raise `width_error`.
Document parse(std::string_view text, std::string_view source = "<memory>",
               ErrorKind width_error = ErrorKind::ParseError);
Document read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace schoolconn::csv
