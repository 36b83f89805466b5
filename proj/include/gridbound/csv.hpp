#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace gridbound::csv {

/// Header-keyed table of string cells. Only the plain comma-separated subset
/// used by our files is supported (no quoting).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index for `name`; throws InputError if absent.
  std::size_t column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);
Table parse(const std::string& text, const std::string& origin = "<string>");

/// Parses a numeric cell, throwing InputError with row context on failure.
double to_double(const std::string& cell, const std::string& context);
long to_long(const std::string& cell, const std::string& context);

/// Shortest round-trip decimal representation of a double.
std::string format(double value);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace gridbound::csv
