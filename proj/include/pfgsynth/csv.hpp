#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pfgsynth::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based physical line of each row, for error messages.
  std::vector<std::size_t> lines;
};

/// RFC 4180 reader. The header row is mandatory; every row must have as many
/// fields as the header. Throws LoadError naming the file and line.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text, const std::string& source);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

} // namespace pfgsynth::csv
