#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vebs::csv {

/// One parsed CSV row plus its 1-based source line (for error reporting).
struct Row {
  std::vector<std::string> fields;
  int line = 0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of a header column; -1 if absent.
  [[nodiscard]] int column(const std::string& name) const;
};

/// Reads a comma-separated file with a mandatory header row. Blank lines are
/// skipped; rows with a field count different from the header raise IoError
/// naming the offending line. No quoting support — traces never need it.
Table read_file(const std::filesystem::path& path);

/// Parses a field as double; raises IoError naming line/column on failure.
double to_double(const Row& row, int col, const std::string& col_name);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

void write_file(const std::filesystem::path& path,
                const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace vebs::csv
