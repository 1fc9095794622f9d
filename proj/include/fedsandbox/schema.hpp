#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedsandbox {

enum class ColumnKind { numeric, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  // Numeric columns: codebook bounds. Fixed in the schema file, never
  // estimated from data, so DP sensitivities stay independent of the
  // private rows.
  double lo = 0.0;
  double hi = 0.0;
  // Optional public lower bound on the column variance for the log-normal
  // mechanism; negative means "use the default 1e-4 * range^2".
  double v_floor = -1.0;
  std::vector<std::string> categories;

  double range() const { return hi - lo; }
  double variance_floor() const {
    return v_floor > 0.0 ? v_floor : 1e-4 * range() * range();
  }
};

// Parsed from the line-oriented `key = value` schema files shipped under
// schemas/. One file per dataset.
struct DatasetSchema {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::string target;
  std::string selected;  // t-test column; empty = top-ranked numeric
  double delta = 1e-5;

  int column_index(const std::string& col) const;

  static DatasetSchema parse(std::istream& in, const std::string& origin);
  static DatasetSchema parse_file(const std::string& path);
};

}  // namespace fedsandbox
