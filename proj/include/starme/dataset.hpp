#pragma once

#include <string>
#include <vector>

namespace starme {

// numeric table with named columns; missing values stored as NaN
struct DataTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  size_t n_rows() const { return cols.empty() ? 0 : cols[0].size(); }
  size_t n_cols() const { return cols.size(); }

  // -1 when absent
  int find(const std::string& name) const;
  const std::vector<double>& col(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) >= 0; }

  void add(const std::string& name, std::vector<double> values);

  // row indices with missing values in any of the listed columns
  std::vector<size_t> missing_rows(const std::vector<std::string>& names) const;
};

// new table with the listed rows, in the listed order
DataTable subset_rows(const DataTable& table, const std::vector<int>& rows);

// delimiter inferred from the header (comma, semicolon, tab, else whitespace);
// empty fields, "NA", "na", "nan" parse as missing
DataTable read_table(const std::string& path);

// writes comma-separated with header; doubles printed with %.12g so repeated
// runs are byte-identical
void write_table(const std::string& path, const DataTable& table);

// comma-separated text from pre-formatted cells, for tables mixing labels
// and numbers; numeric cells should go through format_number
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// plain-text sidecar describing an emitted file, one "column: description"
// line per entry
void write_schema(const std::string& table_path,
                  const std::vector<std::string>& lines);

std::string format_number(double v);

}  // namespace starme
