#include "starme/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace starme {

int DataTable::find(const std::string& name) const {
  for (size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return static_cast<int>(j);
  return -1;
}

const std::vector<double>& DataTable::col(const std::string& name) const {
  int j = find(name);
  if (j < 0) throw std::out_of_range("table has no column '" + name + "'");
  return cols[j];
}

void DataTable::add(const std::string& name, std::vector<double> values) {
  if (!cols.empty() && values.size() != n_rows())
    throw std::invalid_argument("column '" + name + "' has " +
                                std::to_string(values.size()) + " rows, table has " +
                                std::to_string(n_rows()));
  names.push_back(name);
  cols.push_back(std::move(values));
}

std::vector<size_t> DataTable::missing_rows(
    const std::vector<std::string>& check) const {
  std::vector<size_t> rows;
  for (size_t i = 0; i < n_rows(); ++i) {
    for (const auto& name : check) {
      if (std::isnan(col(name)[i])) {
        rows.push_back(i);
        break;
      }
    }
  }
  return rows;
}

namespace {

char infer_delim(const std::string& header) {
  for (char c : {',', ';', '\t'})
    if (header.find(c) != std::string::npos) return c;
  return ' ';
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_value(const std::string& field, const std::string& path,
                   size_t line_no, const std::string& col) {
  std::string f = trim(field);
  if (f.empty() || f == "NA" || f == "na" || f == "nan" || f == "NaN")
    return std::numeric_limits<double>::quiet_NaN();
  size_t used = 0;
  double v;
  try {
    v = std::stod(f, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != f.size())
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": cannot parse '" + f + "' in column '" + col +
                             "' as a number");
  return v;
}

}  // namespace

DataTable subset_rows(const DataTable& table, const std::vector<int>& rows) {
  DataTable out;
  out.names = table.names;
  out.cols.resize(table.n_cols());
  for (size_t c = 0; c < table.n_cols(); ++c) {
    out.cols[c].reserve(rows.size());
    for (int r : rows) {
      if (r < 0 || size_t(r) >= table.n_rows())
        throw std::out_of_range("subset_rows: row " + std::to_string(r) +
                                " out of range");
      out.cols[c].push_back(table.cols[c][r]);
    }
  }
  return out;
}

DataTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error(path + ": empty file");
  char delim = infer_delim(header);

  DataTable t;
  for (auto& name : split_fields(header, delim)) {
    std::string n = trim(name);
    if (n.empty())
      throw std::runtime_error(path + ":1: empty column name in header");
    if (t.find(n) >= 0)
      throw std::runtime_error(path + ":1: duplicate column '" + n + "'");
    t.names.push_back(n);
  }
  t.cols.resize(t.names.size());

  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, delim);
    if (fields.size() != t.names.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": has " +
                               std::to_string(fields.size()) +
                               " fields, header has " +
                               std::to_string(t.names.size()));
    for (size_t j = 0; j < fields.size(); ++j)
      t.cols[j].push_back(parse_value(fields[j], path, line_no, t.names[j]));
  }
  return t;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_table(const std::string& path, const DataTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (size_t j = 0; j < table.names.size(); ++j) {
    if (j) out << ',';
    out << table.names[j];
  }
  out << '\n';
  for (size_t i = 0; i < table.n_rows(); ++i) {
    for (size_t j = 0; j < table.n_cols(); ++j) {
      if (j) out << ',';
      out << format_number(table.cols[j][i]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: row width does not match header");
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << row[j];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_schema(const std::string& table_path,
                  const std::vector<std::string>& lines) {
  std::string path = table_path + ".schema";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace starme
