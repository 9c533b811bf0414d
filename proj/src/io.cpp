#include <trcm/io.hpp>

#include <trcm/error.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace trcm {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, std::size_t line, std::size_t col) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": ";
}

}  // namespace

LabeledMatrix parse_matrix(std::istream& in, const ParseOptions& opts, const std::string& source) {
  if (opts.na_token.empty()) throw InputError("missing-value token must not be empty");
  {
    double probe = 0.0;
    const char* b = opts.na_token.data();
    const auto r = std::from_chars(b, b + opts.na_token.size(), probe);
    if (r.ec == std::errc() && r.ptr == b + opts.na_token.size()) {
      throw InputError("missing-value token '" + opts.na_token + "' is numeric");
    }
  }
  std::vector<std::string> col_names;
  std::vector<std::string> row_names;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> seen;
  std::vector<std::size_t> line_of_row;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool header_pending = opts.header;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, opts.delimiter);
    if (header_pending) {
      header_pending = false;
      std::size_t first = opts.row_names ? 1 : 0;
      if (opts.row_names && fields.size() < 1) throw InputError(where(source, line_no, 1) + "empty header");
      for (std::size_t k = first; k < fields.size(); ++k) col_names.push_back(trim(fields[k]));
      width = col_names.size();
      continue;
    }
    std::size_t first = 0;
    if (opts.row_names) {
      row_names.push_back(trim(fields[0]));
      first = 1;
    }
    const std::size_t cells = fields.size() - first;
    if (width == 0 && rows.empty()) width = cells;
    if (cells != width) {
      throw InputError(where(source, line_no, fields.size()) + "expected " + std::to_string(width) +
                       " values, found " + std::to_string(cells));
    }
    std::vector<double> vals(width, std::nan(""));
    std::vector<bool> obs(width, false);
    for (std::size_t k = 0; k < width; ++k) {
      const std::string f = trim(fields[first + k]);
      if (f.empty() || f == opts.na_token) continue;
      double v = 0.0;
      const char* b = f.data();
      const char* e = b + f.size();
      const char* start = (*b == '+') ? b + 1 : b;
      const auto r = std::from_chars(start, e, v);
      if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v)) {
        throw InputError(where(source, line_no, first + k + 1) + "cannot parse '" + f + "' as a number");
      }
      vals[k] = v;
      obs[k] = true;
    }
    rows.push_back(std::move(vals));
    seen.push_back(std::move(obs));
    line_of_row.push_back(line_no);
  }
  if (rows.empty() || width == 0) throw InputError(source + ": no data rows");

  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(width);
  Matrix values(n, p);
  BoolMatrix observed(n, p);
  for (Index i = 0; i < n; ++i) {
    bool any = false;
    for (Index j = 0; j < p; ++j) {
      values(i, j) = rows[i][j];
      observed(i, j) = seen[i][j];
      any = any || seen[i][j];
    }
    if (!any) throw InputError(where(source, line_of_row[i], 1) + "row has no observed values");
  }
  for (Index j = 0; j < p; ++j) {
    if (!observed.col(j).any()) {
      throw InputError(where(source, line_of_row[0], j + 1 + (opts.row_names ? 1 : 0)) +
                       "column " + std::to_string(j + 1) + " has no observed values");
    }
  }
  return LabeledMatrix{MaskedMatrix(std::move(values), std::move(observed)), std::move(col_names),
                       std::move(row_names)};
}

LabeledMatrix read_matrix(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_matrix(in, opts, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_matrix(std::ostream& out, const Matrix& values, const ParseOptions& opts,
                  const std::vector<std::string>& col_names,
                  const std::vector<std::string>& row_names, const BoolMatrix* missing) {
  const bool with_rows = !row_names.empty();
  if (with_rows && static_cast<Index>(row_names.size()) != values.rows()) {
    throw InputError("write_matrix: row name count differs from rows");
  }
  if (!col_names.empty()) {
    if (static_cast<Index>(col_names.size()) != values.cols()) {
      throw InputError("write_matrix: column name count differs from columns");
    }
    if (with_rows) out << opts.delimiter;
    for (std::size_t k = 0; k < col_names.size(); ++k) {
      if (k) out << opts.delimiter;
      out << col_names[k];
    }
    out << '\n';
  }
  for (Index i = 0; i < values.rows(); ++i) {
    if (with_rows) out << row_names[static_cast<std::size_t>(i)] << opts.delimiter;
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out << opts.delimiter;
      if ((missing && (*missing)(i, j)) || std::isnan(values(i, j))) {
        out << opts.na_token;
      } else {
        out << format_double(values(i, j));
      }
    }
    out << '\n';
  }
}

void save_matrix(const std::string& path, const Matrix& values, const ParseOptions& opts,
                 const std::vector<std::string>& col_names,
                 const std::vector<std::string>& row_names, const BoolMatrix* missing) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_matrix(out, values, opts, col_names, row_names, missing);
  if (!out) throw InputError("write failed for '" + path + "'");
}

}  // namespace trcm
