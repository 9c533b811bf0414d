#pragma once

#include <trcm/masked_matrix.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace trcm {

struct ParseOptions {
  /// Exact, case-sensitive match. Empty fields are always missing.
  std::string na_token = "NA";
  char delimiter = ',';
  bool header = false;
  bool row_names = false;
};

struct LabeledMatrix {
  MaskedMatrix data;
  std::vector<std::string> col_names;  // empty without a header
  std::vector<std::string> row_names;  // empty without row names
};

/// Errors name the source, line and column (1-based).
LabeledMatrix parse_matrix(std::istream& in, const ParseOptions& opts,
                           const std::string& source = "<input>");
LabeledMatrix read_matrix(const std::string& path, const ParseOptions& opts);

/// Shortest round-trip decimal form of each value. Cells flagged in
/// `missing` (if given) are written as the NA token.
void write_matrix(std::ostream& out, const Matrix& values, const ParseOptions& opts,
                  const std::vector<std::string>& col_names = {},
                  const std::vector<std::string>& row_names = {},
                  const BoolMatrix* missing = nullptr);
void save_matrix(const std::string& path, const Matrix& values, const ParseOptions& opts,
                 const std::vector<std::string>& col_names = {},
                 const std::vector<std::string>& row_names = {},
                 const BoolMatrix* missing = nullptr);

std::string format_double(double v);

}  // namespace trcm
