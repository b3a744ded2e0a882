/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#ifndef MGLIFT_CSV_HPP
#define MGLIFT_CSV_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mglift {

// Columnar table with one header per column.  Values render with %.17g so a
// write/read round trip is bit-exact.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd data;  // rows x header.size()

  int rows() const { return static_cast<int>(data.rows()); }
  int cols() const { return static_cast<int>(data.cols()); }
  // Column index for a header name; throws ConfigError when absent.
  int column(const std::string& name) const;
};

std::string csv_string(const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

// Strict reader for files produced by write_csv: one header line, uniform
// column counts, numeric fields.  Unreadable paths throw IoError, malformed
// content ConfigError.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

// Small file helpers shared by the artifact writers.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mglift

#endif  // MGLIFT_CSV_HPP
