/******************************************************************************
 *
 * Copyright (c) 2026, the mglift project developers.
 * See the top-level LICENSE file for details.
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 *****************************************************************************/

#include "mglift/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mglift/errors.hpp"

namespace mglift {

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw ConfigError("csv: no column named '" + name + "'");
}

std::string csv_string(const CsvTable& table) {
  if (table.data.cols() != static_cast<Eigen::Index>(table.header.size()))
    throw ConfigError("csv: header/data column mismatch");
  std::string out;
  for (size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    for (char c : table.header[i]) {
      if (c == ',' || c == '\n' || c == '\r')
        throw ConfigError("csv: header contains a delimiter: " +
                          table.header[i]);
    }
    out += table.header[i];
  }
  out += '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < table.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.data.cols(); ++c) {
      if (c) out += ',';
      snprintf(buf, sizeof buf, "%.17g", table.data(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) {
  write_text_file(path, csv_string(table));
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  do {  // leading '#' lines carry run metadata; they are not data
    if (!std::getline(in, line)) throw ConfigError(origin + ": empty csv");
  } while (!line.empty() && line[0] == '#');
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  }
  const size_t ncol = t.header.size();
  if (ncol == 0) throw ConfigError(origin + ": empty header");

  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t start = 0, found = 0;
    for (size_t c = 0; c < ncol; ++c) {
      size_t end = line.find(',', start);
      if (c + 1 < ncol) {
        if (end == std::string::npos)
          throw ConfigError(origin + ": short row " + std::to_string(rows));
      } else if (end != std::string::npos) {
        throw ConfigError(origin + ": long row " + std::to_string(rows));
      }
      const std::string cell = line.substr(
          start, end == std::string::npos ? std::string::npos : end - start);
      char* tail = nullptr;
      const double v = std::strtod(cell.c_str(), &tail);
      if (tail == cell.c_str() || *tail != '\0')
        throw ConfigError(origin + ": non-numeric cell '" + cell + "'");
      values.push_back(v);
      ++found;
      start = end + 1;
    }
    (void)found;
    ++rows;
  }
  t.data.resize(rows, static_cast<Eigen::Index>(ncol));
  for (int r = 0; r < rows; ++r)
    for (size_t c = 0; c < ncol; ++c)
      t.data(r, static_cast<Eigen::Index>(c)) = values[r * ncol + c];
  return t;
}

CsvTable read_csv(const std::string& path) {
  return parse_csv(read_text_file(path), path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("write failure on file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on file: " + path);
  return buf.str();
}

}  // namespace mglift
