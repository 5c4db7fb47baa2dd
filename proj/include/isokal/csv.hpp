#pragma once

// Minimal CSV reading/writing for the harness and CLI file formats. Numbers
// are written with 17 significant digits so that values round-trip.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "isokal/error.hpp"
#include "isokal/linalg.hpp"

namespace isokal {

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += format_number(row[i]);
      }
      out += '\n';
    }
    return out;
  }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void write_csv(const std::string& path, const CsvTable& table) {
  write_text(path, table.str());
}

/// Header names `prefix0, prefix1, ...`.
inline std::vector<std::string> indexed_names(const std::string& prefix, std::size_t n,
                                              std::size_t first = 0) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(first + i));
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Parses an observations file (`k,y_0,...,y_{m-1}`). Rows must be ordered
/// k = 0, 1, 2, ...; returns y(0), y(1), ...
inline std::vector<Vector<double>> parse_observations(const std::string& text, Eigen::Index m,
                                                      const std::string& name = "observations") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(name + ": missing header row");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "k") throw Error(name + ": header must start with 'k'");
  if (static_cast<Eigen::Index>(header.size()) != m + 1) {
    throw Error(name + ": expected " + std::to_string(m) + " observation columns, found " +
                std::to_string(header.size() - 1));
  }
  std::vector<Vector<double>> obs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = name + " line " + std::to_string(line_no);
    if (cells.size() != header.size()) throw Error(where + ": wrong number of columns");
    auto number = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw Error(where + ": '" + s + "' is not a number");
      }
      if (used != s.size() || !std::isfinite(v)) throw Error(where + ": '" + s + "' is not a finite number");
      return v;
    };
    if (number(cells[0]) != static_cast<double>(obs.size())) {
      throw Error(where + ": expected k = " + std::to_string(obs.size()));
    }
    Vector<double> y(m);
    for (Eigen::Index i = 0; i < m; ++i) y(i) = number(cells[static_cast<std::size_t>(i) + 1]);
    obs.push_back(std::move(y));
  }
  return obs;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace isokal
