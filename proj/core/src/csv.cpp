#include "tvc/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tvc/errors.hpp"

namespace tvc {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string cell_location(const std::string& path, std::size_t row, std::size_t col) {
  return path + ":" + std::to_string(row) + ":" + std::to_string(col);
}

}  // namespace

CsvTable read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open file: " + path, path);

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::schema, "empty file: " + path, path);
  }

  CsvTable table;
  for (const auto& cell : split_line(line)) {
    std::string name = trim(cell);
    if (name.empty()) {
      throw Error(ErrorKind::schema, "empty column name in header", cell_location(path, 1, table.header.size() + 1));
    }
    table.header.push_back(name);
  }

  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw Error(ErrorKind::schema,
                  "expected " + std::to_string(table.header.size()) + " cells, got " +
                      std::to_string(cells.size()),
                  cell_location(path, row_no, 1));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::string cell = trim(cells[j]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw Error(ErrorKind::parse, "not a number: '" + cell + "'", cell_location(path, row_no, j + 1));
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::parse, "non-finite value", cell_location(path, row_no, j + 1));
      }
      data.push_back(v);
    }
    ++rows;
  }

  table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < table.header.size(); ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          data[i * table.header.size() + j];
  return table;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_to_string(const std::vector<std::string>& header,
                          const Eigen::MatrixXd& values) {
  if (values.size() > 0 && static_cast<std::size_t>(values.cols()) != header.size()) {
    throw Error(ErrorKind::dimension, "header width does not match value columns");
  }
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write file: " + path, path);
  out << content;
  if (!out) throw Error(ErrorKind::io, "write failed: " + path, path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open file: " + path, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tvc
