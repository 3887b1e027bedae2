#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvc {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // rows x header.size()
};

// Strict numeric CSV: one header row, comma separated, every cell a finite
// number. Errors carry a file:row:col location (rows 1-based, header = row 1).
CsvTable read_numeric_csv(const std::string& path);

// Shortest deterministic round-trip formatting ("%.17g").
std::string format_double(double v);

std::string csv_to_string(const std::vector<std::string>& header,
                          const Eigen::MatrixXd& values);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace tvc
