#pragma once

// Plain comma-separated tables (no quoting) and atomic file output.

#include "dqf/dqf_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dqf::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column; DataError if absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");

/// Shortest text that reads back to the same double.
std::string fmt(double x);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// `day,a,b_star,g,h`
XiSeries read_xi(const std::filesystem::path& path);
std::string xi_csv(const XiSeries& xi);

/// `day_index,return` grouped by day index in order of first appearance.
std::vector<std::vector<double>> read_day_returns(const std::filesystem::path& path,
                                                  std::vector<std::string>* labels = nullptr);

/// Draw matrix with one named column per parameter.
std::string draws_csv(const Eigen::MatrixXd& draws);
Eigen::MatrixXd read_draws(const std::filesystem::path& path);

}  // namespace dqf::io
