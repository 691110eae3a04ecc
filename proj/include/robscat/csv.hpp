#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace robscat {

/// Shortest-exact float serialization used by every output table: 17
/// significant digits round-trip doubles losslessly.
std::string format_g17(double v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/// Comma-separated table with a one-line header.
void write_csv(const std::filesystem::path& path, const Table& table);

/// Headerless numeric matrix (rows = lines, comma-separated).
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace robscat
