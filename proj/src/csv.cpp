#include "robscat/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "robscat/errors.hpp"

namespace robscat {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
    std::ofstream os(path);
    if (!os) throw IoError("write_csv: cannot open " + path.string());
    for (size_t c = 0; c < table.columns.size(); ++c) {
        if (c) os << ',';
        os << table.columns[c];
    }
    os << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw IoError("write_csv: row width mismatch in " + path.string());
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) os << ',';
            os << format_g17(row[c]);
        }
        os << '\n';
    }
    if (!os.good()) throw IoError("write_csv: write failed for " + path.string());
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
    std::ofstream os(path);
    if (!os) throw IoError("write_matrix_csv: cannot open " + path.string());
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) os << ',';
            os << format_g17(M(i, j));
        }
        os << '\n';
    }
    if (!os.good()) throw IoError("write_matrix_csv: write failed for " + path.string());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("read_matrix_csv: cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw IoError("read_matrix_csv: non-numeric cell '" + tok + "' in " +
                              path.string());
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("read_matrix_csv: ragged rows in " + path.string());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("read_matrix_csv: empty file " + path.string());
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            M(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return M;
}

}  // namespace robscat
