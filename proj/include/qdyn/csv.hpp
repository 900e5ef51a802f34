// csv.hpp — plot-series emission: comma-separated, header row, full double
// precision (17 significant digits)

#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qdyn/errors.hpp"

namespace qdyn {

inline std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& data) {
    if (header.size() != static_cast<std::size_t>(data.cols())) {
        throw ValidationError("write_csv: header/column mismatch");
    }
    std::ofstream out(path);
    if (!out) throw IoError("write_csv: cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << "\n";
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            out << (c ? "," : "") << format_full(data(r, c));
        }
        out << "\n";
    }
    if (!out) throw IoError("write_csv: short write to " + path.string());
}

inline Eigen::MatrixXd read_csv(const std::filesystem::path& path,
                                std::vector<std::string>* header = nullptr) {
    std::ifstream in(path);
    if (!in) throw IoError("read_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("read_csv: empty file " + path.string());
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) head.push_back(cell);
    }
    if (header) *header = head;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError("read_csv: bad number '" + cell + "' in " + path.string());
            }
        }
        if (row.size() != head.size()) {
            throw FormatError("read_csv: ragged row in " + path.string());
        }
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd data(rows.size(), head.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < head.size(); ++c) data(r, c) = rows[r][c];
    }
    return data;
}

}  // namespace qdyn
