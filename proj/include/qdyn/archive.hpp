// archive.hpp — on-disk array archive: a directory holding manifest.json and
// one little-endian binary blob per named array.
//
// Array kinds: "dense" (row-major), "vector", "sparse-coo" (records of
// row:u64, col:u64, re:f64, im:f64). Scalars: "f64" or "c128" (interleaved
// re, im doubles). Round-trips are bit-exact.

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdyn/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "archive blobs assume a little-endian host");

namespace qdyn {

using json = nlohmann::json;
using Complex = std::complex<double>;
using SparseMatrixC = Eigen::SparseMatrix<Complex>;

class ArchiveWriter {
public:
    explicit ArchiveWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        manifest_["format"] = "qdyn-archive";
        manifest_["version"] = 1;
        manifest_["arrays"] = json::array();
    }

    void set_meta(const json& meta) { manifest_["meta"] = meta; }
    void set_run_info(const json& run) { manifest_["run"] = run; }

    void add_vector(const std::string& name, const Eigen::VectorXd& v) {
        add_blob(name, "vector", "f64", {v.size()}, v.data(), sizeof(double) * v.size());
    }

    void add_vector(const std::string& name, const Eigen::VectorXcd& v) {
        add_blob(name, "vector", "c128", {v.size()}, v.data(), sizeof(Complex) * v.size());
    }

    void add_dense(const std::string& name, const Eigen::MatrixXd& m) {
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        RowMajor rm = m;
        add_blob(name, "dense", "f64", {m.rows(), m.cols()}, rm.data(),
                 sizeof(double) * m.size());
    }

    void add_dense(const std::string& name, const Eigen::MatrixXcd& m) {
        using RowMajor = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        RowMajor rm = m;
        add_blob(name, "dense", "c128", {m.rows(), m.cols()}, rm.data(),
                 sizeof(Complex) * m.size());
    }

    void add_sparse(const std::string& name, const SparseMatrixC& m) {
        struct Record {
            std::uint64_t row, col;
            double re, im;
        };
        static_assert(sizeof(Record) == 32);
        std::vector<Record> records;
        records.reserve(static_cast<std::size_t>(m.nonZeros()));
        for (int k = 0; k < m.outerSize(); ++k) {
            for (SparseMatrixC::InnerIterator it(m, k); it; ++it) {
                records.push_back({static_cast<std::uint64_t>(it.row()),
                                   static_cast<std::uint64_t>(it.col()), it.value().real(),
                                   it.value().imag()});
            }
        }
        json entry = array_entry(name, "sparse-coo", "c128", {m.rows(), m.cols()});
        entry["nnz"] = records.size();
        manifest_["arrays"].push_back(entry);
        write_file(name, records.data(), records.size() * sizeof(Record));
    }

    // writes manifest.json; blobs are written as arrays are added
    void finish() {
        std::filesystem::create_directories(dir_);
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        if (!out) throw IoError("archive: cannot write " + (dir_ / "manifest.json").string());
        out << manifest_.dump(2) << "\n";
    }

private:
    json array_entry(const std::string& name, const char* kind, const char* scalar,
                     std::initializer_list<Eigen::Index> shape) {
        json entry;
        entry["name"] = name;
        entry["kind"] = kind;
        entry["scalar"] = scalar;
        entry["shape"] = json::array();
        for (auto s : shape) entry["shape"].push_back(s);
        entry["file"] = name + ".bin";
        return entry;
    }

    void add_blob(const std::string& name, const char* kind, const char* scalar,
                  std::initializer_list<Eigen::Index> shape, const void* data,
                  std::size_t bytes) {
        manifest_["arrays"].push_back(array_entry(name, kind, scalar, shape));
        write_file(name, data, bytes);
    }

    void write_file(const std::string& name, const void* data, std::size_t bytes) {
        std::filesystem::create_directories(dir_);
        const auto path = dir_ / (name + ".bin");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("archive: cannot write " + path.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        if (!out) throw IoError("archive: short write to " + path.string());
    }

    std::filesystem::path dir_;
    json manifest_;
};

class ArchiveReader {
public:
    explicit ArchiveReader(std::filesystem::path dir) : dir_(std::move(dir)) {
        const auto mpath = dir_ / "manifest.json";
        std::ifstream in(mpath, std::ios::binary);
        if (!in) throw IoError("archive: missing " + mpath.string());
        try {
            in >> manifest_;
        } catch (const json::exception& e) {
            throw FormatError("archive: bad manifest in " + dir_.string() + ": " + e.what());
        }
        if (!manifest_.contains("arrays") || !manifest_["arrays"].is_array()) {
            throw FormatError("archive: manifest lacks arrays list");
        }
    }

    bool has(const std::string& name) const { return find(name) != nullptr; }

    json meta() const { return manifest_.value("meta", json::object()); }
    const json& manifest() const { return manifest_; }

    Eigen::VectorXd vector_f64(const std::string& name) const {
        const json& e = require(name, "vector", "f64");
        Eigen::VectorXd v(shape_of(e)[0]);
        read_file(e, v.data(), sizeof(double) * v.size());
        return v;
    }

    Eigen::VectorXcd vector_c128(const std::string& name) const {
        const json& e = require(name, "vector", "c128");
        Eigen::VectorXcd v(shape_of(e)[0]);
        read_file(e, v.data(), sizeof(Complex) * v.size());
        return v;
    }

    Eigen::MatrixXd dense_f64(const std::string& name) const {
        const json& e = require(name, "dense", "f64");
        const auto shape = shape_of(e);
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        RowMajor rm(shape[0], shape[1]);
        read_file(e, rm.data(), sizeof(double) * rm.size());
        return rm;
    }

    Eigen::MatrixXcd dense_c128(const std::string& name) const {
        const json& e = require(name, "dense", "c128");
        const auto shape = shape_of(e);
        using RowMajor = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        RowMajor rm(shape[0], shape[1]);
        read_file(e, rm.data(), sizeof(Complex) * rm.size());
        return rm;
    }

    SparseMatrixC sparse(const std::string& name) const {
        const json& e = require(name, "sparse-coo", "c128");
        const auto shape = shape_of(e);
        struct Record {
            std::uint64_t row, col;
            double re, im;
        };
        const auto path = dir_ / file_of(e);
        const auto bytes = file_size_checked(path);
        if (bytes % sizeof(Record) != 0) {
            throw FormatError("archive: sparse blob size not a multiple of the record size: " +
                              path.string());
        }
        std::vector<Record> records(bytes / sizeof(Record));
        read_raw(path, records.data(), bytes);
        std::vector<Eigen::Triplet<Complex>> triplets;
        triplets.reserve(records.size());
        for (const auto& r : records) {
            if (r.row >= static_cast<std::uint64_t>(shape[0]) ||
                r.col >= static_cast<std::uint64_t>(shape[1])) {
                throw FormatError("archive: sparse index out of bounds in " + path.string());
            }
            triplets.emplace_back(static_cast<int>(r.row), static_cast<int>(r.col),
                                  Complex(r.re, r.im));
        }
        SparseMatrixC m(shape[0], shape[1]);
        m.setFromTriplets(triplets.begin(), triplets.end());
        return m;
    }

private:
    const json* find(const std::string& name) const {
        for (const auto& e : manifest_["arrays"]) {
            if (e.value("name", "") == name) return &e;
        }
        return nullptr;
    }

    const json& require(const std::string& name, const char* kind, const char* scalar) const {
        const json* e = find(name);
        if (!e) throw FormatError("archive: no array named '" + name + "' in " + dir_.string());
        if (e->value("kind", "") != kind || e->value("scalar", "") != scalar) {
            throw FormatError("archive: array '" + name + "' is " + e->value("kind", "?") + "/" +
                              e->value("scalar", "?") + ", expected " + kind + "/" + scalar);
        }
        return *e;
    }

    static std::vector<Eigen::Index> shape_of(const json& e) {
        std::vector<Eigen::Index> shape;
        for (const auto& s : e.at("shape")) shape.push_back(s.get<Eigen::Index>());
        if (shape.empty()) throw FormatError("archive: array with empty shape");
        return shape;
    }

    static std::string file_of(const json& e) {
        return e.value("file", e.value("name", "") + ".bin");
    }

    std::uintmax_t file_size_checked(const std::filesystem::path& path) const {
        std::error_code ec;
        const auto size = std::filesystem::file_size(path, ec);
        if (ec) throw IoError("archive: missing blob " + path.string());
        return size;
    }

    void read_raw(const std::filesystem::path& path, void* data, std::size_t bytes) const {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("archive: missing blob " + path.string());
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
        if (in.gcount() != static_cast<std::streamsize>(bytes)) {
            throw FormatError("archive: truncated blob " + path.string());
        }
    }

    void read_file(const json& e, void* data, std::size_t bytes) const {
        const auto path = dir_ / file_of(e);
        const auto size = file_size_checked(path);
        if (size != bytes) {
            throw FormatError("archive: blob " + path.string() + " has " + std::to_string(size) +
                              " bytes, expected " + std::to_string(bytes));
        }
        read_raw(path, data, bytes);
    }

    std::filesystem::path dir_;
    json manifest_;
};

}  // namespace qdyn
