#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "qdyn/archive.hpp"

using namespace qdyn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("qdyn_test_" + tag);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("archive round-trips dense, vector, and sparse arrays bit-exactly") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist;
    Eigen::MatrixXd a(3, 5);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = dist(rng);
    Eigen::MatrixXcd c(4, 4);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = Complex(dist(rng), dist(rng));
    Eigen::VectorXd v(9);
    for (int i = 0; i < v.size(); ++i) v[i] = dist(rng);
    SparseMatrixC s(6, 7);
    std::vector<Eigen::Triplet<Complex>> trips{{0, 0, Complex(1.5, -2.5)},
                                               {5, 6, Complex(-0.25, 0.0)},
                                               {2, 3, Complex(0.0, 1e-300)}};
    s.setFromTriplets(trips.begin(), trips.end());

    const auto dir = temp_dir("roundtrip");
    {
        ArchiveWriter w(dir);
        w.add_dense("a", a);
        w.add_dense("c", c);
        w.add_vector("v", v);
        w.add_sparse("s", s);
        w.set_meta({{"payload", "test"}});
        w.finish();
    }
    ArchiveReader r(dir);
    CHECK((r.dense_f64("a") - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.dense_c128("c") - c).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.vector_f64("v") - v).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::MatrixXcd(SparseMatrixC(r.sparse("s") - s)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.meta()["payload"] == "test");
    fs::remove_all(dir);
}

TEST_CASE("missing archive directory raises IoError") {
    CHECK_THROWS_AS(ArchiveReader(fs::path("/nonexistent/qdyn_archive")), IoError);
}

TEST_CASE("truncated blob raises FormatError") {
    const auto dir = temp_dir("truncated");
    {
        ArchiveWriter w(dir);
        const Eigen::VectorXd ones16 = Eigen::VectorXd::Ones(16);
        w.add_vector("v", ones16);
        w.finish();
    }
    fs::resize_file(dir / "v.bin", 40);  // not 16 doubles any more
    ArchiveReader r(dir);
    CHECK_THROWS_AS(r.vector_f64("v"), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("type mismatch and missing arrays raise FormatError") {
    const auto dir = temp_dir("mismatch");
    {
        ArchiveWriter w(dir);
        const Eigen::VectorXd ones4 = Eigen::VectorXd::Ones(4);
        w.add_vector("v", ones4);
        w.finish();
    }
    ArchiveReader r(dir);
    CHECK_THROWS_AS(r.dense_f64("v"), FormatError);
    CHECK_THROWS_AS(r.vector_f64("nope"), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("writes are deterministic byte-for-byte") {
    auto write_one = [](const fs::path& dir) {
        ArchiveWriter w(dir);
        Eigen::MatrixXcd m(2, 2);
        m << Complex(1, 2), Complex(3, 4), Complex(5, 6), Complex(7, 8);
        w.add_dense("m", m);
        w.set_meta({{"key", "value"}});
        w.finish();
    };
    const auto d1 = temp_dir("det1"), d2 = temp_dir("det2");
    write_one(d1);
    write_one(d2);
    for (const char* name : {"manifest.json", "m.bin"}) {
        std::ifstream f1(d1 / name, std::ios::binary), f2(d2 / name, std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(s1 == s2);
        CHECK(!s1.empty());
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}
