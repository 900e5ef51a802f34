#include "doctest.h"

#include <filesystem>

#include "qdyn/basis.hpp"
#include "test_common.hpp"

using namespace qdyn;

namespace {

BoundStates morse_bound() {
    static BoundStates bound =
        solve_bound_states(testing::morse_oh_grid(), PotentialModel{testing::morse_oh()}, 0, 21);
    return bound;
}

}  // namespace

TEST_CASE("projector observable has a single diagonal one") {
    ObservableSpec spec{ProjectorObservable{{1}}, "p1"};
    auto op = matrix_elements(morse_bound(), spec);
    CHECK(op.matrix.rows() == 22);
    CHECK(op.matrix(1, 1) == 1.0);
    CHECK(op.matrix.sum() == 1.0);
}

TEST_CASE("overlap observable is the indicator vector") {
    ObservableSpec spec{OverlapObservable{{0}}, "o0"};
    auto op = matrix_elements(morse_bound(), spec);
    CHECK(op.vector.size() == 22);
    CHECK(op.vector[0] == 1.0);
    CHECK(op.vector.sum() == 1.0);
}

TEST_CASE("state indices out of range raise IndexError") {
    CHECK_THROWS_AS(matrix_elements(morse_bound(), ObservableSpec{ProjectorObservable{{22}}, ""}),
                    IndexError);
    CHECK_THROWS_AS(matrix_elements(morse_bound(), ObservableSpec{OverlapObservable{{-1}}, ""}),
                    IndexError);
}

TEST_CASE("gaussian AMO matrix is symmetric with non-negative diagonal") {
    ObservableSpec spec{AmoObservable{AmoModel{GaussianAmo{2.5, 1.0 / 50.0}}}, "gauss"};
    auto op = matrix_elements(morse_bound(), spec);
    CHECK((op.matrix - op.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(op.matrix.diagonal().minCoeff() >= 0.0);
}

TEST_CASE("dipole matrix elements agree with an independent quadrature") {
    auto bound = morse_bound();
    const auto dip = testing::mecke_oh();
    Eigen::MatrixXd mu = matrix_elements(bound, dip);
    CHECK((mu - mu.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    // direct sum as the oracle, for a few entries
    const Eigen::VectorXd x = bound.grid.points();
    const double dx = bound.grid.spacing();
    for (auto [i, j] : {std::pair{0, 1}, {0, 5}, {3, 3}, {10, 21}}) {
        double acc = 0.0;
        for (int g = 0; g < x.size(); ++g) {
            acc += bound.wavefunctions(g, i) * dip(x[g]) * bound.wavefunctions(g, j) * dx;
        }
        CHECK(mu(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("energy basis export/import round trip") {
    auto bound = morse_bound();
    std::vector<ObservableSpec> obs;
    obs.push_back({ProjectorObservable{{0}}, "p0"});
    obs.push_back({OverlapObservable{{1}}, "o1"});
    obs.push_back({AmoObservable{AmoModel{GaussianAmo{2.5, 0.02}}}, "amo"});
    const auto sbc = testing::linear_sbc();
    auto basis = make_energy_basis(bound, {testing::mecke_oh()}, &sbc, obs);

    const auto dir = std::filesystem::temp_directory_path() / "qdyn_test_tise";
    std::filesystem::remove_all(dir);
    export_energy_basis(basis, dir);
    auto loaded = import_energy_basis(dir);

    CHECK((loaded.energies - basis.energies).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.dipole[0] - basis.dipole[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.sbc - basis.sbc).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(loaded.observables.size() == 3);
    CHECK(loaded.observables[0].kind == ObservableKind::Projector);
    CHECK(loaded.observables[1].kind == ObservableKind::Overlap);
    CHECK(loaded.observables[2].kind == ObservableKind::Amo);
    CHECK((loaded.observables[2].matrix - basis.observables[2].matrix).cwiseAbs().maxCoeff() ==
          0.0);
    std::filesystem::remove_all(dir);
}
