#include "doctest.h"

#include <cmath>

#include "qdyn/grid.hpp"
#include "test_common.hpp"

using namespace qdyn;

TEST_CASE("Morse oscillator has exactly 22 bound states on the reference grid") {
    const PotentialModel pot{testing::morse_oh()};
    CHECK(morse_bound_state_count(testing::morse_oh(), testing::morse_oh_mass()) == 22);

    auto bound = solve_bound_states(testing::morse_oh_grid(), pot, 0, 21);
    CHECK(bound.n_states() == 22);
    // v = 22 must be rejected as a continuum state
    CHECK_THROWS_AS(solve_bound_states(testing::morse_oh_grid(), pot, 0, 22),
                    BoundStateUnavailable);
}

TEST_CASE("Morse eigenvalues match the closed-form spectrum to 1e-6 relative") {
    const PotentialModel pot{testing::morse_oh()};
    auto bound = solve_bound_states(testing::morse_oh_grid_fine(), pot, 0, 21);
    for (int v = 0; v <= 21; ++v) {
        const double exact = testing::morse_energy(testing::morse_oh(), testing::morse_oh_mass(), v);
        CHECK(std::abs(bound.energies[v] - exact) / std::abs(exact) < 1e-6);
    }
}

TEST_CASE("harmonic Taylor potential reproduces the analytic ladder") {
    const double omega = 0.01;
    const double mass = 100.0;
    // V = 1/2 m w^2 x^2; Taylor coefficients carry factorial weights
    const PotentialModel pot{TaylorModel{0.0, {0.0, 0.0, mass * omega * omega}}};
    const GridSpec grid{256, -40.0, 40.0, mass};
    auto bound = solve_bound_states(grid, pot, 0, 5);
    for (int v = 0; v <= 5; ++v) {
        CHECK(std::abs(bound.energies[v] - omega * (v + 0.5)) < 1e-8);
    }
}

TEST_CASE("eigenvectors are orthonormal under the grid quadrature") {
    const PotentialModel pot{testing::morse_oh()};
    auto bound = solve_bound_states(testing::morse_oh_grid(), pot, 0, 21);
    const double dx = bound.grid.spacing();
    Eigen::MatrixXd overlap = bound.wavefunctions.transpose() * bound.wavefunctions * dx;
    overlap.diagonal().array() -= 1.0;
    CHECK(overlap.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grid convergence check passes on the fine grid and flags a coarse one") {
    const PotentialModel pot{testing::morse_oh()};
    BoundStateOptions opts;
    opts.check_convergence = true;
    CHECK_NOTHROW(solve_bound_states(testing::morse_oh_grid_fine(), pot, 0, 5, opts));

    const GridSpec coarse{32, 0.7, 10.0, testing::morse_oh_mass()};
    CHECK_THROWS_AS(solve_bound_states(coarse, pot, 0, 5, opts), GridUnconverged);
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS((GridSpec{4, 0.0, 1.0, 1.0}.validate()), ValidationError);
    CHECK_THROWS_AS((GridSpec{64, 1.0, 0.0, 1.0}.validate()), ValidationError);
    CHECK_THROWS_AS((PotentialModel{MorsePotential{-1.0, 1.0, 1.0}}.validate()), ValidationError);
}
