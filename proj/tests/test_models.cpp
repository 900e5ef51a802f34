#include "doctest.h"

#include <cmath>

#include "qdyn/models.hpp"

using namespace qdyn;

TEST_CASE("Taylor series uses factorial weights") {
    // f(x) = 2 + 3 x + 5 x^2/2 around 0
    TaylorModel f{0.0, {2.0, 3.0, 5.0}};
    CHECK(f(0.0) == doctest::Approx(2.0));
    CHECK(f(2.0) == doctest::Approx(2.0 + 6.0 + 10.0));
    TaylorModel shifted{1.0, {0.0, 1.0}};
    CHECK(shifted(3.0) == doctest::Approx(2.0));
}

TEST_CASE("Mecke dipole shape") {
    MeckeDipole mu{2.0, 3.0};
    CHECK(mu(0.0) == doctest::Approx(0.0));
    CHECK(mu(2.0) == doctest::Approx(3.0 * 2.0 * std::exp(-1.0)));
}

TEST_CASE("cubic spline interpolates smooth data and clamps outside") {
    std::vector<double> xs, ys;
    for (int i = 0; i <= 40; ++i) {
        const double x = -2.0 + 0.1 * i;
        xs.push_back(x);
        ys.push_back(std::sin(x));
    }
    TabulatedModel tab(xs, ys);
    for (double x = -1.5; x < 1.5; x += 0.037) {
        CHECK(std::abs(tab(x) - std::sin(x)) < 2e-5);
    }
    // natural boundary conditions lose accuracy near the table edges
    CHECK(std::abs(tab(-1.95) - std::sin(-1.95)) < 2e-3);
    CHECK(tab(-5.0) == doctest::Approx(std::sin(-2.0)));  // clamped
    CHECK(tab(5.0) == doctest::Approx(std::sin(2.0)));
}

TEST_CASE("dissociation thresholds per potential family") {
    PotentialModel morse{MorsePotential{0.5, 1.0, 1.0}};
    CHECK(morse.dissociation_threshold() == doctest::Approx(0.5));
    PotentialModel poly{TaylorModel{0.0, {0.0, 0.0, 1.0}}};
    CHECK(std::isinf(poly.dissociation_threshold()));
}

TEST_CASE("gaussian AMO peaks at its center") {
    GaussianAmo g{2.5, 0.02};
    CHECK(g(2.5) == doctest::Approx(1.0));
    CHECK(g(2.5 + 0.02) == doctest::Approx(std::exp(-0.5)));
}
