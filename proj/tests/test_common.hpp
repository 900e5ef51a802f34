// test_common.hpp — shared fixtures: the OH-stretch Morse oscillator and small
// toy systems used across the suite

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "qdyn/basis.hpp"
#include "qdyn/bilinear.hpp"
#include "qdyn/constants.hpp"
#include "qdyn/grid.hpp"

namespace testing {

// OH-stretch Morse oscillator (atomic units)
inline qdyn::MorsePotential morse_oh() { return {0.1994, 1.821, 1.189}; }
inline double morse_oh_mass() { return 0.9481 * qdyn::constants::mass_u; }
inline qdyn::GridSpec morse_oh_grid() { return {256, 0.7, 10.0, morse_oh_mass()}; }
// wider grid converging the near-threshold states
inline qdyn::GridSpec morse_oh_grid_fine() { return {512, 0.7, 14.0, morse_oh_mass()}; }

// closed-form Morse eigenvalue, E_v = w0 (v + 1/2) - w0^2 (v + 1/2)^2 / (4 d_e)
inline double morse_energy(const qdyn::MorsePotential& pot, double mass, int v) {
    const double w0 = pot.alpha * std::sqrt(2.0 * pot.d_e / mass);
    const double vh = v + 0.5;
    return w0 * vh - w0 * w0 * vh * vh / (4.0 * pot.d_e);
}

inline qdyn::DipoleModel mecke_oh() {
    using namespace qdyn::constants;
    return {qdyn::MeckeDipole{0.6 * length_angstrom, 7.85 * dipole_debye / length_angstrom}};
}

inline qdyn::SbcModel linear_sbc() { return {qdyn::TaylorModel{0.0, {0.0, 1.0}}}; }

// equidistant three-level system with nearest-neighbour couplings
inline qdyn::EnergyBasisSystem three_level(double omega = 1.0, double coupling = 1.0) {
    qdyn::EnergyBasisSystem sys;
    sys.energies = Eigen::Vector3d(0.0, omega, 2.0 * omega);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(3, 3);
    mu(0, 1) = mu(1, 0) = coupling;
    mu(1, 2) = mu(2, 1) = coupling;
    sys.dipole.push_back(mu);
    sys.sbc = mu;
    for (int q = 0; q < 3; ++q) {
        qdyn::ObservableOperator o;
        o.kind = qdyn::ObservableKind::Projector;
        o.label = "p" + std::to_string(q);
        o.matrix = Eigen::MatrixXd::Zero(3, 3);
        o.matrix(q, q) = 1.0;
        sys.observables.push_back(o);
    }
    return sys;
}

// two-level system, E = (0, omega), mu = sigma_x
inline qdyn::EnergyBasisSystem two_level(double omega = 1.0) {
    qdyn::EnergyBasisSystem sys;
    sys.energies = Eigen::Vector2d(0.0, omega);
    Eigen::MatrixXd mu(2, 2);
    mu << 0.0, 1.0, 1.0, 0.0;
    sys.dipole.push_back(mu);
    sys.sbc = mu;
    for (int q = 0; q < 2; ++q) {
        qdyn::ObservableOperator o;
        o.kind = qdyn::ObservableKind::Projector;
        o.label = "p" + std::to_string(q);
        o.matrix = Eigen::MatrixXd::Zero(2, 2);
        o.matrix(q, q) = 1.0;
        sys.observables.push_back(o);
    }
    return sys;
}

// random stable bilinear system with spectral abscissa <= -decay and small
// enough couplings for the generalized Gramian equations to be solvable
inline qdyn::BilinearSystem random_stable_bilinear(int n, int channels, int outputs,
                                                   unsigned seed, double decay = 1.0,
                                                   double coupling = 0.2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    auto rand_mat = [&](int r, int c) {
        Eigen::MatrixXcd m(r, c);
        for (int j = 0; j < c; ++j) {
            for (int i = 0; i < r; ++i) m(i, j) = qdyn::Complex(dist(rng), dist(rng));
        }
        return m;
    };
    Eigen::MatrixXcd a = rand_mat(n, n);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(a, false);
    a -= (eig.eigenvalues().real().maxCoeff() + decay) * Eigen::MatrixXcd::Identity(n, n);

    qdyn::BilinearSystem sys;
    sys.kind = qdyn::SystemKind::Lvne;
    sys.dim = n;
    sys.n_states = n;
    sys.A = qdyn::SparseMatrixC(a.sparseView());
    for (int k = 0; k < channels; ++k) {
        Eigen::MatrixXcd nk = rand_mat(n, n);
        nk *= coupling / nk.operatorNorm();
        sys.N.push_back(qdyn::SparseMatrixC(nk.sparseView()));
        Eigen::VectorXcd b = rand_mat(n, 1);
        sys.b.push_back(b / b.norm());
    }
    sys.x_e = Eigen::VectorXcd::Zero(n);
    sys.x0 = Eigen::VectorXcd::Zero(n);
    for (int q = 0; q < outputs; ++q) {
        qdyn::Output out;
        out.label = "y" + std::to_string(q);
        out.form = qdyn::OutputForm::Linear;
        Eigen::VectorXcd c = rand_mat(n, 1);
        out.c = c / c.norm();
        sys.outputs.push_back(std::move(out));
    }
    return sys;
}

}  // namespace testing
