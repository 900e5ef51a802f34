// grid.hpp — 1D sinc-DVR bound-state eigensolver

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

#include "qdyn/errors.hpp"
#include "qdyn/models.hpp"

namespace qdyn {

struct GridSpec {
    int n_points{0};
    double x_min{0.0};
    double x_max{0.0};
    double mass{0.0};  // reduced mass in electron masses

    void validate() const {
        if (n_points < 8) throw ValidationError("GridSpec: n_points must be >= 8");
        if (!(x_min < x_max)) throw ValidationError("GridSpec: x_min must be < x_max");
        if (!(mass > 0.0)) throw ValidationError("GridSpec: mass must be > 0");
    }

    double spacing() const { return (x_max - x_min) / (n_points - 1); }

    Eigen::VectorXd points() const {
        return Eigen::VectorXd::LinSpaced(n_points, x_min, x_max);
    }
};

// Sinc-DVR kinetic-energy matrix on a uniform grid (uniform quadrature weights).
inline Eigen::MatrixXd kinetic_matrix(const GridSpec& grid) {
    grid.validate();
    const int n = grid.n_points;
    const double dx = grid.spacing();
    const double pref = 1.0 / (2.0 * grid.mass * dx * dx);
    Eigen::MatrixXd t(n, n);
    for (int i = 0; i < n; ++i) {
        t(i, i) = pref * std::numbers::pi * std::numbers::pi / 3.0;
        for (int j = 0; j < i; ++j) {
            const int d = i - j;
            const double v = pref * 2.0 * ((d % 2 == 0) ? 1.0 : -1.0) / (double(d) * double(d));
            t(i, j) = v;
            t(j, i) = v;
        }
    }
    return t;
}

// Bound states of H0 = T + V on the grid. Wavefunction values are stored
// column-wise and are orthonormal under the grid quadrature sum_g psi_i psi_j dx.
struct BoundStates {
    GridSpec grid;
    Eigen::VectorXd energies;       // ascending, only states below dissociation
    Eigen::MatrixXd wavefunctions;  // n_points x n_states
    double threshold{0.0};          // dissociation threshold used for the cut

    int n_states() const { return static_cast<int>(energies.size()); }
};

struct BoundStateOptions {
    bool check_convergence{false};     // re-solve with doubled n_points
    double convergence_tol{1e-8};
};

namespace detail {

inline BoundStates solve_bound_states_impl(const GridSpec& grid, const PotentialModel& pot,
                                           int v_min, int v_max) {
    grid.validate();
    pot.validate();
    if (v_min < 0 || v_max < v_min) throw ValidationError("solve_bound_states: bad state range");
    if (v_max >= grid.n_points) {
        throw BoundStateUnavailable("solve_bound_states: v_max exceeds grid size");
    }
    const Eigen::VectorXd x = grid.points();
    Eigen::MatrixXd h = kinetic_matrix(grid);
    for (int i = 0; i < grid.n_points; ++i) h(i, i) += pot(x[i]);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw NumericalFailure("solve_bound_states: eigensolver failed");
    }

    const double threshold = pot.dissociation_threshold();
    int n_bound = 0;
    while (n_bound < grid.n_points && solver.eigenvalues()[n_bound] < threshold) ++n_bound;
    if (v_max >= n_bound) {
        throw BoundStateUnavailable("solve_bound_states: state v=" + std::to_string(v_max) +
                                    " lies above the dissociation threshold (" +
                                    std::to_string(n_bound) + " bound states)");
    }

    BoundStates out;
    out.grid = grid;
    out.threshold = threshold;
    const int n_keep = v_max - v_min + 1;
    out.energies = solver.eigenvalues().segment(v_min, n_keep);
    // convert l2-normalized eigenvectors to wavefunction values; fix the sign so
    // the largest-magnitude component is positive
    const double dx = grid.spacing();
    out.wavefunctions.resize(grid.n_points, n_keep);
    for (int v = 0; v < n_keep; ++v) {
        Eigen::VectorXd col = solver.eigenvectors().col(v_min + v);
        int imax = 0;
        col.cwiseAbs().maxCoeff(&imax);
        if (col[imax] < 0.0) col = -col;
        out.wavefunctions.col(v) = col / std::sqrt(dx);
    }
    return out;
}

}  // namespace detail

inline BoundStates solve_bound_states(const GridSpec& grid, const PotentialModel& pot,
                                      int v_min, int v_max,
                                      const BoundStateOptions& opts = {}) {
    BoundStates out = detail::solve_bound_states_impl(grid, pot, v_min, v_max);
    if (opts.check_convergence) {
        GridSpec fine = grid;
        fine.n_points = 2 * grid.n_points;
        const BoundStates ref = detail::solve_bound_states_impl(fine, pot, v_min, v_max);
        const double change = (ref.energies - out.energies).cwiseAbs().maxCoeff();
        if (change > opts.convergence_tol) {
            throw GridUnconverged("solve_bound_states: doubling n_points changes energies by " +
                                  std::to_string(change));
        }
    }
    return out;
}

// Number of bound states of a Morse oscillator, floor(sqrt(2 m d_e)/alpha - 1/2) + 1
inline int morse_bound_state_count(const MorsePotential& pot, double mass) {
    return static_cast<int>(std::floor(std::sqrt(2.0 * mass * pot.d_e) / pot.alpha - 0.5)) + 1;
}

}  // namespace qdyn
