// h2.hpp — H2 error of a reduced model against the original system, computed
// from the Gramian of the block error system.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "qdyn/reduction.hpp"

namespace qdyn {

struct H2Result {
    double value{0.0};       // trace(C_E W_E C_E^dag), controllability route
    double value_dual{0.0};  // trace(B_E^dag W_E' B_E), observability route
    int iterations{0};
    double residual{0.0};
};

// Both systems must be stable and expose the same channels and outputs.
inline H2Result h2_error_full(const BilinearSystem& sys, const BilinearSystem& red,
                              const GeneralizedOptions& opts = {}) {
    if (sys.channels() != red.channels() || sys.outputs_count() != red.outputs_count()) {
        throw ValidationError("h2_error: systems expose different channels or outputs");
    }
    const int n = sys.dim, d = red.dim;
    const int m = sys.channels();
    const int p = sys.outputs_count();

    Eigen::MatrixXcd a_e = Eigen::MatrixXcd::Zero(n + d, n + d);
    a_e.topLeftCorner(n, n) = dense(sys.A);
    a_e.bottomRightCorner(d, d) = dense(red.A);
    std::vector<Eigen::MatrixXcd> n_e(m, Eigen::MatrixXcd::Zero(n + d, n + d));
    for (int k = 0; k < m; ++k) {
        n_e[k].topLeftCorner(n, n) = dense(sys.N[k]);
        n_e[k].bottomRightCorner(d, d) = dense(red.N[k]);
    }
    Eigen::MatrixXcd b_e(n + d, std::max(1, m));
    b_e.setZero();
    for (int k = 0; k < m; ++k) {
        b_e.col(k).head(n) = sys.b[k];
        b_e.col(k).tail(d) = red.b[k];
    }
    Eigen::MatrixXcd c_e(std::max(1, p), n + d);
    c_e.setZero();
    for (int q = 0; q < p; ++q) {
        c_e.row(q).head(n) = sys.outputs[q].c.adjoint();
        c_e.row(q).tail(d) = -red.outputs[q].c.adjoint();
    }

    SchurCache schur(a_e);
    auto ctrl = solve_generalized_lyapunov(schur, n_e, b_e * b_e.adjoint(), opts);
    auto obs = solve_generalized_lyapunov_dual(schur, n_e, c_e.adjoint() * c_e, opts);

    H2Result out;
    out.value = (c_e * ctrl.W * c_e.adjoint()).real().trace();
    out.value_dual = (b_e.adjoint() * obs.W * b_e).real().trace();
    out.iterations = ctrl.iterations + obs.iterations;
    out.residual = std::max(ctrl.residual, obs.residual);

    const double scale = std::max({std::abs(out.value), std::abs(out.value_dual), 1e-12});
    const double floor = 1e-10 * std::max(1.0, b_e.squaredNorm() * c_e.squaredNorm());
    if (std::abs(out.value - out.value_dual) > 1e-6 * scale + floor * 1e-6) {
        throw NumericalFailure("h2_error: controllability/observability routes disagree: " +
                               std::to_string(out.value) + " vs " +
                               std::to_string(out.value_dual));
    }
    return out;
}

inline double h2_error(const BilinearSystem& sys, const BilinearSystem& red,
                       const GeneralizedOptions& opts = {}) {
    return h2_error_full(sys, red, opts).value;
}

}  // namespace qdyn
