// propagate.hpp — time integration of the shifted bilinear input equation and
// output evaluation.
//
// Adaptive propagation uses the Dormand-Prince embedded 4(5) pair with PI step
// control inside each user main step; fixed-step propagation offers classic
// RK4 / RK2 with a user substep count.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "qdyn/bilinear.hpp"
#include "qdyn/field.hpp"

namespace qdyn {

using FieldFunction = std::function<Eigen::VectorXd(double)>;

inline FieldFunction as_function(const ControlField& field) {
    return [&field](double t) { return field.value(t); };
}

inline FieldFunction no_field(int channels) {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(channels);
    return [zero](double) { return zero; };
}

// dx/dt = A x + i sum_k (xi u_k) (N_k x + b_k); xi is the stored field scale
inline void bilinear_rhs(const BilinearSystem& sys, const Eigen::VectorXcd& x,
                         const Eigen::VectorXd& u, Eigen::VectorXcd& dxdt) {
    dxdt.noalias() = sys.A * x;
    for (int k = 0; k < sys.channels(); ++k) {
        const double uk = sys.field_scale * u[k];
        if (uk != 0.0) {
            dxdt.noalias() += (imag_unit * uk) * (sys.N[k] * x);
            dxdt.noalias() += (imag_unit * uk) * sys.b[k];
        }
    }
}

inline double output_value(const BilinearSystem& sys, const Output& out,
                           const Eigen::VectorXcd& x) {
    if (out.form == OutputForm::Linear) {
        return out.c.dot(x).real() + out.offset;
    }
    const Eigen::VectorXcd dx = out.D * x;
    return x.dot(dx).real() + 2.0 * sys.x_e.dot(dx).real() +
           sys.x_e.dot(out.D * sys.x_e).real();
}

inline Eigen::VectorXd evaluate_outputs(const BilinearSystem& sys, const Eigen::VectorXcd& x) {
    Eigen::VectorXd y(sys.outputs_count());
    for (int q = 0; q < sys.outputs_count(); ++q) y[q] = output_value(sys, sys.outputs[q], x);
    return y;
}

struct Trajectory {
    Eigen::VectorXd times;                 // main-step times
    std::vector<Eigen::VectorXcd> states;  // shifted states at main steps
    Eigen::MatrixXd outputs;               // n_main+1 x p

    int n_steps() const { return static_cast<int>(times.size()); }
};

enum class FixedScheme { RK4, RK2 };

namespace detail {

// Dormand-Prince 5(4) coefficients
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // embedded 4th-order weights
    static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                            e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
};

}  // namespace detail

struct AdaptiveOptions {
    double reltol{1e-6};
    double abstol{1e-12};
    double min_step{1e-12};
    double safety{0.9};
    double grow_max{5.0};
    double grow_min{0.2};
};

// Integrates over the main grid, recording states and outputs at main steps.
inline Trajectory propagate_adaptive(const BilinearSystem& sys, const FieldFunction& field,
                                     const Eigen::VectorXcd& x0, const TimeGrid& grid,
                                     const AdaptiveOptions& opts = {}) {
    grid.validate();
    if (!(opts.reltol > 1e-14 && opts.reltol < 1e-2)) {
        throw ValidationError("propagate_adaptive: reltol must lie in (1e-14, 1e-2)");
    }
    using D = detail::Dopri5;
    const int n_main = grid.n_main();
    Trajectory traj;
    traj.times.resize(n_main + 1);
    traj.states.reserve(n_main + 1);
    traj.outputs.resize(n_main + 1, sys.outputs_count());

    Eigen::VectorXcd x = x0;
    Eigen::VectorXcd k1(sys.dim), k2(sys.dim), k3(sys.dim), k4(sys.dim), k5(sys.dim), k6(sys.dim),
        k7(sys.dim), xtmp(sys.dim), x5(sys.dim);

    auto rhs = [&](double t, const Eigen::VectorXcd& state, Eigen::VectorXcd& out) {
        bilinear_rhs(sys, state, field(t), out);
    };

    traj.times[0] = grid.t_begin();
    traj.states.push_back(x);
    traj.outputs.row(0) = evaluate_outputs(sys, x).transpose();

    double h = grid.delta / 10.0;  // initial guess, adapted immediately
    double err_prev = 1.0;
    bool have_k1 = false;

    for (int step = 0; step < n_main; ++step) {
        const double t_target = grid.t_begin() + (step + 1) * grid.delta;
        double t = grid.t_begin() + step * grid.delta;
        while (t < t_target - 1e-12 * grid.delta) {
            h = std::min(h, t_target - t);
            if (h < opts.min_step) {
                throw StiffnessFailure("propagate_adaptive: step size underflow at t = " +
                                       std::to_string(t));
            }
            if (!have_k1) rhs(t, x, k1);
            xtmp = x + h * (D::a21 * k1);
            rhs(t + D::c2 * h, xtmp, k2);
            xtmp = x + h * (D::a31 * k1 + D::a32 * k2);
            rhs(t + D::c3 * h, xtmp, k3);
            xtmp = x + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3);
            rhs(t + D::c4 * h, xtmp, k4);
            xtmp = x + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4);
            rhs(t + D::c5 * h, xtmp, k5);
            xtmp = x + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5);
            rhs(t + h, xtmp, k6);
            x5 = x + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
            rhs(t + h, x5, k7);

            // weighted rms of the 5th/4th order difference
            xtmp = h * ((D::b1 - D::e1) * k1 + (D::b3 - D::e3) * k3 + (D::b4 - D::e4) * k4 +
                        (D::b5 - D::e5) * k5 + (D::b6 - D::e6) * k6 - D::e7 * k7);
            double err = 0.0;
            for (int i = 0; i < sys.dim; ++i) {
                const double mag = std::abs(xtmp[i]);
                if (mag == 0.0) continue;
                const double scale =
                    opts.abstol + opts.reltol * std::max(std::abs(x[i]), std::abs(x5[i]));
                const double e = scale > 0.0 ? mag / scale
                                             : std::numeric_limits<double>::infinity();
                err += e * e;
            }
            err = std::sqrt(err / sys.dim);

            if (std::isfinite(err) && err <= 1.0) {
                t += h;
                x.swap(x5);
                k1.swap(k7);  // FSAL
                have_k1 = true;
                // PI controller
                const double fac = opts.safety * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                                   std::pow(err_prev, 0.4 / 5.0);
                h *= std::clamp(fac, opts.grow_min, opts.grow_max);
                err_prev = std::max(err, 1e-10);
            } else {
                const double shrink =
                    std::isfinite(err) ? opts.safety * std::pow(err, -1.0 / 5.0) : opts.grow_min;
                h *= std::clamp(shrink, opts.grow_min, 1.0);
                have_k1 = true;  // k1 still valid at unchanged (t, x)
            }
        }
        traj.times[step + 1] = t_target;
        traj.states.push_back(x);
        traj.outputs.row(step + 1) = evaluate_outputs(sys, x).transpose();
    }
    return traj;
}

// Classic fixed-substep Runge-Kutta; field values between samples come from
// linear interpolation.
inline Trajectory propagate_fixed(const BilinearSystem& sys, const FieldFunction& field,
                                  const Eigen::VectorXcd& x0, const TimeGrid& grid, int substeps,
                                  FixedScheme scheme = FixedScheme::RK4) {
    grid.validate();
    if (substeps < 1) throw ValidationError("propagate_fixed: substeps must be >= 1");
    const int n_main = grid.n_main();
    const double h = grid.delta / substeps;

    Trajectory traj;
    traj.times.resize(n_main + 1);
    traj.states.reserve(n_main + 1);
    traj.outputs.resize(n_main + 1, sys.outputs_count());

    Eigen::VectorXcd x = x0;
    Eigen::VectorXcd k1(sys.dim), k2(sys.dim), k3(sys.dim), k4(sys.dim), xtmp(sys.dim);
    auto rhs = [&](double t, const Eigen::VectorXcd& state, Eigen::VectorXcd& out) {
        bilinear_rhs(sys, state, field(t), out);
    };

    traj.times[0] = grid.t_begin();
    traj.states.push_back(x);
    traj.outputs.row(0) = evaluate_outputs(sys, x).transpose();

    for (int step = 0; step < n_main; ++step) {
        double t = grid.t_begin() + step * grid.delta;
        for (int s = 0; s < substeps; ++s) {
            if (scheme == FixedScheme::RK4) {
                rhs(t, x, k1);
                xtmp = x + 0.5 * h * k1;
                rhs(t + 0.5 * h, xtmp, k2);
                xtmp = x + 0.5 * h * k2;
                rhs(t + 0.5 * h, xtmp, k3);
                xtmp = x + h * k3;
                rhs(t + h, xtmp, k4);
                x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            } else {  // RK2 midpoint
                rhs(t, x, k1);
                xtmp = x + 0.5 * h * k1;
                rhs(t + 0.5 * h, xtmp, k2);
                x += h * k2;
            }
            t += h;
        }
        traj.times[step + 1] = grid.t_begin() + (step + 1) * grid.delta;
        traj.states.push_back(x);
        traj.outputs.row(step + 1) = evaluate_outputs(sys, x).transpose();
    }
    return traj;
}

// ---------------------------------------------------------------- diagnostics

inline double trace_of(const BilinearSystem& sys, const Eigen::VectorXcd& x_shifted) {
    const Eigen::VectorXcd t = trace_vector(sys);
    return t.dot(x_shifted + sys.x_e).real();
}

// smallest eigenvalue of the de-vectorized density matrix
inline double min_density_eigenvalue(const BilinearSystem& sys,
                                     const Eigen::VectorXcd& x_shifted) {
    Eigen::MatrixXcd rho = devectorize(sys, x_shifted + sys.x_e);
    rho = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho);
    return solver.eigenvalues().minCoeff();
}

}  // namespace qdyn
