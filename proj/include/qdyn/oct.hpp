// oct.hpp — monotonically convergent optimal control iteration.
//
// Alternates a backward sweep of the Lagrange multiplier z(t) with a forward
// sweep of the state x(t); the field is updated immediately from the sweep
// samples with mixing coefficients eta (backward) and zeta (forward).
// eta = zeta = 1 gives the Zhu-Botina-Rabitz scheme, eta = 0, zeta = 1 the
// Krotov method. Sweeps use fixed-substep Runge-Kutta; field values at stage
// times come from a linearization of the update formula.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "qdyn/propagate.hpp"

namespace qdyn {

enum class Functional { J1a, J1b, J1c };
enum class OverlapEval { AtBoundary, EveryT };

struct OctConfig {
    int target{0};
    Functional functional{Functional::J1a};
    double eta{1.0};
    double zeta{1.0};
    int max_iter{50};
    double tolerance{1e-10};  // stop when the gain J1 - J2 per iteration drops below
    int substeps{10};
    FixedScheme scheme{FixedScheme::RK4};
    OverlapEval j1c_eval{OverlapEval::AtBoundary};

    void validate(const BilinearSystem& sys) const {
        if (eta < 0.0 || eta > 2.0 || zeta < 0.0 || zeta > 2.0) {
            throw ValidationError("OctConfig: eta and zeta must lie in [0, 2]");
        }
        if (!(tolerance > 0.0)) throw ValidationError("OctConfig: tolerance must be > 0");
        if (max_iter < 1) throw ValidationError("OctConfig: max_iter must be >= 1");
        if (substeps < 1) throw ValidationError("OctConfig: substeps must be >= 1");
        if (target < 0 || target >= sys.outputs_count()) {
            throw IndexError("OctConfig: target observable out of range");
        }
        const Output& out = sys.outputs[target];
        switch (functional) {
            case Functional::J1a:
                if (out.form != OutputForm::Quadratic) {
                    throw ValidationError("J1a requires a quadratic (TDSE) target observable");
                }
                break;
            case Functional::J1b:
                if (out.form != OutputForm::Linear) {
                    throw ValidationError("J1b requires a linear (LvNE) target observable");
                }
                break;
            case Functional::J1c:
                if (out.form == OutputForm::Quadratic && !out.from_overlap) {
                    throw ValidationError("J1c requires an overlap-type target observable");
                }
                break;
        }
    }
};

struct OctReport {
    std::vector<double> j1, j2, j3, j_total;  // element 0 is the guess field
    std::vector<double> y_target;             // physical target output at final time
    ControlField field;
    Trajectory trajectory;  // final forward pass at main-step resolution
    int iterations{0};
    bool converged{false};

    // J1 - J2; the constraint residual J3 is a discretization diagnostic and is
    // kept out of the improvement metric
    double gain(std::size_t n) const { return j1[n] - j2[n]; }
};

// trajectory samples of one sweep at substep resolution
struct SweepData {
    double t0{0.0};
    double dt{0.0};
    Eigen::MatrixXcd samples;  // dim x (n_substeps + 1)
};

// linear interpolation of a row-sampled table at time t
inline Eigen::VectorXd interp_rows(const Eigen::MatrixXd& rows, double t0, double dt, double t) {
    const int last = static_cast<int>(rows.rows()) - 1;
    const double pos = (t - t0) / dt;
    if (pos <= 0.0) return rows.row(0).transpose();
    if (pos >= last) return rows.row(last).transpose();
    const int j = static_cast<int>(pos);
    const double w = pos - j;
    return (1.0 - w) * rows.row(j).transpose() + w * rows.row(j + 1).transpose();
}

namespace detail {

struct OctWorkspace {
    const BilinearSystem& sys;
    SparseMatrixC A_adj;
    std::vector<SparseMatrixC> N_adj;
    double xi;

    explicit OctWorkspace(const BilinearSystem& s) : sys(s), xi(s.field_scale) {
        A_adj = SparseMatrixC(s.A.adjoint());
        for (const auto& nk : s.N) N_adj.emplace_back(nk.adjoint());
    }

    void rhs_forward(const Eigen::VectorXcd& x, const Eigen::VectorXd& u,
                     Eigen::VectorXcd& out) const {
        bilinear_rhs(sys, x, u, out);
    }

    // dz/dt = (-A^dag + i sum_k xi u_k N_k^dag) z
    void rhs_backward(const Eigen::VectorXcd& z, const Eigen::VectorXd& u,
                      Eigen::VectorXcd& out) const {
        out.noalias() = -(A_adj * z);
        for (int k = 0; k < sys.channels(); ++k) {
            const double uk = xi * u[k];
            if (uk != 0.0) out.noalias() += (imag_unit * uk) * (N_adj[k] * z);
        }
    }
};

}  // namespace detail

// Update direction g_k = xi Im(phi z^dag (N_k x + b_k)); the optimized field is
// u_k = -(s_k/alpha_k) g_k. Optionally also the exact sweep-time derivative
// gdot_k = xi Im(phi (z^dag (N_k A - A N_k) x - z^dag A b_k)) used to supply
// stage-time field values inside fixed-step Runge-Kutta.
inline void field_update_direction(const BilinearSystem& sys, const Eigen::VectorXcd& z,
                                   const Eigen::VectorXcd& x, Complex phi, Eigen::VectorXd& g,
                                   Eigen::VectorXd* gdot = nullptr) {
    const double xi = sys.field_scale;
    g.resize(sys.channels());
    if (gdot) gdot->resize(sys.channels());
    Eigen::VectorXcd ax;
    if (gdot) ax.noalias() = sys.A * x;
    Eigen::VectorXcd nx(sys.dim);
    for (int k = 0; k < sys.channels(); ++k) {
        nx.noalias() = sys.N[k] * x;
        nx += sys.b[k];
        g[k] = xi * (phi * z.dot(nx)).imag();
        if (gdot) {
            const Complex na = z.dot(sys.N[k] * ax);
            const Complex an = z.dot(sys.A * nx);
            (*gdot)[k] = xi * (phi * (na - an)).imag();
        }
    }
}

// u_k(t) = -(s_k(t)/alpha_k) Im(z^dag N_k (x + x_e)), with the extra factor
// phi = (x + x_e)^dag z inside the imaginary part for J1c targets
inline Eigen::VectorXd field_update(const BilinearSystem& sys, const Eigen::VectorXcd& z,
                                    const Eigen::VectorXcd& x, const Eigen::VectorXd& shape,
                                    const Eigen::VectorXd& alpha, Complex phi = Complex(1.0)) {
    Eigen::VectorXd g;
    field_update_direction(sys, z, x, phi, g);
    return -(shape.array() / alpha.array()) * g.array();
}

// du_k/dt from the linearization of the update formula
inline Eigen::VectorXd field_derivative(const BilinearSystem& sys, const Eigen::VectorXcd& z,
                                        const Eigen::VectorXcd& x, const Eigen::VectorXd& shape,
                                        const Eigen::VectorXd& alpha, Complex phi = Complex(1.0)) {
    Eigen::VectorXd g, gdot;
    field_update_direction(sys, z, x, phi, g, &gdot);
    return -(shape.array() / alpha.array()) * gdot.array();
}

// plain fixed-field forward pass recorded at substep resolution
inline SweepData forward_propagate_sampled(const BilinearSystem& sys, const ControlField& field,
                                           const Eigen::VectorXcd& x0, const TimeGrid& grid,
                                           int substeps, FixedScheme scheme = FixedScheme::RK4) {
    grid.validate();
    detail::OctWorkspace w(sys);
    const int total = grid.n_main() * substeps;
    const double h = grid.delta / substeps;
    SweepData data;
    data.t0 = grid.t_begin();
    data.dt = h;
    data.samples.resize(sys.dim, total + 1);
    Eigen::VectorXcd x = x0, k1(sys.dim), k2(sys.dim), k3(sys.dim), k4(sys.dim), xt(sys.dim);
    data.samples.col(0) = x;
    for (int s = 0; s < total; ++s) {
        const double t = data.t0 + s * h;
        if (scheme == FixedScheme::RK4) {
            w.rhs_forward(x, field.value(t), k1);
            xt = x + 0.5 * h * k1;
            w.rhs_forward(xt, field.value(t + 0.5 * h), k2);
            xt = x + 0.5 * h * k2;
            w.rhs_forward(xt, field.value(t + 0.5 * h), k3);
            xt = x + h * k3;
            w.rhs_forward(xt, field.value(t + h), k4);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            w.rhs_forward(x, field.value(t), k1);
            xt = x + 0.5 * h * k1;
            w.rhs_forward(xt, field.value(t + 0.5 * h), k2);
            x += h * k2;
        }
        data.samples.col(s + 1) = x;
    }
    return data;
}

// adjoint propagation backward from z(T) = z_terminal under a fixed field
inline SweepData backward_propagate(const BilinearSystem& sys, const ControlField& field,
                                    const Eigen::VectorXcd& z_terminal, const TimeGrid& grid,
                                    int substeps, FixedScheme scheme = FixedScheme::RK4) {
    grid.validate();
    detail::OctWorkspace w(sys);
    const int total = grid.n_main() * substeps;
    const double h = grid.delta / substeps;
    SweepData data;
    data.t0 = grid.t_begin();
    data.dt = h;
    data.samples.resize(sys.dim, total + 1);
    Eigen::VectorXcd z = z_terminal, k1(sys.dim), k2(sys.dim), k3(sys.dim), k4(sys.dim),
                     zt(sys.dim);
    data.samples.col(total) = z;
    for (int s = total - 1; s >= 0; --s) {
        const double t_hi = data.t0 + (s + 1) * h;
        if (scheme == FixedScheme::RK4) {
            w.rhs_backward(z, field.value(t_hi), k1);
            zt = z - 0.5 * h * k1;
            w.rhs_backward(zt, field.value(t_hi - 0.5 * h), k2);
            zt = z - 0.5 * h * k2;
            w.rhs_backward(zt, field.value(t_hi - 0.5 * h), k3);
            zt = z - h * k3;
            w.rhs_backward(zt, field.value(t_hi - h), k4);
            z -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            w.rhs_backward(z, field.value(t_hi), k1);
            zt = z - 0.5 * h * k1;
            w.rhs_backward(zt, field.value(t_hi - 0.5 * h), k2);
            z -= h * k2;
        }
        data.samples.col(s) = z;
    }
    return data;
}

// terminal condition of the adjoint equation for the selected functional
inline Eigen::VectorXcd oct_terminal_state(const BilinearSystem& sys, const OctConfig& cfg,
                                           const Eigen::VectorXcd& x_final) {
    const Output& out = sys.outputs[cfg.target];
    if (cfg.functional == Functional::J1a) {
        return out.D * (x_final + sys.x_e);
    }
    return out.c;
}

// J1 per selected form, constant equilibrium terms omitted
inline double oct_target_value(const BilinearSystem& sys, const OctConfig& cfg,
                               const Eigen::VectorXcd& x_final) {
    const Output& out = sys.outputs[cfg.target];
    switch (cfg.functional) {
        case Functional::J1a:
            return x_final.dot(out.D * x_final).real() +
                   2.0 * sys.x_e.dot(out.D * x_final).real();
        case Functional::J1b:
            return out.c.dot(x_final).real();
        case Functional::J1c:
            return std::norm(out.c.dot(x_final));
    }
    return 0.0;
}

// J2 = sum_k alpha_k int u_k^2 / s_k dt (trapezoidal); zero-field/zero-shape
// samples contribute nothing, a driven sample with vanishing shape is an error
inline double cost_functional(const ControlField& field) {
    const int ns = field.n_samples();
    double j2 = 0.0;
    for (int k = 0; k < field.channels(); ++k) {
        const double u_scale = field.u.col(k).cwiseAbs().maxCoeff();
        double acc = 0.0;
        for (int s = 0; s < ns; ++s) {
            const double u = field.u(s, k);
            const double sh = field.s(s, k);
            if (sh <= 0.0) {
                if (std::abs(u) > 1e-14 * std::max(1.0, u_scale)) {
                    throw ShapeViolation("cost_functional: nonzero field where shape vanishes");
                }
                continue;
            }
            const double w = (s == 0 || s == ns - 1) ? 0.5 : 1.0;
            acc += w * u * u / sh;
        }
        j2 += field.alpha[k] * acc * field.dt;
    }
    return j2;
}

// J3 = 2 Re int z^dag (dx/dt - L(t)(x + x_e)) dt with 4th-order finite
// differences of the stored samples; a self-consistency diagnostic that
// vanishes (up to discretization error) when x came from the propagator
inline double constraint_residual(const BilinearSystem& sys,
                                  const Eigen::Ref<const Eigen::MatrixXcd>& X,
                                  const Eigen::Ref<const Eigen::MatrixXcd>& Z, double t0,
                                  double dt, const ControlField& field) {
    const int last = static_cast<int>(X.cols()) - 1;
    if (last < 4) return 0.0;
    Eigen::VectorXcd xdot(sys.dim), rhs(sys.dim);
    double acc = 0.0;
    for (int s = 0; s <= last; ++s) {
        if (s >= 2 && s <= last - 2) {
            xdot = (-X.col(s + 2) + 8.0 * X.col(s + 1) - 8.0 * X.col(s - 1) + X.col(s - 2)) /
                   (12.0 * dt);
        } else if (s == 0) {
            xdot = (-25.0 * X.col(0) + 48.0 * X.col(1) - 36.0 * X.col(2) + 16.0 * X.col(3) -
                    3.0 * X.col(4)) /
                   (12.0 * dt);
        } else if (s == 1) {
            xdot = (-3.0 * X.col(0) - 10.0 * X.col(1) + 18.0 * X.col(2) - 6.0 * X.col(3) +
                    X.col(4)) /
                   (12.0 * dt);
        } else if (s == last) {
            xdot = (25.0 * X.col(last) - 48.0 * X.col(last - 1) + 36.0 * X.col(last - 2) -
                    16.0 * X.col(last - 3) + 3.0 * X.col(last - 4)) /
                   (12.0 * dt);
        } else {  // s == last - 1
            xdot = (3.0 * X.col(last) + 10.0 * X.col(last - 1) - 18.0 * X.col(last - 2) +
                    6.0 * X.col(last - 3) - X.col(last - 4)) /
                   (12.0 * dt);
        }
        bilinear_rhs(sys, X.col(s), field.value(t0 + s * dt), rhs);
        const double w = (s == 0 || s == last) ? 0.5 : 1.0;
        acc += w * 2.0 * Z.col(s).dot(xdot - rhs).real();
    }
    return acc * dt;
}

// (J1, J2, J3) of a completed sweep pair
inline std::tuple<double, double, double> evaluate_functionals(
    const BilinearSystem& sys, const SweepData& x_sweep, const SweepData& z_sweep,
    const ControlField& field, const OctConfig& cfg) {
    const int last = static_cast<int>(x_sweep.samples.cols()) - 1;
    const double j1 = oct_target_value(sys, cfg, x_sweep.samples.col(last));
    const double j2 = cost_functional(field);
    const double j3 = constraint_residual(sys, x_sweep.samples, z_sweep.samples, x_sweep.t0,
                                          x_sweep.dt, field);
    return {j1, j2, j3};
}

// ------------------------------------------------------------------ iteration

inline OctReport iterate(const BilinearSystem& sys, const ControlField& guess,
                         const TimeGrid& grid, const OctConfig& cfg) {
    grid.validate();
    cfg.validate(sys);
    guess.validate();
    const int total = grid.n_main() * cfg.substeps;
    const double h = grid.delta / cfg.substeps;
    if (guess.n_samples() != total + 1 || std::abs(guess.dt - h) > 1e-12 * h ||
        std::abs(guess.t0 - grid.t_begin()) > 1e-9) {
        throw ValidationError("iterate: guess field must be sampled on the sweep grid");
    }
    const int m = sys.channels();
    if (guess.channels() != m) throw ValidationError("iterate: channel count mismatch");

    detail::OctWorkspace w(sys);
    const bool j1c = cfg.functional == Functional::J1c;

    Eigen::MatrixXcd X(sys.dim, total + 1), Z = Eigen::MatrixXcd::Zero(sys.dim, total + 1);
    ControlField fld = guess;          // current forward field u^(n)
    Eigen::MatrixXd u_prev = guess.u;  // previous forward field u^(n-1)
    ControlField bar = guess;          // eta-mixed field of the backward sweep

    OctReport report;

    {
        SweepData fwd =
            forward_propagate_sampled(sys, fld, sys.x0, grid, cfg.substeps, cfg.scheme);
        X = fwd.samples;
    }

    Eigen::VectorXcd xs(sys.dim), zs(sys.dim), k1(sys.dim), k2(sys.dim), k3(sys.dim),
        k4(sys.dim), tmp(sys.dim);
    Eigen::VectorXd g(m), gdot(m);

    const auto sample_field = [&](Eigen::MatrixXd& dest, int s, const Eigen::MatrixXd& base,
                                  double mix) {
        // dest.row(s) = (1-mix) base.row(s) - mix (s_k/alpha_k) g_k
        for (int k = 0; k < m; ++k) {
            dest(s, k) = (1.0 - mix) * base(s, k) - mix * fld.s(s, k) / fld.alpha[k] * g[k];
        }
    };

    const auto record = [&](bool with_j3) {
        report.j1.push_back(oct_target_value(sys, cfg, X.col(total)));
        report.j2.push_back(cost_functional(fld));
        const double j3 = with_j3
                              ? constraint_residual(sys, X, Z, grid.t_begin(), h, fld)
                              : 0.0;
        report.j3.push_back(j3);
        report.j_total.push_back(report.j1.back() - report.j2.back() - j3);
        report.y_target.push_back(output_value(sys, sys.outputs[cfg.target], X.col(total)));
    };
    record(false);  // guess entry; no multiplier yet

    for (int n = 1; n <= cfg.max_iter; ++n) {
        u_prev = fld.u;

        // ---- backward sweep: z under the eta-mixed field, stored in `bar`
        zs = oct_terminal_state(sys, cfg, X.col(total));
        Z.col(total) = zs;
        Complex phi(1.0, 0.0);
        if (j1c) phi = (X.col(total) + sys.x_e).dot(zs);  // (x(T)+x_e)^dag z(T)

        const auto phi_at = [&](int, const Eigen::VectorXcd& x_here,
                                const Eigen::VectorXcd& z_here) -> Complex {
            if (!j1c) return Complex(1.0, 0.0);
            if (cfg.j1c_eval == OverlapEval::AtBoundary) return phi;
            return (x_here + sys.x_e).dot(z_here);
        };

        field_update_direction(sys, zs, X.col(total), phi_at(total, X.col(total), zs), g);
        sample_field(bar.u, total, u_prev, cfg.eta);

        for (int s = total - 1; s >= 0; --s) {
            const double t_hi = grid.t_begin() + (s + 1) * h;
            field_update_direction(sys, Z.col(s + 1), X.col(s + 1),
                                   phi_at(s + 1, X.col(s + 1), Z.col(s + 1)), g, &gdot);
            const auto ubar_at = [&](double delta) {  // delta <= 0 relative to t_hi
                const double t = t_hi + delta;
                const Eigen::VectorXd sh = fld.shape_value(t);
                Eigen::VectorXd out = (1.0 - cfg.eta) * interp_rows(u_prev, fld.t0, fld.dt, t);
                out.array() -=
                    cfg.eta * (sh.array() / fld.alpha.array()) * (g.array() + delta * gdot.array());
                return out;
            };
            zs = Z.col(s + 1);
            if (cfg.scheme == FixedScheme::RK4) {
                w.rhs_backward(zs, ubar_at(0.0), k1);
                tmp = zs - 0.5 * h * k1;
                w.rhs_backward(tmp, ubar_at(-0.5 * h), k2);
                tmp = zs - 0.5 * h * k2;
                w.rhs_backward(tmp, ubar_at(-0.5 * h), k3);
                tmp = zs - h * k3;
                w.rhs_backward(tmp, ubar_at(-h), k4);
                zs -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            } else {
                w.rhs_backward(zs, ubar_at(0.0), k1);
                tmp = zs - 0.5 * h * k1;
                w.rhs_backward(tmp, ubar_at(-0.5 * h), k2);
                zs -= h * k2;
            }
            Z.col(s) = zs;
            field_update_direction(sys, zs, X.col(s), phi_at(s, X.col(s), zs), g);
            sample_field(bar.u, s, u_prev, cfg.eta);
        }

        // ---- forward sweep: x under the zeta-mixed field, stored in fld.u
        xs = sys.x0;
        X.col(0) = xs;
        if (j1c && cfg.j1c_eval == OverlapEval::AtBoundary) {
            phi = (xs + sys.x_e).dot(Z.col(0));  // frozen at t = 0
        }

        field_update_direction(sys, Z.col(0), xs, phi_at(0, xs, Z.col(0)), g);
        sample_field(fld.u, 0, bar.u, cfg.zeta);

        for (int s = 0; s < total; ++s) {
            const double t_lo = grid.t_begin() + s * h;
            field_update_direction(sys, Z.col(s), xs, phi_at(s, xs, Z.col(s)), g, &gdot);
            const auto u_at = [&](double delta) {  // delta >= 0 relative to t_lo
                const double t = t_lo + delta;
                const Eigen::VectorXd sh = fld.shape_value(t);
                Eigen::VectorXd out = (1.0 - cfg.zeta) * interp_rows(bar.u, fld.t0, fld.dt, t);
                out.array() -= cfg.zeta * (sh.array() / fld.alpha.array()) *
                               (g.array() + delta * gdot.array());
                return out;
            };
            if (cfg.scheme == FixedScheme::RK4) {
                w.rhs_forward(xs, u_at(0.0), k1);
                tmp = xs + 0.5 * h * k1;
                w.rhs_forward(tmp, u_at(0.5 * h), k2);
                tmp = xs + 0.5 * h * k2;
                w.rhs_forward(tmp, u_at(0.5 * h), k3);
                tmp = xs + h * k3;
                w.rhs_forward(tmp, u_at(h), k4);
                xs += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            } else {
                w.rhs_forward(xs, u_at(0.0), k1);
                tmp = xs + 0.5 * h * k1;
                w.rhs_forward(tmp, u_at(0.5 * h), k2);
                xs += h * k2;
            }
            X.col(s + 1) = xs;
            field_update_direction(sys, Z.col(s + 1), xs, phi_at(s + 1, xs, Z.col(s + 1)), g);
            sample_field(fld.u, s + 1, bar.u, cfg.zeta);
        }

        record(true);
        report.iterations = n;
        if (!std::isfinite(report.j_total.back()) || !std::isfinite(report.j1.back())) {
            throw NumericalFailure("oct: non-finite functional at iteration " + std::to_string(n));
        }
        const std::size_t lastrec = report.j1.size() - 1;
        if (n >= 2 && report.gain(lastrec) - report.gain(lastrec - 1) < cfg.tolerance) {
            report.converged = true;
            break;
        }
    }

    // final trajectory at main-step resolution
    report.trajectory.times.resize(grid.n_main() + 1);
    report.trajectory.outputs.resize(grid.n_main() + 1, sys.outputs_count());
    for (int j = 0; j <= grid.n_main(); ++j) {
        report.trajectory.times[j] = grid.t_begin() + j * grid.delta;
        report.trajectory.states.push_back(X.col(j * cfg.substeps));
        report.trajectory.outputs.row(j) =
            evaluate_outputs(sys, X.col(j * cfg.substeps)).transpose();
    }
    report.field = fld;
    return report;
}

}  // namespace qdyn
