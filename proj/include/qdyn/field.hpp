// field.hpp — time grids, pulse envelopes, and sampled control fields

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <variant>

#include "qdyn/errors.hpp"

namespace qdyn {

// main-step grid: t_j = j * delta for j in [start, stop]
struct TimeGrid {
    double delta{0.0};
    int start{0};
    int stop{0};

    void validate() const {
        if (!(delta > 0.0)) throw ValidationError("TimeGrid: delta must be > 0");
        if (stop <= start) throw ValidationError("TimeGrid: stop must be > start");
    }

    int n_main() const { return stop - start; }
    double t_begin() const { return start * delta; }
    double t_end() const { return stop * delta; }
    double duration() const { return t_end() - t_begin(); }
};

// sin^2 half wave over [t0, t0 + duration], zero outside; doubles as the OCT
// shape function s(t)
struct Sin2Envelope {
    double duration{0.0};
    double t0{0.0};

    double operator()(double t) const {
        const double u = (t - t0) / duration;
        if (u <= 0.0 || u >= 1.0) return 0.0;
        const double s = std::sin(std::numbers::pi * u);
        return s * s;
    }
};

struct ConstantEnvelope {
    double value{1.0};
    double operator()(double) const { return value; }
};

struct Envelope {
    std::variant<Sin2Envelope, ConstantEnvelope> shape;

    double operator()(double t) const {
        return std::visit([t](const auto& e) { return e(t); }, shape);
    }
};

// Per-channel field samples on a uniform substep grid together with the shape
// samples s_k(t) and penalty factors alpha_k used by the control functionals.
struct ControlField {
    double t0{0.0};
    double dt{0.0};               // sample spacing
    Eigen::MatrixXd u;            // n_samples x channels
    Eigen::MatrixXd s;            // n_samples x channels, in [0, 1]
    Eigen::VectorXd alpha;        // penalty per channel, > 0

    int channels() const { return static_cast<int>(u.cols()); }
    int n_samples() const { return static_cast<int>(u.rows()); }
    double t_end() const { return t0 + dt * (n_samples() - 1); }

    void validate() const {
        if (u.rows() != s.rows() || u.cols() != s.cols()) {
            throw ValidationError("ControlField: sample/shape size mismatch");
        }
        if (alpha.size() != u.cols()) throw ValidationError("ControlField: alpha size mismatch");
        if ((alpha.array() <= 0.0).any()) throw ValidationError("ControlField: alpha must be > 0");
        if (s.size() > 0 && s.minCoeff() < 0.0) {
            throw ValidationError("ControlField: shape must be >= 0");
        }
        if (!(dt > 0.0)) throw ValidationError("ControlField: dt must be > 0");
    }

    // piecewise-linear interpolation of the samples
    Eigen::VectorXd value(double t) const {
        return interpolate(u, t);
    }
    Eigen::VectorXd shape_value(double t) const {
        return interpolate(s, t);
    }

private:
    Eigen::VectorXd interpolate(const Eigen::MatrixXd& m, double t) const {
        const int last = n_samples() - 1;
        const double pos = (t - t0) / dt;
        if (pos <= 0.0) return m.row(0).transpose();
        if (pos >= last) return m.row(last).transpose();
        const int j = static_cast<int>(pos);
        const double w = pos - j;
        return (1.0 - w) * m.row(j).transpose() + w * m.row(j + 1).transpose();
    }
};

// guess/drive field: u_k(t) = amplitude * envelope(t) * cos(omega t + 1/2 chirp t^2 + phase),
// sampled on the substep grid; the envelope also provides the shape samples
struct FieldSpec {
    Envelope envelope{Sin2Envelope{}};
    double amplitude{0.0};
    double omega{0.0};
    double chirp{0.0};
    double phase{0.0};
};

inline ControlField make_field(const TimeGrid& grid, int substeps,
                               const std::vector<FieldSpec>& channels,
                               const Eigen::VectorXd& alpha) {
    grid.validate();
    if (substeps < 1) throw ValidationError("make_field: substeps must be >= 1");
    const int ns = grid.n_main() * substeps + 1;
    ControlField f;
    f.t0 = grid.t_begin();
    f.dt = grid.delta / substeps;
    f.u.resize(ns, static_cast<int>(channels.size()));
    f.s.resize(ns, static_cast<int>(channels.size()));
    f.alpha = alpha;
    for (int k = 0; k < static_cast<int>(channels.size()); ++k) {
        const auto& spec = channels[k];
        for (int j = 0; j < ns; ++j) {
            const double t = f.t0 + j * f.dt;
            const double env = spec.envelope(t);
            f.s(j, k) = env;
            f.u(j, k) = spec.amplitude * env *
                        std::cos(spec.omega * t + 0.5 * spec.chirp * t * t + spec.phase);
        }
    }
    f.validate();
    return f;
}

inline ControlField zero_field(const TimeGrid& grid, int substeps, int channels) {
    std::vector<FieldSpec> specs(channels);
    for (auto& s : specs) s.envelope = Envelope{ConstantEnvelope{1.0}};
    return make_field(grid, substeps, specs, Eigen::VectorXd::Ones(channels));
}

}  // namespace qdyn
