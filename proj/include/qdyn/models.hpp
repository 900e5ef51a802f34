// models.hpp — coordinate-space model functions: potentials, dipoles,
// system-bath couplings, and additional multiplicative operators (AMOs)

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "qdyn/errors.hpp"

namespace qdyn {

// Natural cubic spline through (x_i, y_i); evaluation outside the table is
// clamped to the boundary values.
class CubicSpline {
public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) {
            throw ValidationError("CubicSpline: need at least two samples, equal lengths");
        }
        for (std::size_t i = 1; i < n; ++i) {
            if (!(x_[i] > x_[i - 1])) {
                throw ValidationError("CubicSpline: abscissae must be strictly increasing");
            }
        }
        // second derivatives from the tridiagonal system (natural boundary)
        m_.assign(n, 0.0);
        std::vector<double> diag(n, 1.0), rhs(n, 0.0), off(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            diag[i] = 2.0 * (h0 + h1);
            off[i] = h1;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        // Thomas algorithm on the interior rows
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double w = h0 / diag[i - 1];
            diag[i] -= w * off[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n >= 2 ? n - 2 : 0; i >= 1; --i) {
            m_[i] = (rhs[i] - off[i] * (i + 2 <= n - 1 ? m_[i + 1] : 0.0)) / diag[i];
            if (i == 1) break;
        }
    }

    double operator()(double x) const {
        if (x <= x_.front()) return y_.front();
        if (x >= x_.back()) return y_.back();
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[j + 1] - x_[j];
        const double a = (x_[j + 1] - x) / h;
        const double b = (x - x_[j]) / h;
        return a * y_[j] + b * y_[j + 1] +
               ((a * a * a - a) * m_[j] + (b * b * b - b) * m_[j + 1]) * h * h / 6.0;
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_;
    std::vector<double> m_;
};

// f(x) = sum_j c_j (x - x0)^j / j!
struct TaylorModel {
    double x0{0.0};
    std::vector<double> coefficients;

    double operator()(double x) const {
        double value = 0.0;
        double term = 1.0;  // (x-x0)^j / j!
        const double dx = x - x0;
        for (std::size_t j = 0; j < coefficients.size(); ++j) {
            if (j > 0) term *= dx / static_cast<double>(j);
            value += coefficients[j] * term;
        }
        return value;
    }
};

struct TabulatedModel {
    CubicSpline spline;

    TabulatedModel() = default;
    TabulatedModel(std::vector<double> x, std::vector<double> y)
        : spline(std::move(x), std::move(y)) {}

    double operator()(double x) const { return spline(x); }
};

// V(x) = d_e (1 - exp(-alpha (x - r_e)))^2, dissociation threshold d_e
struct MorsePotential {
    double d_e{0.0};
    double r_e{0.0};
    double alpha{0.0};

    double operator()(double x) const {
        const double g = 1.0 - std::exp(-alpha * (x - r_e));
        return d_e * g * g;
    }
};

struct PotentialModel {
    std::variant<MorsePotential, TaylorModel, TabulatedModel> model;

    void validate() const {
        if (const auto* m = std::get_if<MorsePotential>(&model)) {
            if (!(m->d_e > 0.0) || !(m->alpha > 0.0)) {
                throw ValidationError("Morse potential requires d_e > 0 and alpha > 0");
            }
        }
    }

    double operator()(double x) const {
        return std::visit([x](const auto& m) { return m(x); }, model);
    }

    // Energy above which states are treated as continuum and discarded.
    double dissociation_threshold() const {
        if (const auto* m = std::get_if<MorsePotential>(&model)) return m->d_e;
        if (const auto* m = std::get_if<TabulatedModel>(&model)) return m->spline(m->spline.x_max());
        return std::numeric_limits<double>::infinity();
    }
};

// mu(x) = q_0 x exp(-x / r_0)
struct MeckeDipole {
    double r_0{0.0};
    double q_0{0.0};

    double operator()(double x) const { return q_0 * x * std::exp(-x / r_0); }
};

struct DipoleModel {
    std::variant<MeckeDipole, TaylorModel, TabulatedModel> model;

    double operator()(double x) const {
        return std::visit([x](const auto& m) { return m(x); }, model);
    }
};

struct SbcModel {
    std::variant<TaylorModel, TabulatedModel> model;

    double operator()(double x) const {
        return std::visit([x](const auto& m) { return m(x); }, model);
    }
};

// Gaussian bell usable as a bond-length target window
struct GaussianAmo {
    double center{0.0};
    double width{1.0};

    double operator()(double x) const {
        const double u = (x - center) / width;
        return std::exp(-0.5 * u * u);
    }
};

struct AmoModel {
    std::variant<GaussianAmo, TaylorModel, TabulatedModel> model;

    double operator()(double x) const {
        return std::visit([x](const auto& m) { return m(x); }, model);
    }
};

// Observables emitted by the matrix-element stage
struct AmoObservable {
    AmoModel handle;
};
struct ProjectorObservable {
    std::vector<int> states;
};
struct OverlapObservable {
    std::vector<int> states;
};

struct ObservableSpec {
    std::variant<AmoObservable, ProjectorObservable, OverlapObservable> spec;
    std::string label;
};

}  // namespace qdyn
