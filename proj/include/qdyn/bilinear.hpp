// bilinear.hpp — assembly of the bilinear control system
//   dx/dt = (A + i sum_k u_k N_k) x + i sum_k u_k b_k,   b_k = N_k x_e
// for closed (TDSE) or vectorized open (LvNE) dynamics in the energy basis.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <cmath>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include "qdyn/basis.hpp"
#include "qdyn/errors.hpp"
#include "qdyn/rates.hpp"

namespace qdyn {

enum class SystemKind { Tdse, Lvne };
enum class Ordering { ColumnStack, DiagonalsFirst };
enum class OutputForm { Linear, Quadratic };

constexpr Complex imag_unit{0.0, 1.0};

// One observable attached to a system. LvNE observables are linear functionals
// y = Re(c^dag x) + offset with offset frozen to Re(c^dag x_e) at build time
// (the offset is invariant under state-space transformations, c is not).
// TDSE observables are quadratic forms evaluated with the explicit x_e shift.
struct Output {
    std::string label;
    OutputForm form{OutputForm::Linear};
    Eigen::VectorXcd c;
    Eigen::MatrixXcd D;
    double offset{0.0};
    bool from_overlap{false};  // TDSE target built from an overlap vector (J1c)
};

struct BilinearSystem {
    SystemKind kind{SystemKind::Tdse};
    int dim{0};
    int n_states{0};
    SparseMatrixC A;
    std::vector<SparseMatrixC> N;
    std::vector<Eigen::VectorXcd> b;
    std::vector<Output> outputs;
    Eigen::VectorXcd x_e;
    Eigen::VectorXcd x0;  // shifted initial state, x(0) = x_raw - x_e
    double field_scale{1.0};
    Ordering ordering{Ordering::ColumnStack};
    Eigen::VectorXi vec_index;        // LvNE: column-stacked index -> stored index
    Eigen::VectorXd level_energies;   // underlying basis energies (when known)
    double bath_temperature{0.0};

    int channels() const { return static_cast<int>(N.size()); }
    int outputs_count() const { return static_cast<int>(outputs.size()); }

    // stored vector index of density-matrix entry rho_ij
    int index_of(int i, int j) const {
        const int cs = i + n_states * j;
        return vec_index.size() > 0 ? vec_index[cs] : cs;
    }
};

namespace detail {

inline Eigen::VectorXi make_vec_index(int n, Ordering ordering) {
    Eigen::VectorXi idx(n * n);
    if (ordering == Ordering::ColumnStack) {
        for (int k = 0; k < n * n; ++k) idx[k] = k;
        return idx;
    }
    // diagonals first: populations occupy the first n slots, coherences follow
    // in column-stacked scan order
    int next = n;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            idx[i + n * j] = (i == j) ? i : next++;
        }
    }
    return idx;
}

}  // namespace detail

inline Eigen::VectorXd boltzmann_populations(const Eigen::VectorXd& energies, double theta) {
    const int n = static_cast<int>(energies.size());
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    if (theta <= 0.0) {
        p[0] = 1.0;
        return p;
    }
    for (int i = 0; i < n; ++i) p[i] = std::exp(-(energies[i] - energies[0]) / theta);
    return p / p.sum();
}

// c with c^dag x = Tr(O rho) for the system's vectorization
inline Eigen::VectorXcd vectorize_observable(const BilinearSystem& sys,
                                             const Eigen::MatrixXcd& op) {
    const int n = sys.n_states;
    Eigen::VectorXcd c(sys.dim);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) c[sys.index_of(i, j)] = op(i, j);
    }
    return c;
}

// left null functional of every LvNE generator: t^dag x = Tr(rho)
inline Eigen::VectorXcd trace_vector(const BilinearSystem& sys) {
    return vectorize_observable(sys, Eigen::MatrixXcd::Identity(sys.n_states, sys.n_states));
}

// density matrix from a stored *unshifted* vector
inline Eigen::MatrixXcd devectorize(const BilinearSystem& sys, const Eigen::VectorXcd& x_full) {
    const int n = sys.n_states;
    Eigen::MatrixXcd rho(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) rho(i, j) = x_full[sys.index_of(i, j)];
    }
    return rho;
}

inline BilinearSystem build_tdse(const EnergyBasisSystem& basis,
                                 const std::vector<int>& observable_selection = {}) {
    const int n = basis.n_states();
    if (n < 1) throw ValidationError("build_tdse: empty basis");

    BilinearSystem sys;
    sys.kind = SystemKind::Tdse;
    sys.dim = n;
    sys.n_states = n;
    sys.level_energies = basis.energies;

    std::vector<Eigen::Triplet<Complex>> trips;
    for (int j = 1; j < n; ++j) {
        trips.emplace_back(j, j, -imag_unit * (basis.energies[j] - basis.energies[0]));
    }
    sys.A.resize(n, n);
    sys.A.setFromTriplets(trips.begin(), trips.end());

    for (const auto& mu : basis.dipole) {
        std::vector<Eigen::Triplet<Complex>> nt;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                if (mu(i, j) != 0.0) nt.emplace_back(i, j, Complex(mu(i, j), 0.0));
            }
        }
        SparseMatrixC nk(n, n);
        nk.setFromTriplets(nt.begin(), nt.end());
        sys.N.push_back(std::move(nk));
    }

    sys.x_e = Eigen::VectorXcd::Zero(n);
    sys.x_e[0] = 1.0;
    for (const auto& nk : sys.N) sys.b.push_back(nk * sys.x_e);
    sys.x0 = Eigen::VectorXcd::Zero(n);

    std::vector<int> selection = observable_selection;
    if (selection.empty()) {
        for (int q = 0; q < static_cast<int>(basis.observables.size()); ++q) selection.push_back(q);
    }
    for (int q : selection) {
        if (q < 0 || q >= static_cast<int>(basis.observables.size())) {
            throw IndexError("build_tdse: observable index out of range");
        }
        const auto& o = basis.observables[q];
        Output out;
        out.label = o.label;
        out.form = OutputForm::Quadratic;
        if (o.kind == ObservableKind::Overlap) {
            out.c = o.vector.cast<Complex>();
            out.D = out.c * out.c.adjoint();
            out.from_overlap = true;
        } else {
            out.D = o.matrix.cast<Complex>();
        }
        sys.outputs.push_back(std::move(out));
    }
    return sys;
}

inline BilinearSystem build_lvne(const EnergyBasisSystem& basis, const Eigen::MatrixXd& rates,
                                 const DephasingModel& dephasing,
                                 const std::vector<int>& observable_selection, Ordering ordering,
                                 double temperature) {
    const int n = basis.n_states();
    if (n < 1) throw ValidationError("build_lvne: empty basis");
    if (rates.rows() != n || rates.cols() != n) {
        throw ValidationError("build_lvne: rate matrix shape mismatch");
    }
    if (rates.minCoeff() < 0.0) throw ValidationError("build_lvne: negative rate");

    BilinearSystem sys;
    sys.kind = SystemKind::Lvne;
    sys.n_states = n;
    sys.dim = n * n;
    sys.ordering = ordering;
    sys.vec_index = detail::make_vec_index(n, ordering);
    sys.level_energies = basis.energies;
    sys.bath_temperature = temperature;

    Eigen::VectorXd energy = basis.energies.array() - basis.energies[0];
    Eigen::VectorXd outflow = rates.colwise().sum();  // total rate out of each state
    const Eigen::MatrixXd deph = dephasing_rates(basis, dephasing);
    if (dephasing.kind == DephasingKind::FromFile &&
        (deph - deph.transpose()).cwiseAbs().maxCoeff() > 0.0) {
        throw ValidationError("build_lvne: dephasing table must be symmetric");
    }

    // Lindblad generator, trace-preserving form: for each relaxation channel
    // L = sqrt(Gamma_{i<-j}) |i><j| plus pure dephasing, vectorized by column
    // stacking with vec(H rho) = (I kron H) vec(rho).
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(static_cast<std::size_t>(n) * n + static_cast<std::size_t>(n) * (n - 1));
    for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) {
            Complex val(-0.5 * (outflow[r] + outflow[c]) - deph(r, c),
                        -(energy[r] - energy[c]));
            if (val != Complex(0.0, 0.0)) {
                trips.emplace_back(sys.index_of(r, c), sys.index_of(r, c), val);
            }
        }
    }
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (i != j && rates(i, j) != 0.0) {
                trips.emplace_back(sys.index_of(i, i), sys.index_of(j, j),
                                   Complex(rates(i, j), 0.0));
            }
        }
    }
    sys.A.resize(sys.dim, sys.dim);
    sys.A.setFromTriplets(trips.begin(), trips.end());
    sys.A.prune(Complex(0.0, 0.0), 0.0);

    // N_k = I kron mu - mu^T kron I
    for (const auto& mu : basis.dipole) {
        std::vector<Eigen::Triplet<Complex>> nt;
        nt.reserve(2 * static_cast<std::size_t>(n) * n * n);
        for (int c = 0; c < n; ++c) {
            for (int rp = 0; rp < n; ++rp) {
                for (int r = 0; r < n; ++r) {
                    if (mu(r, rp) != 0.0) {
                        nt.emplace_back(sys.index_of(r, c), sys.index_of(rp, c),
                                        Complex(mu(r, rp), 0.0));
                    }
                }
            }
        }
        for (int r = 0; r < n; ++r) {
            for (int cp = 0; cp < n; ++cp) {
                for (int c = 0; c < n; ++c) {
                    if (mu(cp, c) != 0.0) {
                        nt.emplace_back(sys.index_of(r, c), sys.index_of(r, cp),
                                        Complex(-mu(cp, c), 0.0));
                    }
                }
            }
        }
        SparseMatrixC nk(sys.dim, sys.dim);
        nk.setFromTriplets(nt.begin(), nt.end());
        nk.prune(Complex(0.0, 0.0), 0.0);
        sys.N.push_back(std::move(nk));
    }

    // thermal equilibrium and default (equilibrium) initial state
    const Eigen::VectorXd pops = boltzmann_populations(basis.energies, temperature);
    sys.x_e = Eigen::VectorXcd::Zero(sys.dim);
    for (int i = 0; i < n; ++i) sys.x_e[sys.index_of(i, i)] = pops[i];
    for (const auto& nk : sys.N) sys.b.push_back(nk * sys.x_e);
    sys.x0 = Eigen::VectorXcd::Zero(sys.dim);

    std::vector<int> selection = observable_selection;
    if (selection.empty()) {
        for (int q = 0; q < static_cast<int>(basis.observables.size()); ++q) selection.push_back(q);
    }
    for (int q : selection) {
        if (q < 0 || q >= static_cast<int>(basis.observables.size())) {
            throw IndexError("build_lvne: observable index out of range");
        }
        const auto& o = basis.observables[q];
        Eigen::MatrixXcd op;
        if (o.kind == ObservableKind::Overlap) {
            op = Eigen::MatrixXcd(o.vector.cast<Complex>().asDiagonal());
        } else {
            op = o.matrix.cast<Complex>();
        }
        Output out;
        out.label = o.label;
        out.form = OutputForm::Linear;
        out.c = vectorize_observable(sys, op);
        out.offset = out.c.dot(sys.x_e).real();
        sys.outputs.push_back(std::move(out));
    }
    return sys;
}

// ----------------------------------------------------------------- initial states

struct PureState {
    int v{0};
};
struct CatState {
    int v1{0}, v2{1};
};
struct MixedState {
    int v1{0}, v2{1};
};
struct ThermalState {
    double temperature{0.0};
};

struct InitialStateSpec {
    std::variant<PureState, CatState, MixedState, ThermalState> spec;
};

inline Eigen::VectorXcd initial_state(const InitialStateSpec& state, const BilinearSystem& sys) {
    const int n = sys.n_states;
    const auto check = [n](int v) {
        if (v < 0 || v >= n) throw IndexError("initial_state: state index out of range");
    };
    if (sys.kind == SystemKind::Tdse) {
        Eigen::VectorXcd raw = Eigen::VectorXcd::Zero(n);
        if (const auto* p = std::get_if<PureState>(&state.spec)) {
            check(p->v);
            raw[p->v] = 1.0;
        } else if (const auto* cat = std::get_if<CatState>(&state.spec)) {
            check(cat->v1);
            check(cat->v2);
            raw[cat->v1] += 1.0 / std::numbers::sqrt2;
            raw[cat->v2] += 1.0 / std::numbers::sqrt2;
        } else {
            throw ValidationError("initial_state: mixed/thermal states require an LvNE system");
        }
        return raw - sys.x_e;
    }
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
    if (const auto* p = std::get_if<PureState>(&state.spec)) {
        check(p->v);
        rho(p->v, p->v) = 1.0;
    } else if (const auto* cat = std::get_if<CatState>(&state.spec)) {
        check(cat->v1);
        check(cat->v2);
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
        psi[cat->v1] += 1.0 / std::numbers::sqrt2;
        psi[cat->v2] += 1.0 / std::numbers::sqrt2;
        rho = psi * psi.adjoint();
    } else if (const auto* mix = std::get_if<MixedState>(&state.spec)) {
        check(mix->v1);
        check(mix->v2);
        rho(mix->v1, mix->v1) = 0.5;
        rho(mix->v2, mix->v2) = 0.5;
    } else {
        const auto& th = std::get<ThermalState>(state.spec);
        if (sys.level_energies.size() != n) {
            throw ValidationError("initial_state: system lacks level energies for a thermal state");
        }
        const Eigen::VectorXd pops = boltzmann_populations(sys.level_energies, th.temperature);
        for (int i = 0; i < n; ++i) rho(i, i) = pops[i];
    }
    Eigen::VectorXcd raw(sys.dim);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) raw[sys.index_of(i, j)] = rho(i, j);
    }
    return raw - sys.x_e;
}

// ----------------------------------------------------------------- diagnostics

inline double equilibrium_residual(const BilinearSystem& sys) {
    return (sys.A * sys.x_e).norm();
}

inline double sparse_density(const SparseMatrixC& m) {
    return static_cast<double>(m.nonZeros()) /
           (static_cast<double>(m.rows()) * static_cast<double>(m.cols()));
}

// dense spectrum of A; guarded against accidental huge eigensolves
inline Eigen::VectorXcd spectrum(const BilinearSystem& sys, int dense_cap = 2000) {
    if (sys.dim > dense_cap) {
        throw TooLarge("spectrum: dim " + std::to_string(sys.dim) + " exceeds dense cap " +
                       std::to_string(dense_cap));
    }
    Eigen::MatrixXcd a = Eigen::MatrixXcd(sys.A);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw NumericalFailure("spectrum: eigensolver failed");
    return solver.eigenvalues();
}

}  // namespace qdyn
