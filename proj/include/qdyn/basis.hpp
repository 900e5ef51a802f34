// basis.hpp — energy representation: matrix elements of operators between
// bound states, and the container shipped to the system-builder stage

#pragma once

#include <Eigen/Dense>

#include <string>
#include <variant>
#include <vector>

#include "qdyn/archive.hpp"
#include "qdyn/errors.hpp"
#include "qdyn/grid.hpp"
#include "qdyn/models.hpp"

namespace qdyn {

enum class ObservableKind { Amo, Projector, Overlap };

inline const char* to_string(ObservableKind k) {
    switch (k) {
        case ObservableKind::Amo: return "amo";
        case ObservableKind::Projector: return "prj";
        case ObservableKind::Overlap: return "ovl";
    }
    return "?";
}

// One observable in the energy basis: a matrix (amo, prj) or an indicator
// vector (ovl).
struct ObservableOperator {
    ObservableKind kind{ObservableKind::Projector};
    std::string label;
    Eigen::MatrixXd matrix;  // amo / prj
    Eigen::VectorXd vector;  // ovl
};

struct EnergyBasisSystem {
    Eigen::VectorXd energies;             // ascending, ground state at index 0
    std::vector<Eigen::MatrixXd> dipole;  // one symmetric matrix per polarization
    Eigen::MatrixXd sbc;                  // empty when no system-bath coupling
    std::vector<ObservableOperator> observables;

    int n_states() const { return static_cast<int>(energies.size()); }
    bool has_sbc() const { return sbc.size() > 0; }
};

// <i| f |j> over the grid quadrature for a multiplicative operator f(x).
template <typename F>
Eigen::MatrixXd function_matrix_elements(const BoundStates& bound, const F& f) {
    const Eigen::VectorXd x = bound.grid.points();
    Eigen::VectorXd fx(x.size());
    for (Eigen::Index g = 0; g < x.size(); ++g) fx[g] = f(x[g]);
    const double dx = bound.grid.spacing();
    Eigen::MatrixXd m = bound.wavefunctions.transpose() *
                        fx.asDiagonal() * bound.wavefunctions * dx;
    return 0.5 * (m + m.transpose());  // numerically enforce symmetry
}

inline Eigen::MatrixXd matrix_elements(const BoundStates& bound, const DipoleModel& dip) {
    return function_matrix_elements(bound, dip);
}

inline Eigen::MatrixXd matrix_elements(const BoundStates& bound, const SbcModel& sbc) {
    return function_matrix_elements(bound, sbc);
}

inline ObservableOperator matrix_elements(const BoundStates& bound, const ObservableSpec& obs) {
    const int n = bound.n_states();
    ObservableOperator out;
    out.label = obs.label;
    if (const auto* amo = std::get_if<AmoObservable>(&obs.spec)) {
        out.kind = ObservableKind::Amo;
        out.matrix = function_matrix_elements(bound, amo->handle);
    } else if (const auto* prj = std::get_if<ProjectorObservable>(&obs.spec)) {
        out.kind = ObservableKind::Projector;
        out.matrix = Eigen::MatrixXd::Zero(n, n);
        for (int q : prj->states) {
            if (q < 0 || q >= n) throw IndexError("projector state index out of range");
            out.matrix(q, q) = 1.0;
        }
    } else {
        const auto& ovl = std::get<OverlapObservable>(obs.spec);
        out.kind = ObservableKind::Overlap;
        out.vector = Eigen::VectorXd::Zero(n);
        for (int q : ovl.states) {
            if (q < 0 || q >= n) throw IndexError("overlap state index out of range");
            out.vector[q] = 1.0;
        }
    }
    return out;
}

inline EnergyBasisSystem make_energy_basis(const BoundStates& bound,
                                           const std::vector<DipoleModel>& dipoles,
                                           const SbcModel* sbc,
                                           const std::vector<ObservableSpec>& observables) {
    EnergyBasisSystem sys;
    sys.energies = bound.energies;
    for (const auto& dip : dipoles) sys.dipole.push_back(matrix_elements(bound, dip));
    if (sbc) sys.sbc = matrix_elements(bound, *sbc);
    for (const auto& obs : observables) sys.observables.push_back(matrix_elements(bound, obs));
    return sys;
}

inline void export_energy_basis(const EnergyBasisSystem& sys, const std::filesystem::path& dir) {
    ArchiveWriter w(dir);
    w.add_vector("energies", sys.energies);
    for (std::size_t k = 0; k < sys.dipole.size(); ++k) {
        w.add_dense("dipole_" + std::to_string(k), sys.dipole[k]);
    }
    if (sys.has_sbc()) w.add_dense("sbc", sys.sbc);
    json obs_meta = json::array();
    for (std::size_t q = 0; q < sys.observables.size(); ++q) {
        const auto& o = sys.observables[q];
        const std::string name = "observable_" + std::to_string(q);
        if (o.kind == ObservableKind::Overlap) {
            w.add_vector(name, o.vector);
        } else {
            w.add_dense(name, o.matrix);
        }
        obs_meta.push_back({{"kind", to_string(o.kind)}, {"label", o.label}});
    }
    json meta;
    meta["payload"] = "tise";
    meta["n_states"] = sys.n_states();
    meta["n_channels"] = sys.dipole.size();
    meta["observables"] = obs_meta;
    w.set_meta(meta);
    w.finish();
}

inline EnergyBasisSystem import_energy_basis(const std::filesystem::path& dir) {
    ArchiveReader r(dir);
    EnergyBasisSystem sys;
    sys.energies = r.vector_f64("energies");
    const json meta = r.meta();
    const int channels = meta.value("n_channels", 1);
    for (int k = 0; k < channels; ++k) {
        const std::string name = "dipole_" + std::to_string(k);
        if (r.has(name)) sys.dipole.push_back(r.dense_f64(name));
    }
    if (r.has("sbc")) sys.sbc = r.dense_f64("sbc");
    const json obs_meta = meta.value("observables", json::array());
    for (std::size_t q = 0; q < obs_meta.size(); ++q) {
        const std::string name = "observable_" + std::to_string(q);
        ObservableOperator o;
        const std::string kind = obs_meta[q].value("kind", "prj");
        o.label = obs_meta[q].value("label", name);
        if (kind == "ovl") {
            o.kind = ObservableKind::Overlap;
            o.vector = r.vector_f64(name);
        } else {
            o.kind = (kind == "amo") ? ObservableKind::Amo : ObservableKind::Projector;
            o.matrix = r.dense_f64(name);
        }
        sys.observables.push_back(std::move(o));
    }
    // basic shape validation
    const int n = sys.n_states();
    for (const auto& d : sys.dipole) {
        if (d.rows() != n || d.cols() != n) throw FormatError("tise archive: dipole shape mismatch");
    }
    if (sys.has_sbc() && (sys.sbc.rows() != n || sys.sbc.cols() != n)) {
        throw FormatError("tise archive: sbc shape mismatch");
    }
    return sys;
}

}  // namespace qdyn
