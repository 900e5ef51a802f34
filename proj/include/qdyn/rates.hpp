// rates.hpp — population relaxation and dephasing rate models

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "qdyn/basis.hpp"
#include "qdyn/errors.hpp"

namespace qdyn {

enum class RateKind { Fermi, Einstein, Constant, FromFile };

// Pairwise population relaxation rates. The downward rates follow the model's
// proportionality and are rescaled so that the (lower <- upper) reference
// transition matches reference_rate exactly; upward rates follow from detailed
// balance, Gamma_{j<-i} = exp(-omega_ji / Theta) Gamma_{i<-j}.
struct RateModel {
    RateKind kind{RateKind::Fermi};
    double reference_rate{0.0};  // Gamma_{lower <- upper}, inverse a.u. time
    double temperature{0.0};     // Theta in a.u. (k_B = 1)
    int lower{0};
    int upper{1};
    Eigen::MatrixXd table;  // FromFile: downward rates, entry (i, j) = j -> i

    void validate() const {
        if (reference_rate < 0.0) throw ValidationError("RateModel: reference_rate must be >= 0");
        if (temperature < 0.0) throw ValidationError("RateModel: temperature must be >= 0");
        if (lower < 0 || upper < 0 || lower >= upper) {
            throw ValidationError("RateModel: need 0 <= lower < upper");
        }
    }
};

enum class DephasingKind { Quadratic, Constant, FromFile };

struct DephasingModel {
    DephasingKind kind{DephasingKind::Quadratic};
    double kappa{0.0};      // Quadratic: gamma*_ij = kappa omega_ij^2
    double rate{0.0};       // Constant: gamma*_ij = rate for all pairs
    Eigen::MatrixXd table;  // FromFile: symmetric gamma*_ij, zero diagonal

    void validate() const {
        if (kappa < 0.0 || rate < 0.0) throw ValidationError("DephasingModel: rates must be >= 0");
    }
};

// Full matrix of relaxation rates; entry (i, j) is the rate of the j -> i
// channel. At Theta = 0 every upward rate is exactly zero.
inline Eigen::MatrixXd relaxation_rates(const EnergyBasisSystem& basis, const RateModel& model) {
    model.validate();
    const int n = basis.n_states();
    if (model.upper >= n) throw IndexError("RateModel: reference transition out of range");

    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, n);
    if (model.reference_rate == 0.0) return gamma;

    const auto bohr = [&](int j, int i) { return basis.energies[j] - basis.energies[i]; };
    const double w_ref = bohr(model.upper, model.lower);
    if (w_ref == 0.0) {
        throw DegenerateTransition("relaxation_rates: reference transition has zero frequency");
    }

    auto downward = [&](int i, int j) -> double {  // i < j
        const double w = bohr(j, i);
        if (w == 0.0) throw DegenerateTransition("relaxation_rates: degenerate pair " +
                                                 std::to_string(i) + "," + std::to_string(j));
        switch (model.kind) {
            case RateKind::Fermi: {
                if (!basis.has_sbc()) {
                    throw ValidationError("Fermi rate model needs system-bath coupling elements");
                }
                const double chi2 = basis.sbc(j, i) * basis.sbc(j, i);
                // thermal occupation factor; emission limit (-> 1) at Theta = 0
                const double occ = model.temperature > 0.0
                                       ? 1.0 / (std::exp(w / model.temperature) - 1.0)
                                       : 1.0;
                return chi2 / w * occ;
            }
            case RateKind::Einstein: {
                double mu2 = 0.0;
                for (const auto& d : basis.dipole) mu2 += d(j, i) * d(j, i);
                return mu2 * w * w * w;
            }
            case RateKind::Constant:
                return 1.0;
            case RateKind::FromFile:
                if (model.table.rows() != n || model.table.cols() != n) {
                    throw ValidationError("RateModel: rate table shape mismatch");
                }
                return model.table(i, j);
        }
        return 0.0;
    };

    const double raw_ref = downward(model.lower, model.upper);
    if (!(raw_ref > 0.0)) {
        throw DegenerateTransition("relaxation_rates: reference transition has zero model rate");
    }
    const double scale = model.reference_rate / raw_ref;

    for (int j = 1; j < n; ++j) {
        for (int i = 0; i < j; ++i) {
            const double down = scale * downward(i, j);
            gamma(i, j) = down;
            if (model.temperature > 0.0) {
                gamma(j, i) = std::exp(-bohr(j, i) / model.temperature) * down;
            }
        }
    }
    return gamma;
}

// Pure-dephasing rates gamma*_ij for bookkeeping and the FromFile/Constant
// paths; the Quadratic model enters the Lindblad generator analytically.
inline Eigen::MatrixXd dephasing_rates(const EnergyBasisSystem& basis,
                                       const DephasingModel& model) {
    model.validate();
    const int n = basis.n_states();
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            switch (model.kind) {
                case DephasingKind::Quadratic: {
                    const double w = basis.energies[i] - basis.energies[j];
                    gamma(i, j) = model.kappa * w * w;
                    break;
                }
                case DephasingKind::Constant:
                    gamma(i, j) = model.rate;
                    break;
                case DephasingKind::FromFile:
                    if (model.table.rows() != n || model.table.cols() != n) {
                        throw ValidationError("DephasingModel: table shape mismatch");
                    }
                    gamma(i, j) = model.table(i, j);
                    break;
            }
        }
    }
    return gamma;
}

}  // namespace qdyn
