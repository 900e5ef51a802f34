// birka.hpp — bilinear iterative rational Krylov algorithm: fixed-point
// refinement of a Petrov-Galerkin reduced model through generalized Sylvester
// solutions, aiming at the first-order H2 optimality conditions.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "qdyn/reduction.hpp"

namespace qdyn {

struct BirkaOptions {
    int max_iter{100};
    double conv_tol{1e-6};  // Chebyshev distance of the sorted reduced spectrum
    std::uint64_t seed{0};  // required for reproducible random initialization
    GeneralizedOptions gsylv{};
};

namespace detail {

inline Eigen::MatrixXcd random_orthonormal(int n, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Eigen::MatrixXcd m(n, d);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) m(i, j) = Complex(dist(rng), dist(rng));
    }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(n, d);
}

inline Eigen::VectorXcd sorted_spectrum(const Eigen::MatrixXcd& m) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(m, /*computeEigenvectors=*/false);
    Eigen::VectorXcd ev = eig.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return ev;
}

// reflect any unstable eigenvalues of a reduced matrix into the left half-plane
inline Eigen::MatrixXcd enforce_stable(const Eigen::MatrixXcd& m, bool& reflected) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(m, /*computeEigenvectors=*/true);
    Eigen::VectorXcd ev = eig.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-12);
    bool any_unstable = false;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i].real() >= 0.0) {
            ev[i] = Complex(-std::abs(ev[i].real()) - 1e-8 * scale, ev[i].imag());
            any_unstable = true;
        }
    }
    reflected = any_unstable;
    if (!any_unstable) return m;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(eig.eigenvectors());
    return eig.eigenvectors() * ev.asDiagonal() * lu.inverse();
}

}  // namespace detail

inline ReductionResult birka(const BilinearSystem& sys, int d, const BirkaOptions& opts = {}) {
    if (d < 1 || d >= sys.dim) throw ValidationError("birka: need 1 <= d < n");
    const Eigen::MatrixXcd a = dense(sys.A);
    std::vector<Eigen::MatrixXcd> n_mats;
    for (const auto& nk : sys.N) n_mats.push_back(dense(nk));
    const Eigen::MatrixXcd b = input_matrix(sys);
    const Eigen::MatrixXcd c = output_matrix(sys);
    const int m = static_cast<int>(n_mats.size());

    std::mt19937_64 rng(opts.seed);
    Eigen::MatrixXcd v = detail::random_orthonormal(sys.dim, d, rng);
    Eigen::MatrixXcd w = detail::random_orthonormal(sys.dim, d, rng);

    const auto project = [&](const Eigen::MatrixXcd& w_mat, const Eigen::MatrixXcd& v_mat,
                             Eigen::MatrixXcd& s_out, Eigen::MatrixXcd& a_hat,
                             std::vector<Eigen::MatrixXcd>& n_hat, Eigen::MatrixXcd& b_hat,
                             Eigen::MatrixXcd& c_hat) {
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(w_mat.adjoint() * v_mat);
        if (!lu.isInvertible()) {
            throw ProjectorSingular("birka: W^dag V singular; reseed advised");
        }
        s_out = lu.solve(w_mat.adjoint());
        a_hat = s_out * a * v_mat;
        n_hat.clear();
        for (int k = 0; k < m; ++k) n_hat.push_back(s_out * n_mats[k] * v_mat);
        b_hat = s_out * b;
        c_hat = c * v_mat;
    };

    Eigen::MatrixXcd s, a_hat, b_hat, c_hat;
    std::vector<Eigen::MatrixXcd> n_hat;
    project(w, v, s, a_hat, n_hat, b_hat, c_hat);
    bool reflected = false;
    a_hat = detail::enforce_stable(a_hat, reflected);

    SchurCache schur_a(a);
    Eigen::VectorXcd spectrum_prev = detail::sorted_spectrum(a_hat);

    ReductionResult out;
    out.method = "birka";
    out.converged = false;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        SchurCache schur_hat(a_hat);
        auto xr = solve_generalized_sylvester(schur_a, schur_hat, n_mats, n_hat,
                                              b * b_hat.adjoint(), opts.gsylv);
        auto yr = solve_generalized_sylvester_dual(schur_a, schur_hat, n_mats, n_hat,
                                                   -c.adjoint() * c_hat, opts.gsylv);
        Eigen::HouseholderQR<Eigen::MatrixXcd> qx(xr.W);
        v = qx.householderQ() * Eigen::MatrixXcd::Identity(sys.dim, d);
        Eigen::HouseholderQR<Eigen::MatrixXcd> qy(yr.W);
        w = qy.householderQ() * Eigen::MatrixXcd::Identity(sys.dim, d);

        project(w, v, s, a_hat, n_hat, b_hat, c_hat);
        a_hat = detail::enforce_stable(a_hat, reflected);

        const Eigen::VectorXcd spectrum_now = detail::sorted_spectrum(a_hat);
        const double delta = (spectrum_now - spectrum_prev).cwiseAbs().maxCoeff();
        spectrum_prev = spectrum_now;
        if (delta < opts.conv_tol) {
            out.converged = true;
            ++it;
            break;
        }
    }
    out.iterations = it;
    out.S = s;
    out.T = v;
    out.reduced = transform_system(sys, s, v);
    return out;
}

}  // namespace qdyn
