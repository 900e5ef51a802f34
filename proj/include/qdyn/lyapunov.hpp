// lyapunov.hpp — dense Lyapunov/Sylvester solvers (Bartels-Stewart on the
// complex Schur form) and the generalized bilinear versions, solved either by
// fixed-point iteration or by a preconditioned bi-conjugate-gradient method on
// the vectorized operator.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qdyn/errors.hpp"

namespace qdyn {

using Complex = std::complex<double>;

// Complex Schur form A = U T U^dag; strictly diagonal inputs short-circuit to
// T = A, U = I (common after eigenbasis stabilization).
class SchurCache {
public:
    explicit SchurCache(const Eigen::MatrixXcd& a) {
        if (a.rows() != a.cols()) throw ValidationError("SchurCache: matrix must be square");
        bool diagonal = true;
        for (int j = 0; diagonal && j < a.cols(); ++j) {
            for (int i = 0; i < a.rows(); ++i) {
                if (i != j && a(i, j) != Complex(0.0, 0.0)) {
                    diagonal = false;
                    break;
                }
            }
        }
        if (diagonal) {
            t_ = a;
            u_ = Eigen::MatrixXcd::Identity(a.rows(), a.cols());
            return;
        }
        Eigen::ComplexSchur<Eigen::MatrixXcd> schur(a, /*computeU=*/true);
        if (schur.info() != Eigen::Success) throw NumericalFailure("SchurCache: Schur failed");
        t_ = schur.matrixT();
        u_ = schur.matrixU();
    }

    const Eigen::MatrixXcd& T() const { return t_; }
    const Eigen::MatrixXcd& U() const { return u_; }
    Eigen::Index size() const { return t_.rows(); }

private:
    Eigen::MatrixXcd t_, u_;
};

namespace detail {

// Solves Ta Y + Y Tb + Q = 0 for triangular Ta, Tb (lower flags select the
// adjoint orientation). Throws when the spectra make the pencil singular.
inline Eigen::MatrixXcd triangular_sylvester(const Eigen::MatrixXcd& ta, bool lower_a,
                                             const Eigen::MatrixXcd& tb, bool lower_b,
                                             const Eigen::MatrixXcd& q) {
    const Eigen::Index n = ta.rows();
    const Eigen::Index m = tb.rows();
    const double scale =
        std::max(ta.diagonal().cwiseAbs().maxCoeff(), tb.diagonal().cwiseAbs().maxCoeff());
    Eigen::MatrixXcd y(n, m);
    Eigen::VectorXcd rhs(n);

    for (Eigen::Index step = 0; step < m; ++step) {
        const Eigen::Index j = lower_b ? (m - 1 - step) : step;
        rhs = -q.col(j);
        // subtract couplings to already-solved columns
        if (lower_b) {
            for (Eigen::Index k = j + 1; k < m; ++k) rhs -= tb(k, j) * y.col(k);
        } else {
            for (Eigen::Index k = 0; k < j; ++k) rhs -= tb(k, j) * y.col(k);
        }
        const Complex shift = tb(j, j);
        // triangular substitution for (Ta + shift I) y_j = rhs
        if (!lower_a) {
            for (Eigen::Index i = n - 1; i >= 0; --i) {
                Complex acc = rhs[i];
                for (Eigen::Index k = i + 1; k < n; ++k) acc -= ta(i, k) * y(k, j);
                const Complex diag = ta(i, i) + shift;
                if (std::abs(diag) < 1e-13 * std::max(scale, 1e-300)) {
                    throw SingularLyapunov("triangular_sylvester: eigenvalue sum ~ 0");
                }
                y(i, j) = acc / diag;
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i) {
                Complex acc = rhs[i];
                for (Eigen::Index k = 0; k < i; ++k) acc -= ta(i, k) * y(k, j);
                const Complex diag = ta(i, i) + shift;
                if (std::abs(diag) < 1e-13 * std::max(scale, 1e-300)) {
                    throw SingularLyapunov("triangular_sylvester: eigenvalue sum ~ 0");
                }
                y(i, j) = acc / diag;
            }
        }
    }
    return y;
}

}  // namespace detail

// Solves op(A) X + X op(B) + Q = 0 with op selected by the adjoint flags.
inline Eigen::MatrixXcd solve_sylvester(const SchurCache& a, bool adjoint_a, const SchurCache& b,
                                        bool adjoint_b, const Eigen::MatrixXcd& q) {
    if (q.rows() != a.size() || q.cols() != b.size()) {
        throw ValidationError("solve_sylvester: shape mismatch");
    }
    const Eigen::MatrixXcd qt = a.U().adjoint() * q * b.U();
    Eigen::MatrixXcd ta = adjoint_a ? Eigen::MatrixXcd(a.T().adjoint()) : a.T();
    Eigen::MatrixXcd tb = adjoint_b ? Eigen::MatrixXcd(b.T().adjoint()) : b.T();
    Eigen::MatrixXcd y = detail::triangular_sylvester(ta, adjoint_a, tb, adjoint_b, qt);
    return a.U() * y * b.U().adjoint();
}

inline Eigen::MatrixXcd solve_sylvester(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                        const Eigen::MatrixXcd& q) {
    SchurCache sa(a), sb(b);
    return solve_sylvester(sa, false, sb, false, q);
}

// A W + W A^dag + Q = 0
inline Eigen::MatrixXcd solve_lyapunov(const SchurCache& a, const Eigen::MatrixXcd& q) {
    return solve_sylvester(a, false, a, true, q);
}

inline Eigen::MatrixXcd solve_lyapunov(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& q) {
    SchurCache sa(a);
    return solve_lyapunov(sa, q);
}

// A^dag W + W A + Q = 0
inline Eigen::MatrixXcd solve_lyapunov_dual(const SchurCache& a, const Eigen::MatrixXcd& q) {
    return solve_sylvester(a, true, a, false, q);
}

// ------------------------------------------------------ generalized equations

enum class GeneralizedMethod { Iterative, Krylov };

struct GeneralizedOptions {
    GeneralizedMethod method{GeneralizedMethod::Iterative};
    double tol{1e-10};
    int max_iter{400};
    bool throw_on_fail{true};
};

struct GeneralizedResult {
    Eigen::MatrixXcd W;
    int iterations{0};
    double residual{0.0};
    bool converged{false};
};

namespace detail {

// generic bilinear Sylvester operator L(X) = op_a(A) X + X op_b(B) + sum_k N_k X M_k
struct BilinearOperator {
    const SchurCache& a;
    bool adjoint_a;
    const SchurCache& b;
    bool adjoint_b;
    const std::vector<Eigen::MatrixXcd>& n_left;
    const std::vector<Eigen::MatrixXcd>& m_right;
    Eigen::MatrixXcd a_full, b_full;  // reassembled for residuals/applications

    BilinearOperator(const SchurCache& a_, bool adj_a, const SchurCache& b_, bool adj_b,
                     const std::vector<Eigen::MatrixXcd>& nl,
                     const std::vector<Eigen::MatrixXcd>& mr)
        : a(a_), adjoint_a(adj_a), b(b_), adjoint_b(adj_b), n_left(nl), m_right(mr) {
        Eigen::MatrixXcd af = a.U() * a.T() * a.U().adjoint();
        Eigen::MatrixXcd bf = b.U() * b.T() * b.U().adjoint();
        a_full = adjoint_a ? Eigen::MatrixXcd(af.adjoint()) : af;
        b_full = adjoint_b ? Eigen::MatrixXcd(bf.adjoint()) : bf;
    }

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& x) const {
        Eigen::MatrixXcd y = a_full * x + x * b_full;
        for (std::size_t k = 0; k < n_left.size(); ++k) y += n_left[k] * x * m_right[k];
        return y;
    }

    Eigen::MatrixXcd apply_adjoint(const Eigen::MatrixXcd& x) const {
        Eigen::MatrixXcd y = a_full.adjoint() * x + x * b_full.adjoint();
        for (std::size_t k = 0; k < n_left.size(); ++k) {
            y += n_left[k].adjoint() * x * m_right[k].adjoint();
        }
        return y;
    }

    // linear-part solves used as preconditioner and as the iteration kernel
    Eigen::MatrixXcd solve_linear(const Eigen::MatrixXcd& q) const {
        return solve_sylvester(a, adjoint_a, b, adjoint_b, q);
    }
    Eigen::MatrixXcd solve_linear_adjoint(const Eigen::MatrixXcd& q) const {
        return solve_sylvester(a, !adjoint_a, b, !adjoint_b, q);
    }
};

inline Complex frob_inner(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
    return (x.conjugate().cwiseProduct(y)).sum();
}

inline GeneralizedResult solve_generalized(const BilinearOperator& op, const Eigen::MatrixXcd& q,
                                           const GeneralizedOptions& opts) {
    GeneralizedResult result;
    const double qnorm = std::max(q.norm(), 1e-300);

    if (opts.method == GeneralizedMethod::Iterative) {
        Eigen::MatrixXcd x = op.solve_linear(q);
        int it = 0;
        for (; it < opts.max_iter; ++it) {
            Eigen::MatrixXcd rhs = q;
            for (std::size_t k = 0; k < op.n_left.size(); ++k) {
                rhs += op.n_left[k] * x * op.m_right[k];
            }
            Eigen::MatrixXcd x_new = op.solve_linear(rhs);
            const double delta = (x_new - x).norm();
            x.swap(x_new);
            if (delta < opts.tol * std::max(1.0, x.norm())) {
                result.converged = true;
                ++it;
                break;
            }
        }
        result.W = std::move(x);
        result.iterations = it;
    } else {
        // preconditioned BiCG on L(X) = -Q, preconditioner = linear-part solve
        Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(q.rows(), q.cols());
        Eigen::MatrixXcd b = -q;
        Eigen::MatrixXcd r = b, rh = b;
        Eigen::MatrixXcd p, ph;
        Complex rho_old(1.0, 0.0);
        bool first = true;
        int it = 0;
        for (; it < opts.max_iter; ++it) {
            if (r.norm() < opts.tol * qnorm) {
                result.converged = true;
                break;
            }
            Eigen::MatrixXcd z = op.solve_linear(-r);    // M^-1 r
            Eigen::MatrixXcd zh = op.solve_linear_adjoint(-rh);
            const Complex rho = frob_inner(rh, z);
            if (rho == Complex(0.0, 0.0)) break;  // breakdown
            if (first) {
                p = z;
                ph = zh;
                first = false;
            } else {
                const Complex beta = rho / rho_old;
                p = z + beta * p;
                ph = zh + std::conj(beta) * ph;
            }
            const Eigen::MatrixXcd ap = op.apply(p);
            const Eigen::MatrixXcd aph = op.apply_adjoint(ph);
            const Complex denom = frob_inner(ph, ap);
            if (denom == Complex(0.0, 0.0)) break;
            const Complex alpha = rho / denom;
            x += alpha * p;
            r -= alpha * ap;
            rh -= std::conj(alpha) * aph;
            rho_old = rho;
        }
        result.W = std::move(x);
        result.iterations = it;
    }

    result.residual = (op.apply(result.W) + q).norm() / qnorm;
    if (opts.method == GeneralizedMethod::Krylov) {
        result.converged = result.residual < opts.tol * 10.0;
    }
    if (!result.converged && opts.throw_on_fail) {
        throw NotConverged("generalized solver: residual " + std::to_string(result.residual) +
                           " after " + std::to_string(result.iterations) + " iterations");
    }
    return result;
}

}  // namespace detail

// A W + W A^dag + sum_k N_k W N_k^dag + Q = 0 (controllability form)
inline GeneralizedResult solve_generalized_lyapunov(const SchurCache& a,
                                                    const std::vector<Eigen::MatrixXcd>& n,
                                                    const Eigen::MatrixXcd& q,
                                                    const GeneralizedOptions& opts = {}) {
    std::vector<Eigen::MatrixXcd> n_adj;
    n_adj.reserve(n.size());
    for (const auto& nk : n) n_adj.emplace_back(nk.adjoint());
    detail::BilinearOperator op(a, false, a, true, n, n_adj);
    auto result = detail::solve_generalized(op, q, opts);
    result.W = 0.5 * (result.W + result.W.adjoint().eval());
    return result;
}

// A^dag W + W A + sum_k N_k^dag W N_k + Q = 0 (observability form)
inline GeneralizedResult solve_generalized_lyapunov_dual(const SchurCache& a,
                                                         const std::vector<Eigen::MatrixXcd>& n,
                                                         const Eigen::MatrixXcd& q,
                                                         const GeneralizedOptions& opts = {}) {
    std::vector<Eigen::MatrixXcd> n_adj;
    n_adj.reserve(n.size());
    for (const auto& nk : n) n_adj.emplace_back(nk.adjoint());
    detail::BilinearOperator op(a, true, a, false, n_adj, n);
    auto result = detail::solve_generalized(op, q, opts);
    result.W = 0.5 * (result.W + result.W.adjoint().eval());
    return result;
}

// A X + X B^dag + sum_k N_k X M_k^dag + F = 0 (BIRKA primal for B = A_hat,
// M = N_hat, F = B B_hat^dag)
inline GeneralizedResult solve_generalized_sylvester(const SchurCache& a, const SchurCache& b,
                                                     const std::vector<Eigen::MatrixXcd>& n,
                                                     const std::vector<Eigen::MatrixXcd>& m,
                                                     const Eigen::MatrixXcd& f,
                                                     const GeneralizedOptions& opts = {}) {
    if (n.size() != m.size()) throw ValidationError("generalized sylvester: channel mismatch");
    std::vector<Eigen::MatrixXcd> m_adj;
    m_adj.reserve(m.size());
    for (const auto& mk : m) m_adj.emplace_back(mk.adjoint());
    detail::BilinearOperator op(a, false, b, true, n, m_adj);
    return detail::solve_generalized(op, f, opts);
}

// A^dag Y + Y B + sum_k N_k^dag Y M_k + F = 0 (BIRKA dual with F = -C^dag C_hat)
inline GeneralizedResult solve_generalized_sylvester_dual(const SchurCache& a,
                                                          const SchurCache& b,
                                                          const std::vector<Eigen::MatrixXcd>& n,
                                                          const std::vector<Eigen::MatrixXcd>& m,
                                                          const Eigen::MatrixXcd& f,
                                                          const GeneralizedOptions& opts = {}) {
    if (n.size() != m.size()) throw ValidationError("generalized sylvester: channel mismatch");
    std::vector<Eigen::MatrixXcd> n_adj;
    n_adj.reserve(n.size());
    for (const auto& nk : n) n_adj.emplace_back(nk.adjoint());
    detail::BilinearOperator op(a, true, b, false, n_adj, m);
    return detail::solve_generalized(op, f, opts);
}

// ------------------------------------------------------- solvability estimate

struct SolvabilityReport {
    double lambda{0.0};  // bound constant, taken as cond_2 of A's eigenvector matrix
    double a{0.0};       // spectral abscissa magnitude |max Re lambda(A)|
    double margin{0.0};  // lambda^2/(2a) sum_k ||N_k||_2^2; existence requires < 1
};

inline SolvabilityReport solvability_check(const Eigen::MatrixXcd& a_mat,
                                           const std::vector<Eigen::MatrixXcd>& n) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(a_mat, /*computeEigenvectors=*/true);
    if (eig.info() != Eigen::Success) throw NumericalFailure("solvability_check: eig failed");
    SolvabilityReport report;
    const double max_re = eig.eigenvalues().real().maxCoeff();
    report.a = std::abs(max_re);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd_v(eig.eigenvectors());
    report.lambda = svd_v.singularValues()(0) /
                    svd_v.singularValues()(svd_v.singularValues().size() - 1);
    double sum = 0.0;
    for (const auto& nk : n) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd_n(nk);
        const double s = svd_n.singularValues()(0);
        sum += s * s;
    }
    if (max_re >= 0.0 || report.a == 0.0) {
        report.margin = std::numeric_limits<double>::infinity();
    } else {
        report.margin = report.lambda * report.lambda / (2.0 * report.a) * sum;
    }
    return report;
}

}  // namespace qdyn
