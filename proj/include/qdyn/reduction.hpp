// reduction.hpp — stabilization of the LvNE generator, input scaling, Gramian
// computation, square-root balancing, and truncation (simple or singular
// perturbation).

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "qdyn/bilinear.hpp"
#include "qdyn/lyapunov.hpp"

namespace qdyn {

inline Eigen::MatrixXcd dense(const SparseMatrixC& m) { return Eigen::MatrixXcd(m); }

inline SparseMatrixC sparse_from_dense(const Eigen::MatrixXcd& m, double drop = 0.0) {
    std::vector<Eigen::Triplet<Complex>> trips;
    for (int j = 0; j < m.cols(); ++j) {
        for (int i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > drop) trips.emplace_back(i, j, m(i, j));
        }
    }
    SparseMatrixC out(m.rows(), m.cols());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

// input matrix B = [b_1 ... b_m] and output matrix C (rows c_q^dag)
inline Eigen::MatrixXcd input_matrix(const BilinearSystem& sys) {
    Eigen::MatrixXcd b(sys.dim, std::max(1, sys.channels()));
    b.setZero();
    for (int k = 0; k < sys.channels(); ++k) b.col(k) = sys.b[k];
    return b;
}

inline Eigen::MatrixXcd output_matrix(const BilinearSystem& sys) {
    const int p = sys.outputs_count();
    Eigen::MatrixXcd c(std::max(1, p), sys.dim);
    c.setZero();
    for (int q = 0; q < p; ++q) {
        if (sys.outputs[q].form != OutputForm::Linear) {
            throw ValidationError("output_matrix: reduction requires linear (LvNE) outputs");
        }
        c.row(q) = sys.outputs[q].c.adjoint();
    }
    return c;
}

// x_hat = S x; A_hat = S A T, N_hat = S N T, b_hat = S b, c_hat^dag = c^dag T.
// Output offsets are invariant and carried along.
inline BilinearSystem transform_system(const BilinearSystem& sys, const Eigen::MatrixXcd& s,
                                       const Eigen::MatrixXcd& t) {
    if (s.cols() != sys.dim || t.rows() != sys.dim || s.rows() != t.cols()) {
        throw ValidationError("transform_system: projector shape mismatch");
    }
    BilinearSystem out;
    out.kind = sys.kind;
    out.dim = static_cast<int>(s.rows());
    out.n_states = out.dim;  // no density-matrix indexing in projected coordinates
    out.field_scale = sys.field_scale;
    out.A = sparse_from_dense(s * dense(sys.A) * t);
    for (const auto& nk : sys.N) out.N.push_back(sparse_from_dense(s * dense(nk) * t));
    for (const auto& bk : sys.b) out.b.push_back(s * bk);
    out.x_e = s * sys.x_e;
    out.x0 = s * sys.x0;
    for (const auto& o : sys.outputs) {
        Output oo;
        oo.label = o.label;
        oo.form = o.form;
        oo.offset = o.offset;
        oo.c = t.adjoint() * o.c;
        out.outputs.push_back(std::move(oo));
    }
    return out;
}

// --------------------------------------------------------------- stabilization

enum class StabilizeKind { Shift, SplitUnstable };

struct StabilizeMethod {
    StabilizeKind kind{StabilizeKind::SplitUnstable};
    double alpha{1e-4};  // Shift: A -> A - alpha I
    int m{1};            // Split: number of least-stable components to remove
};

struct StabilizedSystem {
    BilinearSystem system;
    StabilizeKind kind{StabilizeKind::Shift};
    double alpha{0.0};
    Eigen::VectorXcd removed_eigenvalues;
    // Split bookkeeping (kept rows of V^-1 / kept columns of V); the removed
    // trace component is dynamically inert for physical initial states, so
    // re-embedding reduced results only needs these maps and the output offsets.
    Eigen::MatrixXcd to_stable;    // maps original -> stable coordinates
    Eigen::MatrixXcd from_stable;  // maps stable coordinates -> original
};

inline StabilizedSystem stabilize(const BilinearSystem& sys, const StabilizeMethod& method) {
    StabilizedSystem out;
    out.kind = method.kind;
    if (method.kind == StabilizeKind::Shift) {
        if (!(method.alpha > 0.0)) throw ValidationError("stabilize: shift alpha must be > 0");
        out.alpha = method.alpha;
        out.system = sys;
        SparseMatrixC eye(sys.dim, sys.dim);
        eye.setIdentity();
        out.system.A = sys.A - Complex(method.alpha, 0.0) * eye;
        return out;
    }

    if (method.m < 0) throw ValidationError("stabilize: split count must be >= 0");
    Eigen::MatrixXcd a = dense(sys.A);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(a, /*computeEigenvectors=*/true);
    if (eig.info() != Eigen::Success) throw NumericalFailure("stabilize: eigensolver failed");

    if (method.m == 0) {  // nothing to remove; keep the original coordinates
        if (eig.eigenvalues().real().maxCoeff() >= 0.0) {
            throw StillUnstable("stabilize: split count 0 but the spectrum is not negative");
        }
        out.system = sys;
        out.to_stable = Eigen::MatrixXcd::Identity(sys.dim, sys.dim);
        out.from_stable = out.to_stable;
        return out;
    }

    std::vector<int> order(sys.dim);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return std::abs(eig.eigenvalues()[i].real()) < std::abs(eig.eigenvalues()[j].real());
    });
    const int n_keep = sys.dim - method.m;
    if (n_keep < 1) throw ValidationError("stabilize: nothing left after split");

    out.removed_eigenvalues.resize(method.m);
    Eigen::VectorXcd kept_eigenvalues(n_keep);
    Eigen::MatrixXcd v_kept(sys.dim, n_keep);
    for (int k = 0; k < method.m; ++k) out.removed_eigenvalues[k] = eig.eigenvalues()[order[k]];
    for (int k = 0; k < n_keep; ++k) {
        kept_eigenvalues[k] = eig.eigenvalues()[order[method.m + k]];
        v_kept.col(k) = eig.eigenvectors().col(order[method.m + k]);
    }
    if (n_keep > 0 && kept_eigenvalues.real().maxCoeff() >= 0.0) {
        throw StillUnstable("stabilize: spectrum not negative after removing " +
                            std::to_string(method.m) + " components");
    }

    // rows of V^-1 belonging to the kept components
    Eigen::MatrixXcd v_full(sys.dim, sys.dim);
    for (int k = 0; k < sys.dim; ++k) v_full.col(k) = eig.eigenvectors().col(order[k]);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(v_full);
    Eigen::MatrixXcd v_inv = lu.inverse();
    out.to_stable = v_inv.bottomRows(n_keep);
    out.from_stable = v_kept;

    BilinearSystem& red = out.system;
    red.kind = sys.kind;
    red.dim = n_keep;
    red.n_states = n_keep;
    red.field_scale = sys.field_scale;
    std::vector<Eigen::Triplet<Complex>> trips;
    for (int k = 0; k < n_keep; ++k) trips.emplace_back(k, k, kept_eigenvalues[k]);
    red.A.resize(n_keep, n_keep);
    red.A.setFromTriplets(trips.begin(), trips.end());
    for (const auto& nk : sys.N) {
        red.N.push_back(sparse_from_dense(out.to_stable * dense(nk) * out.from_stable));
    }
    for (const auto& bk : sys.b) red.b.push_back(out.to_stable * bk);
    red.x_e = out.to_stable * sys.x_e;
    red.x0 = out.to_stable * sys.x0;
    for (const auto& o : sys.outputs) {
        Output oo;
        oo.label = o.label;
        oo.form = o.form;
        oo.offset = o.offset;
        oo.c = out.from_stable.adjoint() * o.c;
        red.outputs.push_back(std::move(oo));
    }
    return out;
}

// u -> xi u, N -> N/xi, b -> b/xi; the stored field scale makes propagation and
// control transparent to the change while the Gramians see the scaled input.
inline BilinearSystem scale_system(const BilinearSystem& sys, double xi) {
    if (!(xi >= 1.0)) throw ValidationError("scale_system: xi must be >= 1");
    BilinearSystem out = sys;
    if (xi == 1.0) return out;
    for (auto& nk : out.N) nk *= Complex(1.0 / xi, 0.0);
    for (auto& bk : out.b) bk /= xi;
    out.field_scale = sys.field_scale * xi;
    return out;
}

// ------------------------------------------------------------------- Gramians

struct GramianPair {
    Eigen::MatrixXcd Wc, Wo;
    int iterations_c{0}, iterations_o{0};
    double residual_c{0.0}, residual_o{0.0};
};

inline GramianPair compute_gramians(const BilinearSystem& sys,
                                    const GeneralizedOptions& opts = {}) {
    const Eigen::MatrixXcd a = dense(sys.A);
    std::vector<Eigen::MatrixXcd> n;
    for (const auto& nk : sys.N) n.push_back(dense(nk));
    const Eigen::MatrixXcd b = input_matrix(sys);
    const Eigen::MatrixXcd c = output_matrix(sys);

    SchurCache schur(a);
    auto rc = solve_generalized_lyapunov(schur, n, b * b.adjoint(), opts);
    auto ro = solve_generalized_lyapunov_dual(schur, n, c.adjoint() * c, opts);
    GramianPair out;
    out.Wc = std::move(rc.W);
    out.Wo = std::move(ro.W);
    out.iterations_c = rc.iterations;
    out.iterations_o = ro.iterations;
    out.residual_c = rc.residual;
    out.residual_o = ro.residual;
    return out;
}

// ------------------------------------------------------------------ balancing

struct ReductionResult {
    Eigen::MatrixXcd S;  // d x n
    Eigen::MatrixXcd T;  // n x d, with S T = I_d
    Eigen::VectorXd hsv;
    BilinearSystem reduced;
    std::string method;
    bool converged{true};
    int iterations{0};
    double balanced_error{0.0};
};

namespace detail {

// W = Z Z^dag via symmetric eigendecomposition with small-eigenvalue clipping;
// robust to the rank deficiency left behind by stabilization
inline Eigen::MatrixXcd psd_factor(const Eigen::MatrixXcd& w, double clip = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (w + w.adjoint()));
    if (eig.info() != Eigen::Success) throw NumericalFailure("psd_factor: eig failed");
    const double lam_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double cut = clip * lam_max;
    int rank = 0;
    for (int i = 0; i < eig.eigenvalues().size(); ++i) {
        if (eig.eigenvalues()[i] > cut) ++rank;
    }
    Eigen::MatrixXcd z(w.rows(), std::max(rank, 1));
    z.setZero();
    int col = 0;
    for (int i = 0; i < eig.eigenvalues().size(); ++i) {
        if (eig.eigenvalues()[i] > cut) {
            z.col(col++) = eig.eigenvectors().col(i) * std::sqrt(eig.eigenvalues()[i]);
        }
    }
    return z;
}

}  // namespace detail

// Square-root balancing: W_C = Z_C Z_C^dag, W_O = Z_O Z_O^dag, SVD of
// Z_O^dag Z_C = U Sigma V^dag, then S = Sigma^-1/2 U^dag Z_O^dag and
// T = Z_C V Sigma^-1/2 balance both Gramians to Sigma.
inline ReductionResult balance_srbt(const BilinearSystem& sys, const GramianPair& gram) {
    const Eigen::MatrixXcd zc = detail::psd_factor(gram.Wc);
    const Eigen::MatrixXcd zo = detail::psd_factor(gram.Wo);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(zo.adjoint() * zc,
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sigma = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i) {
        if (sigma[i] > sigma[0] * 1e-13) ++rank;
    }
    if (rank < 1) throw RankDeficient("balance_srbt: Gramian product has rank 0");

    const Eigen::VectorXd inv_sqrt = sigma.head(rank).cwiseSqrt().cwiseInverse();
    ReductionResult out;
    out.method = "srbt";
    out.hsv = sigma.head(rank);
    out.S = inv_sqrt.asDiagonal() * svd.matrixU().leftCols(rank).adjoint() * zo.adjoint();
    out.T = zc * svd.matrixV().leftCols(rank) * inv_sqrt.asDiagonal();
    out.reduced = transform_system(sys, out.S, out.T);
    const Eigen::MatrixXcd sig = out.hsv.cast<Complex>().asDiagonal();
    out.balanced_error = std::max((out.S * gram.Wc * out.S.adjoint() - sig).norm(),
                                  (out.T.adjoint() * gram.Wo * out.T - sig).norm()) /
                         std::max(out.hsv.norm(), 1e-300);
    return out;
}

enum class TruncateMode { Simple, SingularPerturbation };

// Keep the d most controllable-and-observable balanced states. Simple drops
// the rest; singular perturbation replaces them by their quasi-steady values.
inline ReductionResult truncate(const BilinearSystem& sys, const ReductionResult& balance, int d,
                                TruncateMode mode = TruncateMode::Simple) {
    const int r = static_cast<int>(balance.hsv.size());
    if (d < 1 || d > r) {
        throw RankDeficient("truncate: requested order " + std::to_string(d) +
                            " exceeds balanced rank " + std::to_string(r));
    }
    ReductionResult out;
    out.hsv = balance.hsv;
    out.S = balance.S.topRows(d);
    out.T = balance.T.leftCols(d);
    out.iterations = 0;
    if (mode == TruncateMode::Simple || d == r) {
        out.method = "srbt-truncate";
        out.reduced = transform_system(sys, out.S, out.T);
        return out;
    }
    out.method = "srbt-spt";

    // full balanced matrices, partitioned at d
    const BilinearSystem bal = (balance.reduced.dim == r)
                                   ? balance.reduced
                                   : transform_system(sys, balance.S, balance.T);
    const Eigen::MatrixXcd a = dense(bal.A);
    const auto a11 = a.topLeftCorner(d, d);
    const auto a12 = a.topRightCorner(d, r - d);
    const auto a21 = a.bottomLeftCorner(r - d, d);
    const auto a22 = a.bottomRightCorner(r - d, r - d);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(a22);
    if (!lu.isInvertible()) throw SingularA22("truncate: quasi-steady block not invertible");
    const Eigen::MatrixXcd a22_inv_a21 = lu.solve(Eigen::MatrixXcd(a21));

    BilinearSystem red;
    red.kind = bal.kind;
    red.dim = d;
    red.n_states = d;
    red.field_scale = bal.field_scale;
    red.A = sparse_from_dense(a11 - a12 * a22_inv_a21);
    for (const auto& nk : bal.N) {
        const Eigen::MatrixXcd nfull = dense(nk);
        red.N.push_back(sparse_from_dense(nfull.topLeftCorner(d, d) -
                                          nfull.topRightCorner(d, r - d) * a22_inv_a21));
    }
    for (const auto& bk : bal.b) red.b.push_back(bk.head(d));
    red.x_e = bal.x_e.head(d);
    red.x0 = bal.x0.head(d);
    for (const auto& o : bal.outputs) {
        Output oo;
        oo.label = o.label;
        oo.form = o.form;
        oo.offset = o.offset;
        // c_hat^dag = c_1^dag - c_2^dag A22^-1 A21
        oo.c = o.c.head(d) - a22_inv_a21.adjoint() * o.c.tail(r - d);
        red.outputs.push_back(std::move(oo));
    }
    out.reduced = std::move(red);
    return out;
}

}  // namespace qdyn
