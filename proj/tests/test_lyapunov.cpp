#include "doctest.h"

#include <cmath>
#include <random>
#include <unsupported/Eigen/KroneckerProduct>

#include "qdyn/lyapunov.hpp"
#include "test_common.hpp"

using namespace qdyn;

namespace {

Eigen::MatrixXcd random_complex(int r, int c, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    Eigen::MatrixXcd m(r, c);
    for (int j = 0; j < c; ++j) {
        for (int i = 0; i < r; ++i) m(i, j) = Complex(dist(rng), dist(rng));
    }
    return m;
}

Eigen::MatrixXcd random_stable(int n, unsigned seed, double decay = 1.0) {
    Eigen::MatrixXcd a = random_complex(n, n, seed);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(a, false);
    return a - (eig.eigenvalues().real().maxCoeff() + decay) *
                   Eigen::MatrixXcd::Identity(n, n);
}

// Kronecker-system oracle for A W + W A^dag + Q = 0
Eigen::MatrixXcd lyapunov_kron_oracle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& q) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd big = Eigen::kroneckerProduct(eye, a).eval() +
                           Eigen::kroneckerProduct(a.conjugate(), eye).eval();
    Eigen::VectorXcd qv = Eigen::Map<const Eigen::VectorXcd>(q.data(), n * n);
    Eigen::VectorXcd wv = big.partialPivLu().solve(-qv);
    return Eigen::Map<const Eigen::MatrixXcd>(wv.data(), n, n);
}

}  // namespace

TEST_CASE("scalar and diagonal Lyapunov solutions") {
    Eigen::MatrixXcd a(1, 1), q(1, 1);
    a << Complex(-1.0, 0.0);
    q << Complex(1.0, 0.0);
    CHECK(solve_lyapunov(a, q)(0, 0).real() == doctest::Approx(0.5));

    Eigen::MatrixXcd a2 = Eigen::Vector2cd(Complex(-1.0, 0.0), Complex(-2.0, 0.0)).asDiagonal();
    Eigen::MatrixXcd w = solve_lyapunov(a2, Eigen::MatrixXcd::Identity(2, 2));
    CHECK(w(0, 0).real() == doctest::Approx(0.5));
    CHECK(w(1, 1).real() == doctest::Approx(0.25));
    CHECK(std::abs(w(0, 1)) < 1e-15);
}

TEST_CASE("random stable Lyapunov agrees with the Kronecker oracle") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto a = random_stable(6, seed);
        Eigen::MatrixXcd g = random_complex(6, 6, seed + 100);
        const Eigen::MatrixXcd q = g * g.adjoint();
        const Eigen::MatrixXcd w = solve_lyapunov(a, q);
        const Eigen::MatrixXcd oracle = lyapunov_kron_oracle(a, q);
        CHECK((w - oracle).norm() / oracle.norm() < 1e-10);
        CHECK((a * w + w * a.adjoint() + q).norm() / q.norm() < 1e-8);
        CHECK((w - w.adjoint()).norm() < 1e-8 * w.norm());
    }
}

TEST_CASE("Sylvester solve against the Kronecker oracle") {
    const auto a = random_stable(6, 11);
    const auto b = random_stable(4, 12);
    const Eigen::MatrixXcd q = random_complex(6, 4, 13);
    const Eigen::MatrixXcd x = solve_sylvester(a, b, q);
    CHECK((a * x + x * b + q).norm() / q.norm() < 1e-10);

    Eigen::MatrixXcd big =
        Eigen::kroneckerProduct(Eigen::MatrixXcd::Identity(4, 4), a).eval() +
        Eigen::kroneckerProduct(b.transpose(), Eigen::MatrixXcd::Identity(6, 6)).eval();
    Eigen::VectorXcd qv = Eigen::Map<const Eigen::VectorXcd>(q.data(), 24);
    Eigen::VectorXcd xv = big.partialPivLu().solve(-qv);
    Eigen::MatrixXcd oracle = Eigen::Map<const Eigen::MatrixXcd>(xv.data(), 6, 4);
    CHECK((x - oracle).norm() / oracle.norm() < 1e-10);
}

TEST_CASE("imaginary-axis eigenvalue pair raises SingularLyapunov") {
    Eigen::MatrixXcd a(1, 1);
    a << Complex(0.0, 2.0);  // lambda + conj(lambda) = 0
    CHECK_THROWS_AS(solve_lyapunov(a, Eigen::MatrixXcd::Identity(1, 1)), SingularLyapunov);
}

TEST_CASE("generalized Lyapunov with N = 0 equals the standard solution") {
    const auto a = random_stable(5, 21);
    Eigen::MatrixXcd g = random_complex(5, 2, 22);
    const Eigen::MatrixXcd q = g * g.adjoint();
    SchurCache schur(a);
    auto gen = solve_generalized_lyapunov(schur, {}, q);
    const Eigen::MatrixXcd std_w = solve_lyapunov(schur, q);
    CHECK((gen.W - std_w).norm() <= 1e-14 * std_w.norm());
    CHECK(gen.converged);
}

TEST_CASE("scalar generalized Lyapunov closed form") {
    // A = -a, N = nu, B = b: W = b^2 / (2a - nu^2) when nu^2 < 2a
    const double a = 1.3, nu = 0.8, b = 0.7;
    Eigen::MatrixXcd am(1, 1), nm(1, 1), qm(1, 1);
    am << Complex(-a, 0.0);
    nm << Complex(nu, 0.0);
    qm << Complex(b * b, 0.0);
    SchurCache schur(am);
    const double expected = b * b / (2.0 * a - nu * nu);
    for (auto method : {GeneralizedMethod::Iterative, GeneralizedMethod::Krylov}) {
        GeneralizedOptions opts;
        opts.method = method;
        opts.tol = 1e-13;
        auto res = solve_generalized_lyapunov(schur, {nm}, qm, opts);
        CHECK(res.W(0, 0).real() == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("iterative and Krylov generalized solvers agree on a random system") {
    auto sys = testing::random_stable_bilinear(8, 2, 2, 5);
    Eigen::MatrixXcd a(sys.A);
    std::vector<Eigen::MatrixXcd> n;
    for (const auto& nk : sys.N) n.emplace_back(nk);
    Eigen::MatrixXcd b(8, 2);
    b.col(0) = sys.b[0];
    b.col(1) = sys.b[1];
    const Eigen::MatrixXcd q = b * b.adjoint();
    SchurCache schur(a);

    GeneralizedOptions it_opts;
    it_opts.tol = 1e-12;
    auto w_iter = solve_generalized_lyapunov(schur, n, q, it_opts);
    GeneralizedOptions kr_opts;
    kr_opts.method = GeneralizedMethod::Krylov;
    kr_opts.tol = 1e-12;
    auto w_krylov = solve_generalized_lyapunov(schur, n, q, kr_opts);

    CHECK(w_iter.converged);
    CHECK(w_krylov.converged);
    CHECK((w_iter.W - w_krylov.W).norm() / w_iter.W.norm() < 1e-6);
    CHECK(w_iter.residual < 1e-8);
    CHECK(w_krylov.residual < 1e-8);
    // dual (observability) form residual
    const Eigen::MatrixXcd co = Eigen::MatrixXcd::Identity(8, 8);
    auto wo = solve_generalized_lyapunov_dual(schur, n, co, it_opts);
    CHECK((a.adjoint() * wo.W + wo.W * a + n[0].adjoint() * wo.W * n[0] +
           n[1].adjoint() * wo.W * n[1] + co)
              .norm() < 1e-8 * co.norm());
}

TEST_CASE("violated solvability bound makes the iteration fail loudly") {
    Eigen::MatrixXcd a = Complex(-0.1, 0.0) * Eigen::MatrixXcd::Identity(3, 3);
    Eigen::MatrixXcd n = Eigen::MatrixXcd::Identity(3, 3);  // margin = 1/(2*0.1) = 5
    GeneralizedOptions opts;
    opts.max_iter = 60;
    CHECK_THROWS_AS(
        solve_generalized_lyapunov(SchurCache(a), {n}, Eigen::MatrixXcd::Identity(3, 3), opts),
        NotConverged);
}

TEST_CASE("solvability margin values") {
    Eigen::MatrixXcd a = -Eigen::MatrixXcd::Identity(2, 2);
    Eigen::MatrixXcd n(2, 2);
    n << 0, 1, 1, 0;
    auto rep = solvability_check(a, {n});
    CHECK(rep.a == doctest::Approx(1.0));
    CHECK(rep.lambda == doctest::Approx(1.0));
    CHECK(rep.margin == doctest::Approx(0.5));
    auto rep0 = solvability_check(a, {});
    CHECK(rep0.margin == doctest::Approx(0.0));
}
