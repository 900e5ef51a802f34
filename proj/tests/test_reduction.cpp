#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "qdyn/propagate.hpp"
#include "qdyn/rates.hpp"
#include "qdyn/reduction.hpp"
#include "test_common.hpp"

using namespace qdyn;

namespace {

std::vector<Complex> sorted_eigs(const Eigen::MatrixXcd& m) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(m, false);
    std::vector<Complex> ev(eig.eigenvalues().data(),
                            eig.eigenvalues().data() + eig.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return ev;
}

BilinearSystem morse_like_lvne() {
    auto basis = testing::three_level();
    RateModel model;
    model.kind = RateKind::Constant;
    model.reference_rate = 0.08;
    DephasingModel deph;
    deph.kind = DephasingKind::Constant;
    deph.rate = 0.0;
    return build_lvne(basis, relaxation_rates(basis, model), deph, {}, Ordering::DiagonalsFirst,
                      0.0);
}

}  // namespace

TEST_CASE("shift stabilization displaces every eigenvalue by exactly -alpha") {
    auto sys = morse_like_lvne();
    const double alpha = 1e-4;
    auto stab = stabilize(sys, {StabilizeKind::Shift, alpha, 0});
    auto ev0 = sorted_eigs(dense(sys.A));
    auto ev1 = sorted_eigs(dense(stab.system.A));
    for (std::size_t i = 0; i < ev0.size(); ++i) {
        CHECK(std::abs(ev1[i] - (ev0[i] - alpha)) < 1e-12);
    }
}

TEST_CASE("splitting one component removes the zero eigenvalue of an LvNE generator") {
    auto sys = morse_like_lvne();
    StabilizeMethod method;
    method.kind = StabilizeKind::SplitUnstable;
    method.m = 1;
    auto stab = stabilize(sys, method);
    REQUIRE(stab.removed_eigenvalues.size() == 1);
    CHECK(std::abs(stab.removed_eigenvalues[0]) < 1e-10);
    auto ev = sorted_eigs(dense(stab.system.A));
    CHECK(ev.back().real() < 0.0);
    CHECK(stab.system.dim == sys.dim - 1);

    SUBCASE("outputs are preserved along physical trajectories") {
        auto x0 = initial_state({PureState{2}}, sys);
        TimeGrid grid{0.5, 0, 20};
        AdaptiveOptions opts;
        opts.reltol = 1e-10;
        auto full = propagate_adaptive(sys, no_field(1), x0, grid, opts);
        auto red = propagate_adaptive(stab.system, no_field(1),
                                      (stab.to_stable * x0).eval(), grid, opts);
        CHECK((full.outputs - red.outputs).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("split of an already-stable system with m = 0 is the identity") {
    auto sys = testing::random_stable_bilinear(5, 1, 1, 42);
    StabilizeMethod method;
    method.kind = StabilizeKind::SplitUnstable;
    method.m = 0;
    auto stab = stabilize(sys, method);
    CHECK((dense(stab.system.A) - dense(sys.A)).norm() == 0.0);
    CHECK(stab.to_stable.isIdentity(0.0));
}

TEST_CASE("insufficient split count raises StillUnstable") {
    auto sys = morse_like_lvne();
    // two decoupled blocks would need m = 1 here; force m = 0 on a singular generator
    StabilizeMethod method;
    method.kind = StabilizeKind::SplitUnstable;
    method.m = 0;
    CHECK_THROWS_AS(stabilize(sys, method), StillUnstable);
}

TEST_CASE("input scaling is transparent to propagation but changes the Gramians") {
    auto sys = testing::random_stable_bilinear(6, 1, 1, 7, 1.0, 0.3);
    SUBCASE("xi = 1 is the identity") {
        auto scaled = scale_system(sys, 1.0);
        CHECK((dense(scaled.N[0]) - dense(sys.N[0])).norm() == 0.0);
        CHECK(scaled.field_scale == sys.field_scale);
    }
    SUBCASE("trajectories are invariant under the stored field scale") {
        const double xi = 6.0;
        auto scaled = scale_system(sys, xi);
        TimeGrid grid{0.2, 0, 25};
        std::vector<FieldSpec> spec(1);
        spec[0].envelope = Envelope{Sin2Envelope{grid.duration(), 0.0}};
        spec[0].amplitude = 0.5;
        spec[0].omega = 2.0;
        auto field = make_field(grid, 10, spec, Eigen::VectorXd::Ones(1));
        Eigen::VectorXcd x0 = Eigen::VectorXcd::Zero(sys.dim);
        auto t_orig = propagate_fixed(sys, as_function(field), x0, grid, 50);
        auto t_scaled = propagate_fixed(scaled, as_function(field), x0, grid, 50);
        CHECK((t_orig.outputs - t_scaled.outputs).cwiseAbs().maxCoeff() < 1e-12);

        // the raw equations of motion: scaled matrices driven by xi*u match the
        // original driven by u
        auto raw = scaled;
        raw.field_scale = sys.field_scale;
        auto field_xi = field;
        field_xi.u *= xi;
        auto t_raw = propagate_fixed(raw, as_function(field_xi), x0, grid, 50);
        CHECK((t_orig.outputs - t_raw.outputs).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("Gramians are not invariant") {
        GeneralizedOptions opts;
        opts.tol = 1e-12;
        auto g1 = compute_gramians(sys, opts);
        auto g6 = compute_gramians(scale_system(sys, 6.0), opts);
        CHECK((g1.Wc - g6.Wc).norm() / g1.Wc.norm() > 1e-3);
    }
}

TEST_CASE("balancing an already-balanced diagonal pair returns Sigma = diag(4, 1)") {
    auto sys = testing::random_stable_bilinear(2, 1, 1, 3);
    GramianPair gram;
    gram.Wc = Eigen::Vector2cd(Complex(4.0, 0.0), Complex(1.0, 0.0)).asDiagonal();
    gram.Wo = gram.Wc;
    auto bal = balance_srbt(sys, gram);
    REQUIRE(bal.hsv.size() == 2);
    CHECK(bal.hsv[0] == doctest::Approx(4.0));
    CHECK(bal.hsv[1] == doctest::Approx(1.0));
}

TEST_CASE("square-root balancing properties on a random system") {
    auto sys = testing::random_stable_bilinear(7, 2, 2, 19, 1.0, 0.25);
    GeneralizedOptions opts;
    opts.tol = 1e-13;
    auto gram = compute_gramians(sys, opts);
    auto bal = balance_srbt(sys, gram);

    SUBCASE("defining property: S Wc S^dag = T^dag Wo T = Sigma") {
        CHECK(bal.balanced_error < 1e-8);
    }
    SUBCASE("pseudoinverse pair") {
        const int r = static_cast<int>(bal.hsv.size());
        CHECK((bal.S * bal.T - Eigen::MatrixXcd::Identity(r, r)).norm() < 1e-8);
        CHECK((bal.S * bal.T * bal.S - bal.S).norm() < 1e-8 * bal.S.norm());
    }
    SUBCASE("sigma_i^2 are the eigenvalues of Wc Wo") {
        auto ev = sorted_eigs(gram.Wc * gram.Wo);
        std::vector<double> sq(ev.size());
        for (std::size_t i = 0; i < ev.size(); ++i) sq[i] = std::sqrt(std::abs(ev[i]));
        std::sort(sq.begin(), sq.end(), std::greater<>());
        for (int i = 0; i < bal.hsv.size(); ++i) {
            CHECK(bal.hsv[i] == doctest::Approx(sq[i]).epsilon(1e-8));
        }
    }
    SUBCASE("recomputed Gramians of the balanced system equal Sigma") {
        auto gram_bal = compute_gramians(bal.reduced, opts);
        Eigen::MatrixXcd sigma = bal.hsv.cast<Complex>().asDiagonal();
        CHECK((gram_bal.Wc - sigma).norm() < 1e-7 * sigma.norm());
        CHECK((gram_bal.Wo - sigma).norm() < 1e-7 * sigma.norm());
    }
}

TEST_CASE("Gramian transformation law and HSV invariance") {
    auto sys = testing::random_stable_bilinear(6, 1, 1, 23, 1.0, 0.25);
    GeneralizedOptions opts;
    opts.tol = 1e-13;
    auto gram = compute_gramians(sys, opts);
    auto hsv_ref = sorted_eigs(gram.Wc * gram.Wo);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 3; ++trial) {
        // well-conditioned random transform: orthogonal factor times mild diagonal
        Eigen::MatrixXcd g(6, 6);
        for (int i = 0; i < 36; ++i) g.data()[i] = Complex(dist(rng), dist(rng));
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
        Eigen::MatrixXcd qmat = qr.householderQ();
        Eigen::VectorXd diag(6);
        for (int i = 0; i < 6; ++i) diag[i] = 0.5 + std::abs(dist(rng));
        Eigen::MatrixXcd s = qmat * diag.cast<Complex>().asDiagonal();
        Eigen::MatrixXcd t = s.inverse();

        auto transformed = transform_system(sys, s, t);
        auto gram_t = compute_gramians(transformed, opts);
        CHECK((gram_t.Wc - s * gram.Wc * s.adjoint()).norm() < 1e-7 * gram_t.Wc.norm());
        CHECK((gram_t.Wo - t.adjoint() * gram.Wo * t).norm() < 1e-7 * gram_t.Wo.norm());

        auto hsv_t = sorted_eigs(gram_t.Wc * gram_t.Wo);
        for (std::size_t i = 0; i < hsv_ref.size(); ++i) {
            CHECK(std::abs(hsv_t[i] - hsv_ref[i]) < 1e-8 * std::abs(hsv_ref.back()));
        }
    }
}

TEST_CASE("truncation modes") {
    auto sys = testing::random_stable_bilinear(8, 1, 1, 31, 1.0, 0.2);
    GeneralizedOptions opts;
    opts.tol = 1e-13;
    auto gram = compute_gramians(sys, opts);
    auto bal = balance_srbt(sys, gram);
    const int r = static_cast<int>(bal.hsv.size());

    SUBCASE("simple truncation keeps the leading blocks and stays stable") {
        auto red = truncate(sys, bal, std::min(4, r), TruncateMode::Simple);
        CHECK(red.reduced.dim == std::min(4, r));
        auto ev = sorted_eigs(dense(red.reduced.A));
        CHECK(ev.back().real() < 0.0);
    }
    SUBCASE("singular perturbation equals simple truncation on block-diagonal systems") {
        // hand-build a balanced result whose A is block diagonal
        BilinearSystem bd = testing::random_stable_bilinear(6, 1, 1, 57, 1.0, 0.0);
        Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(6, 6);
        a.topLeftCorner(3, 3) = dense(testing::random_stable_bilinear(3, 1, 1, 58).A);
        a.bottomRightCorner(3, 3) = dense(testing::random_stable_bilinear(3, 1, 1, 59).A);
        bd.A = sparse_from_dense(a);
        ReductionResult fake_bal;
        fake_bal.S = Eigen::MatrixXcd::Identity(6, 6);
        fake_bal.T = fake_bal.S;
        fake_bal.hsv = Eigen::VectorXd::LinSpaced(6, 6.0, 1.0);
        fake_bal.reduced = bd;
        auto simple = truncate(bd, fake_bal, 3, TruncateMode::Simple);
        auto spt = truncate(bd, fake_bal, 3, TruncateMode::SingularPerturbation);
        CHECK((dense(simple.reduced.A) - dense(spt.reduced.A)).norm() == 0.0);
        CHECK((simple.reduced.outputs[0].c - spt.reduced.outputs[0].c).norm() < 1e-14);
    }
    SUBCASE("requesting more states than the balanced rank fails") {
        CHECK_THROWS_AS(truncate(sys, bal, r + 1, TruncateMode::Simple), RankDeficient);
    }
    SUBCASE("singular quasi-steady block raises SingularA22") {
        BilinearSystem degenerate = sys;
        Eigen::MatrixXcd a = dense(sys.A);
        a.bottomRightCorner(2, 2).setZero();
        a.bottomLeftCorner(2, 6).setZero();
        a.topRightCorner(6, 2).setZero();
        degenerate.A = sparse_from_dense(a);
        ReductionResult fake;
        fake.S = Eigen::MatrixXcd::Identity(8, 8);
        fake.T = fake.S;
        fake.hsv = Eigen::VectorXd::LinSpaced(8, 8.0, 1.0);
        fake.reduced = degenerate;
        CHECK_THROWS_AS(truncate(degenerate, fake, 6, TruncateMode::SingularPerturbation),
                        SingularA22);
    }
}
