#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "floqfit/qp.hpp"

using namespace floqfit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
MatrixXd none_rows(int n) { return MatrixXd(0, n); }
} // namespace

TEST_CASE("unconstrained QP is a Newton step") {
    const int n = 3;
    const MatrixXd H = MatrixXd::Identity(n, n);
    VectorXd b(n);
    b << 1.0, -2.0, 0.5;
    const auto r = qp_subproblem_solve(H, -b, none_rows(n), VectorXd(), none_rows(n), VectorXd());
    REQUIRE(r.status == QpStatus::Solved);
    CHECK((r.x - b).norm() <= 1e-12);
}

TEST_CASE("single equality picks the projected optimum") {
    // min 1/2 p'p - p1 - p2  s.t. p1 = 0  ->  p = (0, 1)
    const MatrixXd H = MatrixXd::Identity(2, 2);
    VectorXd g(2);
    g << -1.0, -1.0;
    MatrixXd E(1, 2);
    E << 1.0, 0.0;
    VectorXd e0 = VectorXd::Zero(1);
    const auto r = qp_subproblem_solve(H, g, E, e0, none_rows(2), VectorXd());
    REQUIRE(r.status == QpStatus::Solved);
    CHECK(r.x[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(r.x[1] == Catch::Approx(1.0).margin(1e-12));
    // KKT: Hp + g = E' lambda  ->  lambda = -1
    CHECK(r.eq_mult[0] == Catch::Approx(-1.0).margin(1e-10));
}

TEST_CASE("contradictory inequalities are infeasible") {
    // p1 >= 1 and -p1 >= 0 cannot hold together
    const MatrixXd H = MatrixXd::Identity(1, 1);
    VectorXd g(1);
    g << 0.0;
    MatrixXd C(2, 1);
    C << 1.0, -1.0;
    VectorXd c0(2);
    c0 << -1.0, 0.0;
    const auto r = qp_subproblem_solve(H, g, none_rows(1), VectorXd(), C, c0);
    CHECK(r.status == QpStatus::Infeasible);
}

TEST_CASE("active bound is detected with a positive multiplier") {
    // min (x-2)^2 s.t. x >= 3  ->  x = 3, mu = 2
    MatrixXd H(1, 1);
    H << 2.0;
    VectorXd g(1);
    g << -4.0;
    MatrixXd C(1, 1);
    C << 1.0;
    VectorXd c0(1);
    c0 << -3.0;
    const auto r = qp_subproblem_solve(H, g, none_rows(1), VectorXd(), C, c0);
    REQUIRE(r.status == QpStatus::Solved);
    CHECK(r.x[0] == Catch::Approx(3.0));
    CHECK(r.ineq_mult[0] == Catch::Approx(2.0));
}

TEST_CASE("random strictly convex QPs satisfy KKT (property)") {
    std::mt19937_64 rng(2024);
    auto urand = [&rng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    int solved = 0;
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 6);
        const int me = static_cast<int>(rng() % 2);
        const int mi = static_cast<int>(rng() % 7);
        MatrixXd S(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) S(i, j) = urand(-1, 1);
        const MatrixXd H = S.transpose() * S + 0.3 * MatrixXd::Identity(n, n);
        VectorXd g(n);
        for (int i = 0; i < n; ++i) g[i] = urand(-2, 2);
        MatrixXd E(me, n);
        VectorXd e0(me);
        for (int i = 0; i < me; ++i) {
            for (int j = 0; j < n; ++j) E(i, j) = urand(-1, 1);
            e0[i] = urand(-1, 1);
        }
        MatrixXd C(mi, n);
        VectorXd c0(mi);
        for (int i = 0; i < mi; ++i) {
            for (int j = 0; j < n; ++j) C(i, j) = urand(-1, 1);
            c0[i] = urand(-0.5, 1.5);
        }
        const auto r = DenseQp::solve(H, g, E, e0, C, c0);
        if (r.status != QpStatus::Solved) continue; // random sets may be infeasible
        ++solved;
        // primal feasibility
        if (me > 0) CHECK((E * r.x + e0).cwiseAbs().maxCoeff() <= 1e-8);
        for (int i = 0; i < mi; ++i) CHECK(C.row(i).dot(r.x) + c0[i] >= -1e-8);
        // dual feasibility and stationarity
        for (int i = 0; i < mi; ++i) CHECK(r.ineq_mult[i] >= -1e-10);
        VectorXd station = H * r.x + g;
        if (me > 0) station -= E.transpose() * r.eq_mult;
        if (mi > 0) station -= C.transpose() * r.ineq_mult;
        CHECK(station.cwiseAbs().maxCoeff() <= 1e-7);
        // complementarity
        for (int i = 0; i < mi; ++i)
            CHECK(std::abs(r.ineq_mult[i] * (C.row(i).dot(r.x) + c0[i])) <= 1e-7);
    }
    CHECK(solved >= 25); // the generator keeps most instances feasible
}
