#include <catch2/catch_amalgamated.hpp>

#include <unsupported/Eigen/MatrixFunctions>

#include "floqfit/floquet.hpp"
#include "floqfit/integrate.hpp"
#include "floqfit/model.hpp"

using namespace floqfit;
using Vec1 = Eigen::Matrix<double, 1, 1>;

namespace {

const IrParams kP{1e7, 1.0 / 3120.0, 0.25, 1.0 / 36.0, 2.5e-4};

SeasonalForcing forcing52(double alpha, double delta) {
    return SeasonalForcing(alpha, {{delta, Rational(1, 52)}});
}

double pade22(double z) { // stability function of the 2-stage Gauss method
    return (1.0 + z / 2.0 + z * z / 12.0) / (1.0 - z / 2.0 + z * z / 12.0);
}

} // namespace

TEST_CASE("gl2_step basics") {
    StepperConfig cfg{0.5, 1e-13, 25};
    SECTION("zero field leaves the state alone") {
        auto rhs = [](double, const Eigen::Vector2d&) { return Eigen::Vector2d::Zero().eval(); };
        auto jac = [](double, const Eigen::Vector2d&) { return Eigen::Matrix2d::Zero().eval(); };
        const Eigen::Vector2d x(3.0, -1.5);
        CHECK((gl2_step(rhs, jac, 0.0, x, 0.5, cfg) - x).norm() == 0.0);
    }
    SECTION("scalar linear test equals the (2,2) Pade approximant") {
        for (double lambda : {-2.0, -0.3, 0.7}) {
            auto rhs = [lambda](double, const Vec1& x) { return Vec1(lambda * x[0]); };
            auto jac = [lambda](double, const Vec1&) { return Vec1(lambda); };
            const Vec1 x0(1.37);
            for (double h : {0.1, 0.5, 1.0}) {
                const Vec1 x1 = gl2_step(rhs, jac, 0.0, x0, h, cfg);
                CHECK(x1[0] == Catch::Approx(pade22(h * lambda) * x0[0]).epsilon(1e-12));
            }
        }
    }
    SECTION("A-stability smoke: extremely stiff decay stays bounded") {
        auto rhs = [](double, const Vec1& x) { return Vec1(-1e6 * x[0]); };
        auto jac = [](double, const Vec1&) { return Vec1(-1e6); };
        Vec1 x(1.0);
        for (int i = 0; i < 10; ++i) x = gl2_step(rhs, jac, 0.0, x, 1.0, cfg);
        CHECK(std::abs(x[0]) < 1.0);
        CHECK(std::abs(pade22(-1e6)) < 1.0);
    }
}

TEST_CASE("integrate contract") {
    StepperConfig cfg{0.01, 1e-13, 25};
    SECTION("tf == t0 gives a single node") {
        auto rhs = [](double, const Vec1& x) { return Vec1(x[0]); };
        auto jac = [](double, const Vec1&) { return Vec1(1.0); };
        const auto traj = integrate(rhs, jac, 2.0, 2.0, Vec1(5.0), cfg);
        REQUIRE(traj.size() == 1);
        CHECK(traj.states[0][0] == 5.0);
    }
    SECTION("constant 2x2 linear system matches the matrix exponential") {
        Eigen::Matrix2d A;
        A << -0.3, 1.1, -0.4, -0.2;
        auto rhs = [&A](double, const Eigen::Vector2d& x) { return (A * x).eval(); };
        auto jac = [&A](double, const Eigen::Vector2d&) { return A; };
        const Eigen::Vector2d x0(1.0, -2.0);
        StepperConfig c{0.01 * 3.0, 1e-13, 25}; // h = 0.01 * (tf - t0)
        const auto traj = integrate(rhs, jac, 0.0, 3.0, x0, c);
        const Eigen::Vector2d exact = (A * 3.0).exp() * x0;
        CHECK((traj.states.back() - exact).norm() <= 1e-8 * exact.norm());
    }
    SECTION("final partial step lands exactly on tf") {
        auto rhs = [](double, const Vec1& x) { return Vec1(-x[0]); };
        auto jac = [](double, const Vec1&) { return Vec1(-1.0); };
        const auto traj = integrate(rhs, jac, 0.0, 1.05, Vec1(1.0), StepperConfig{0.5, 1e-13, 25});
        CHECK(traj.times.back() == 1.05);
        CHECK(traj.size() == 4); // 0, 0.5, 1.0, 1.05
    }
    SECTION("IR trajectory from the multi-harmonic fit stays bounded and nonnegative") {
        IrParams p = kP;
        p.nu = 6.23095e-4;
        const SeasonalForcing f(1.57434e-4, {{-8.50356e-6, parse_rational("0.00609")},
                                             {3.18808e-5, parse_rational("0.01882")},
                                             {-2.09876e-5, parse_rational("0.02476")}});
        auto rhs = [&](double t, const Eigen::Vector2d& x) { return ir_rhs(p, f, t, x); };
        auto jac = [&](double t, const Eigen::Vector2d& x) { return ir_jacobian(p, f, t, x); };
        const auto traj =
            integrate(rhs, jac, 0.0, 505.0, Eigen::Vector2d(114.701, 5.16297e-21),
                      StepperConfig{0.25, 1e-12, 25});
        for (const auto& s : traj.states) {
            CHECK(s[0] >= -1e-9);
            CHECK(s[1] >= -1e-9);
            CHECK(s[0] + s[1] <= p.N);
        }
    }
}

TEST_CASE("observed order of convergence is 4") {
    // strong transient (saturated infection term) so the h^4 error term
    // dominates round-off in the step-halving study
    IrParams p = kP;
    const auto f = forcing52(2.0e-4, 0.8e-4);
    auto rhs = [&](double t, const Eigen::Vector2d& x) { return ir_rhs(p, f, t, x); };
    auto jac = [&](double t, const Eigen::Vector2d& x) { return ir_jacobian(p, f, t, x); };
    const Eigen::Vector2d x0(5.0e4, 1.0e4);
    const double T = 40.0;
    auto end_state = [&](double h) {
        return integrate(rhs, jac, 0.0, T, x0, StepperConfig{h, 1e-14, 40}).states.back();
    };
    const Eigen::Vector2d xh = end_state(1.0);
    const Eigen::Vector2d xh2 = end_state(0.5);
    const Eigen::Vector2d xh4 = end_state(0.25);
    const double e1 = (xh - xh2).norm();
    const double e2 = (xh2 - xh4).norm();
    const double order = std::log2(e1 / e2);
    CHECK(order == Catch::Approx(4.0).margin(0.2));
}

TEST_CASE("time symmetry of the Gauss method") {
    IrParams p = kP;
    const auto f = forcing52(2.0e-4, 0.4e-4);
    auto rhs = [&](double t, const Eigen::Vector2d& x) { return ir_rhs(p, f, t, x); };
    auto jac = [&](double t, const Eigen::Vector2d& x) { return ir_jacobian(p, f, t, x); };
    StepperConfig cfg{0.25, 1e-14, 40};
    Eigen::Vector2d x(800.0, 5000.0);
    const Eigen::Vector2d x0 = x;
    const int n = 200;
    for (int i = 0; i < n; ++i) x = gl2_step(rhs, jac, i * cfg.h, x, cfg.h, cfg);
    for (int i = n; i > 0; --i) x = gl2_step(rhs, jac, i * cfg.h, x, -cfg.h, cfg);
    CHECK((x - x0).norm() <= 1e-8 * x0.norm());
}

TEST_CASE("Newton failure is reported with the failing time") {
    // h far too large for a violently stiff nonlinear field
    auto rhs = [](double, const Vec1& x) { return Vec1(-1e8 * x[0] * x[0] * x[0] + 1e8); };
    auto jac = [](double, const Vec1& x) { return Vec1(-3e8 * x[0] * x[0]); };
    StepperConfig cfg{1e6, 1e-13, 3};
    try {
        gl2_step(rhs, jac, 7.0, Vec1(2.0), 1e6, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("7.0") != std::string::npos);
    }
}

TEST_CASE("monodromy") {
    StepperConfig cfg{0.01, 1e-13, 25};
    SECTION("constant A equals the matrix exponential") {
        Eigen::Matrix2d A;
        A << 0.1, -0.7, 0.3, -0.5;
        auto Af = [&A](double) -> Eigen::MatrixXd { return A; };
        const auto fs = monodromy(Af, 2.0, cfg);
        const Eigen::MatrixXd exact = (A * 2.0).exp();
        CHECK((fs.monodromy - exact).norm() <= 1e-8 * exact.norm());
    }
    SECTION("scalar cosine system has multiplier 1") {
        auto Af = [](double t) -> Eigen::MatrixXd {
            Eigen::MatrixXd m(1, 1);
            m(0, 0) = std::cos(2.0 * std::numbers::pi * t);
            return m;
        };
        const auto fs = monodromy(Af, 1.0, cfg);
        CHECK(fs.monodromy(0, 0) == Catch::Approx(1.0).margin(1e-8));
    }
    SECTION("Liouville: det Z(sigma) = exp of the integrated trace") {
        const SeasonalForcing f(0.3, {{0.1, Rational(1, 4)}});
        IrParams p = kP;
        p.nu = 0.5;
        auto Af = [&](double t) -> Eigen::MatrixXd {
            return ir_jacobian(p, f, t, Eigen::Vector2d(120.0, 900.0));
        };
        const double sigma = 4.0;
        const auto fs = monodromy(Af, sigma, cfg);
        // quadrature of the trace (Simpson)
        const int n = 2000;
        double tr = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = sigma * i / n;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            tr += w * Af(t).trace();
        }
        tr *= sigma / (3.0 * n);
        CHECK(fs.monodromy.determinant() > 0.0);
        CHECK(fs.monodromy.determinant() == Catch::Approx(std::exp(tr)).epsilon(1e-6));
    }
    SECTION("trivial IR solution: numeric multipliers match the closed forms") {
        IrParams p = kP;
        p.nu = 2.5e-4;
        const double alpha = 1.05 * (p.gamma + p.mu) * p.nu;
        const auto f = forcing52(alpha, 0.4 * alpha);
        const auto mult = trivial_multipliers_numeric(p, f, StepperConfig{0.05, 1e-13, 25});
        const double sigma = f.sigma();
        const double m1 = std::exp(sigma * (alpha / p.nu - p.gamma - p.mu));
        const double m2 = std::exp(-sigma * (p.mu + p.kappa));
        CHECK(mult[0] == Catch::Approx(m1).epsilon(1e-6));
        CHECK(mult[1] == Catch::Approx(m2).epsilon(1e-6));
    }
}
