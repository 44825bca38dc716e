#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "floqfit/floquet.hpp"

using namespace floqfit;

namespace {

IrParams params_with_nu(double nu) { return {1e7, 1.0 / 3120.0, 0.25, 1.0 / 36.0, nu}; }

/// alpha chosen so that R0 hits the requested value.
double alpha_for(const IrParams& p, double r0) { return r0 * (p.gamma + p.mu) * p.nu; }

SeasonalForcing yearly(double alpha, double delta) {
    return SeasonalForcing(alpha, {{delta, Rational(1, 52)}});
}

} // namespace

TEST_CASE("existence_check lattice logic") {
    const double sigma = 52.0;
    SECTION("real nonzero eigenvalues pass") {
        Eigen::Matrix2d J;
        J << -0.3, 0.0, 0.25, -0.028;
        CHECK(existence_check(J, sigma));
    }
    SECTION("eigenvalue exactly on the lattice fails") {
        const double w = 2.0 * std::numbers::pi / sigma;
        Eigen::Matrix2d J;
        J << 0.0, -w, w, 0.0; // eigenvalues +- i w
        CHECK_FALSE(existence_check(J, sigma));
        Eigen::Matrix2d Z = Eigen::Matrix2d::Zero(); // zero is the k = 0 lattice point
        CHECK_FALSE(existence_check(Z, sigma));
    }
    SECTION("DFE and EE Jacobians of the IR system pass") {
        const IrParams p = params_with_nu(2.5e-4);
        const double alpha = alpha_for(p, 1.4);
        const auto f = SeasonalForcing::constant(alpha);
        CHECK(existence_check(ir_jacobian(p, f, 0.0, Eigen::Vector2d::Zero()), sigma));
        const auto eq = equilibria(p, alpha);
        REQUIRE(eq.ee.has_value());
        CHECK(existence_check(ir_jacobian(p, f, 0.0, Eigen::Vector2d(eq.ee->I, eq.ee->R)), sigma));
    }
}

TEST_CASE("trivial_stability closed forms") {
    const IrParams p = params_with_nu(2.5e-4);
    SECTION("R0 = 0.5 dies out, both multipliers below 1") {
        const auto f = yearly(alpha_for(p, 0.5), 0.2 * alpha_for(p, 0.5));
        const auto [cls, mult] = trivial_stability(p, f);
        CHECK(cls == StabilityClass::DiesOut);
        CHECK(mult[0] < 1.0);
        CHECK(mult[1] < 1.0);
    }
    SECTION("R0 = 2 has an unstable multiplier") {
        const auto f = yearly(alpha_for(p, 2.0), 0.0);
        const auto [cls, mult] = trivial_stability(p, f);
        CHECK(cls == StabilityClass::Inconclusive);
        CHECK(mult[0] > 1.0);
    }
    SECTION("closed form agrees with numeric monodromy to 1e-6") {
        const double alpha = alpha_for(p, 1.1);
        const auto f = yearly(alpha, 0.3 * alpha);
        const auto numeric = trivial_multipliers_numeric(p, f, StepperConfig{0.05, 1e-13, 25});
        const auto [cls, closed] = trivial_stability(p, f);
        CHECK(numeric[0] == Catch::Approx(std::max(closed[0], closed[1])).epsilon(1e-6));
        CHECK(numeric[1] == Catch::Approx(std::min(closed[0], closed[1])).epsilon(1e-6));
    }
}

TEST_CASE("trace_orbit") {
    const IrParams p = params_with_nu(2.5e-4);
    const double alpha = alpha_for(p, 1.05);
    SECTION("zero amplitude: the orbit is the EE itself") {
        const auto f = yearly(alpha, 0.0);
        const auto eq = equilibria(p, alpha);
        REQUIRE(eq.ee.has_value());
        const Eigen::Vector2d x0(eq.ee->I, eq.ee->R);
        const auto orbit = trace_orbit(p, f, x0, 10.0 * f.sigma(), StepperConfig{0.25, 1e-12, 25});
        CHECK(orbit.closure_residual <= 1e-10);
        for (const auto& s : orbit.states) {
            CHECK(s[0] == Catch::Approx(eq.ee->I).epsilon(1e-6));
            CHECK(s[1] == Catch::Approx(eq.ee->R).epsilon(1e-6));
        }
    }
    SECTION("forced orbit closes and repeats beyond the traced period") {
        const auto f = yearly(alpha, 0.3 * alpha);
        const auto eq = equilibria(p, alpha);
        const Eigen::Vector2d x0(eq.ee->I, eq.ee->R);
        const StepperConfig cfg{0.25, 1e-12, 25};
        const auto orbit = trace_orbit(p, f, x0, 50.0 * f.sigma(), cfg);
        CHECK(orbit.closure_residual <= 1e-4);
        CHECK(orbit.min_I() > 0.0);
        // verification period: the next period retraces the orbit to 1e-3 of
        // its amplitude
        auto rhs = [&](double t, const Eigen::Vector2d& x) { return ir_rhs(p, f, t, x); };
        auto jac = [&](double t, const Eigen::Vector2d& x) { return ir_jacobian(p, f, t, x); };
        double amp = 0.0;
        for (const auto& s : orbit.states) amp = std::max(amp, s.norm());
        const auto traj = integrate(rhs, jac, 0.0, f.sigma(), orbit.states.front(), cfg);
        for (std::size_t i = 0; i < orbit.states.size(); i += 16)
            CHECK((traj.states[i] - orbit.states[i]).norm() <= 1e-3 * amp);
    }
    SECTION("preconditions") {
        const auto f = yearly(alpha_for(p, 0.8), 0.0);
        CHECK_THROWS_AS(trace_orbit(p, f, Eigen::Vector2d(10, 10), 10 * f.sigma(),
                                    StepperConfig{0.25, 1e-12, 25}),
                        DataError);
        const auto f2 = yearly(alpha, 0.1 * alpha);
        CHECK_THROWS_AS(trace_orbit(p, f2, Eigen::Vector2d(10, 10), 5 * f2.sigma(),
                                    StepperConfig{0.25, 1e-12, 25}),
                        DataError);
    }
}

TEST_CASE("phi_profile and r_max") {
    const IrParams p = params_with_nu(0.3);
    SECTION("trivial orbit: Phi is identically 1, so R_max = R0") {
        PeriodicOrbit o;
        o.sigma = 52.0;
        for (int i = 0; i <= 10; ++i) {
            o.times.push_back(5.2 * i);
            o.states.push_back(Eigen::Vector2d::Zero());
        }
        const auto prof = phi_profile(o, p);
        for (const auto& [t, v] : prof) CHECK(v == Catch::Approx(1.0).epsilon(1e-14));
        CHECK(r_max(1.3, prof) == Catch::Approx(1.3).epsilon(1e-12));
    }
    SECTION("hand substitution at phi1 = nu N, phi2 = 0") {
        const double expect = -p.nu / 2.0 + (1.0 - p.nu) / 4.0;
        CHECK(phi_value(p, Eigen::Vector2d(p.nu * p.N, 0.0)) ==
              Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("nontrivial positive orbit keeps max Phi below 1") {
        const IrParams q = params_with_nu(2.5e-4);
        const double alpha = alpha_for(q, 1.1);
        const auto f = yearly(alpha, 0.4 * alpha);
        const auto eq = equilibria(q, alpha);
        const auto orbit = trace_orbit(q, f, Eigen::Vector2d(eq.ee->I, eq.ee->R), 20 * f.sigma(),
                                       StepperConfig{0.25, 1e-12, 25});
        const auto prof = phi_profile(orbit, q);
        double phimax = 0.0;
        for (const auto& [t, v] : prof) phimax = std::max(phimax, v);
        CHECK(phimax < 1.0);
        const double rm = r_max(basic_reproduction_number(q, alpha), prof);
        CHECK(rm < basic_reproduction_number(q, alpha)); // R_max < R0, always
    }
}

TEST_CASE("classification table") {
    CHECK(classify(0.99549, std::nullopt) == StabilityClass::DiesOut);
    CHECK(classify(1.00937, 0.99891) == StabilityClass::StableEndemicCycle);
    CHECK(classify(1.5, 1.2) == StabilityClass::Inconclusive);
    CHECK(classify(0.5, 0.4) == StabilityClass::DiesOut); // r0 < 1 wins regardless
    CHECK(classify(1.0, std::nullopt) == StabilityClass::Inconclusive);
}

TEST_CASE("stability_report end to end on a small system") {
    const IrParams p = params_with_nu(2.5e-4);
    SECTION("endemic cycle") {
        const double alpha = alpha_for(p, 1.2);
        const auto f = yearly(alpha, 0.2 * alpha);
        StabilityOptions o;
        o.transient_periods = 50.0;
        const auto rep = stability_report(p, f, o);
        CHECK(rep.r0 == Catch::Approx(1.2).epsilon(1e-12));
        REQUIRE(rep.r_max.has_value());
        CHECK(*rep.r_max < rep.r0);
        REQUIRE(rep.orbit.has_value());
        CHECK(rep.orbit->closure_residual <= 1e-4);
        if (*rep.r_max < 1.0) CHECK(rep.classification == StabilityClass::StableEndemicCycle);
    }
    SECTION("subcritical") {
        const auto f = yearly(alpha_for(p, 0.7), 0.1 * alpha_for(p, 0.7));
        const auto rep = stability_report(p, f);
        CHECK(rep.classification == StabilityClass::DiesOut);
        CHECK_FALSE(rep.r_max.has_value());
        CHECK(rep.trivial_multipliers[0] < 1.0);
    }
}
