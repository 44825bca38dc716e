#ifndef FLOQFIT_FLOQUET_HPP
#define FLOQFIT_FLOQUET_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "floqfit/integrate.hpp"
#include "floqfit/model.hpp"

namespace floqfit {

enum class StabilityClass { DiesOut, StableEndemicCycle, Inconclusive };

inline const char* to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::DiesOut: return "DiesOut";
        case StabilityClass::StableEndemicCycle: return "StableEndemicCycle";
        default: return "Inconclusive";
    }
}

/// One traced period of the forced system, accepted when the endpoints agree
/// to closure_residual <= 1e-4 (relative 2-norm).
struct PeriodicOrbit {
    double sigma = 0.0;
    std::vector<double> times; // 0..sigma, tracer grid
    std::vector<Eigen::Vector2d> states;
    double closure_residual = 0.0;

    double min_I() const {
        double v = states.front()[0];
        for (const auto& s : states) v = std::min(v, s[0]);
        return v;
    }
    double max_I() const {
        double v = states.front()[0];
        for (const auto& s : states) v = std::max(v, s[0]);
        return v;
    }
};

struct StabilityReport {
    double r0 = 0.0;
    std::optional<double> r_max;
    std::array<double, 2> trivial_multipliers{0.0, 0.0};
    std::array<double, 2> trivial_exponents{0.0, 0.0}; // safe even when exp overflows
    StabilityClass classification = StabilityClass::Inconclusive;
    std::optional<PeriodicOrbit> orbit;
};

/// Existence test of Theorem-1 type: the autonomous Jacobian may not have an
/// eigenvalue on the lattice (2 pi / sigma) i Z. The tolerance scales with
/// the eigenvalue magnitude.
inline bool existence_check(const Eigen::Matrix2d& jacobian, double sigma, double tol = 1e-9) {
    if (!(sigma > 0.0)) throw DataError("existence_check needs sigma > 0");
    const Eigen::EigenSolver<Eigen::Matrix2d> es(jacobian);
    const double spacing = 2.0 * std::numbers::pi / sigma;
    for (int i = 0; i < 2; ++i) {
        const std::complex<double> lam = es.eigenvalues()[i];
        const double tol_eff = tol * std::max(1.0, std::abs(lam));
        if (std::abs(lam.real()) > tol_eff) continue;
        const double k = std::round(lam.imag() / spacing);
        if (std::abs(lam.imag() - k * spacing) <= tol_eff) return false;
    }
    return true;
}

/// Closed-form Floquet data of the trivial solution: exponents are the
/// eigenvalues of the averaged system matrix (the periodic part drops out
/// because its antiderivative vanishes over a period), multipliers their
/// exponentials over one period.
inline std::pair<StabilityClass, std::array<double, 2>>
trivial_stability(const IrParams& p, const SeasonalForcing& f) {
    p.check();
    const double e1 = f.alpha() / p.nu - p.gamma - p.mu;
    const double e2 = -(p.mu + p.kappa);
    const std::array<double, 2> mult{std::exp(f.sigma() * e1), std::exp(f.sigma() * e2)};
    const double r0 = basic_reproduction_number(p, f.alpha());
    return {r0 < 1.0 ? StabilityClass::DiesOut : StabilityClass::Inconclusive, mult};
}

/// Floquet multipliers of the variational system along the trivial solution,
/// computed by numeric monodromy; used to cross-validate the closed forms.
inline std::array<double, 2> trivial_multipliers_numeric(const IrParams& p,
                                                         const SeasonalForcing& f,
                                                         const StepperConfig& cfg) {
    auto A = [&](double t) -> Eigen::MatrixXd {
        return ir_jacobian(p, f, t, Eigen::Vector2d::Zero());
    };
    const FundamentalSolution fs = monodromy(A, f.sigma(), cfg);
    const Eigen::EigenSolver<Eigen::MatrixXd> es(fs.monodromy);
    std::array<double, 2> out{std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[1])};
    if (out[0] < out[1]) std::swap(out[0], out[1]);
    return out;
}

namespace detail {

/// Integrates without storing the trajectory.
inline Eigen::Vector2d advance(const IrParams& p, const SeasonalForcing& f, double t0, double tf,
                               Eigen::Vector2d x, const StepperConfig& cfg) {
    auto rhs = [&](double t, const Eigen::Vector2d& s) { return ir_rhs(p, f, t, s); };
    auto jac = [&](double t, const Eigen::Vector2d& s) { return ir_jacobian(p, f, t, s); };
    const double span = tf - t0;
    const auto n_full = static_cast<long long>(std::floor(span / cfg.h * (1.0 + 1e-14)));
    for (long long k = 0; k < n_full; ++k)
        x = gl2_step(rhs, jac, t0 + static_cast<double>(k) * cfg.h, x, cfg.h, cfg);
    const double t_done = t0 + static_cast<double>(n_full) * cfg.h;
    if (tf - t_done > 1e-12 * std::max(1.0, std::abs(tf)))
        x = gl2_step(rhs, jac, t_done, x, tf - t_done, cfg);
    return x;
}

} // namespace detail

/// Traces the attracting periodic orbit: integrate past a transient (>= 10
/// periods), then record one period and check closure. The transient doubles
/// up to 3 times when the orbit has not closed to 1e-4.
inline PeriodicOrbit trace_orbit(const IrParams& p, const SeasonalForcing& f,
                                 const Eigen::Vector2d& x_init, double transient,
                                 const StepperConfig& cfg) {
    p.check();
    cfg.check();
    const double sigma = f.sigma();
    const double r0 = basic_reproduction_number(p, f.alpha());
    if (!(r0 > 1.0)) throw DataError("trace_orbit needs R0 > 1 (no orbit near EE otherwise)");
    if (!(transient >= 10.0 * sigma)) throw DataError("trace_orbit needs transient >= 10 sigma");

    auto rhs = [&](double t, const Eigen::Vector2d& s) { return ir_rhs(p, f, t, s); };
    auto jac = [&](double t, const Eigen::Vector2d& s) { return ir_jacobian(p, f, t, s); };

    double tr = transient;
    double residual = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt, tr *= 2.0) {
        // re-anchor the phase: start the recorded period at t = 0 mod sigma
        const double t_start = std::ceil(tr / sigma) * sigma;
        Eigen::Vector2d x = detail::advance(p, f, 0.0, t_start, x_init, cfg);

        PeriodicOrbit orbit;
        orbit.sigma = sigma;
        const auto n_steps = static_cast<long long>(std::ceil(sigma / cfg.h - 1e-12));
        orbit.times.reserve(static_cast<std::size_t>(n_steps) + 1);
        orbit.states.reserve(static_cast<std::size_t>(n_steps) + 1);
        orbit.times.push_back(0.0);
        orbit.states.push_back(x);
        Eigen::Vector2d y = x;
        for (long long k = 0; k < n_steps; ++k) {
            const double t = static_cast<double>(k) * cfg.h;
            const double h = std::min(cfg.h, sigma - t);
            y = gl2_step([&](double tt, const Eigen::Vector2d& s) { return rhs(t_start + tt, s); },
                         [&](double tt, const Eigen::Vector2d& s) { return jac(t_start + tt, s); },
                         t, y, h, cfg);
            orbit.times.push_back(std::min(t + h, sigma));
            orbit.states.push_back(y);
        }
        residual = (orbit.states.back() - orbit.states.front()).norm() /
                   std::max(orbit.states.front().norm(), 1e-300);
        orbit.closure_residual = residual;
        if (residual <= 1e-4) return orbit;
    }
    throw NumericError("NoConvergenceToOrbit: closure residual " + std::to_string(residual) +
                       " after transient doubling");
}

/// Phi(t) of Theorem-4 type, evaluated on the traced orbit:
///   Phi = -nu phi1/(phi1 + nu N)
///         + nu (N - phi1 - phi2)/(phi1 + nu N) (1 - phi1/(phi1 + nu N)).
/// Phi == 1 exactly when the orbit is trivial, so R_max < R0 on any
/// nontrivial orbit.
inline double phi_value(const IrParams& p, const Eigen::Vector2d& x) {
    const double denom = x[0] + p.nu * p.N;
    const double sat = x[0] / denom;
    return -p.nu * sat + p.nu * (p.N - x[0] - x[1]) / denom * (1.0 - sat);
}

inline std::vector<std::pair<double, double>> phi_profile(const PeriodicOrbit& orbit,
                                                          const IrParams& p) {
    if (orbit.states.empty()) throw DataError("phi_profile needs a traced orbit");
    std::vector<std::pair<double, double>> out;
    out.reserve(orbit.states.size());
    for (std::size_t i = 0; i < orbit.states.size(); ++i)
        out.emplace_back(orbit.times[i], phi_value(p, orbit.states[i]));
    return out;
}

/// R_max = R0 * max Phi over one period; the sampled argmax is refined with
/// a 3-point parabolic fit.
inline double r_max(double r0, const std::vector<std::pair<double, double>>& phi) {
    if (phi.empty()) throw DataError("r_max needs a nonempty profile");
    std::size_t best = 0;
    for (std::size_t i = 1; i < phi.size(); ++i)
        if (phi[i].second > phi[best].second) best = i;
    double peak = phi[best].second;
    if (best > 0 && best + 1 < phi.size()) {
        const double ym = phi[best - 1].second, y0 = phi[best].second, yp = phi[best + 1].second;
        const double curv = ym - 2.0 * y0 + yp;
        if (curv < 0.0) {
            const double slope = 0.5 * (yp - ym);
            peak = y0 - slope * slope / (2.0 * curv);
        }
    }
    return r0 * peak;
}

/// Theorem-4 sufficient conditions only: below 1 the trivial solution
/// attracts; above 1 with R_max < 1 the nontrivial orbit attracts; anything
/// else stays inconclusive.
inline StabilityClass classify(double r0, std::optional<double> rmax) {
    if (r0 < 1.0) return StabilityClass::DiesOut;
    if (r0 > 1.0 && rmax.has_value() && *rmax < 1.0) return StabilityClass::StableEndemicCycle;
    return StabilityClass::Inconclusive;
}

struct StabilityOptions {
    StepperConfig stepper{0.25, 1e-12, 25};
    double transient_periods = 50.0; // transient = this * sigma
    bool keep_orbit = true;
};

/// Full report: closed-form trivial data always; orbit trace and R_max when
/// R0 > 1 and the trace closes.
inline StabilityReport stability_report(const IrParams& p, const SeasonalForcing& f,
                                        const StabilityOptions& opts = {}) {
    p.check();
    StabilityReport rep;
    rep.r0 = basic_reproduction_number(p, f.alpha());
    rep.trivial_exponents = {f.alpha() / p.nu - p.gamma - p.mu, -(p.mu + p.kappa)};
    auto [cls, mult] = trivial_stability(p, f);
    rep.trivial_multipliers = mult;
    rep.classification = cls;
    if (rep.r0 > 1.0) {
        const Equilibria eq = equilibria(p, f.alpha());
        const Eigen::Vector2d x0(eq.ee->I, eq.ee->R);
        PeriodicOrbit orbit =
            trace_orbit(p, f, x0, opts.transient_periods * f.sigma(), opts.stepper);
        rep.r_max = r_max(rep.r0, phi_profile(orbit, p));
        rep.classification = classify(rep.r0, rep.r_max);
        if (opts.keep_orbit) rep.orbit = std::move(orbit);
    }
    return rep;
}

} // namespace floqfit

#endif
