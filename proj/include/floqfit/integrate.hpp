#ifndef FLOQFIT_INTEGRATE_HPP
#define FLOQFIT_INTEGRATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "floqfit/errors.hpp"

namespace floqfit {

struct StepperConfig {
    double h = 0.25;            // step size, weeks
    double newton_tol = 1e-12;  // stage-equation residual tolerance (max norm, relative to stage scale)
    int newton_max_iter = 25;

    void check() const {
        if (!(h > 0.0)) throw DataError("step size must be positive");
        if (!(newton_tol > 0.0 && newton_tol <= 1e-2)) throw DataError("newton_tol must lie in (0, 1e-2]");
        if (newton_max_iter < 1) throw DataError("newton_max_iter must be >= 1");
    }
};

template <class Vec>
struct TrajectoryT {
    std::vector<double> times;
    std::vector<Vec> states;

    std::size_t size() const { return times.size(); }
};

using Trajectory = TrajectoryT<Eigen::VectorXd>;

/// Z(sigma) for Z' = A(t) Z, Z(0) = I; its eigenvalues are the Floquet
/// multipliers of the periodic linear system.
struct FundamentalSolution {
    Eigen::MatrixXd monodromy;
    double sigma = 0.0;
};

namespace gl2 {
// 2-stage Gauss-Legendre tableau (order 4, A-stable, symmetric).
inline constexpr double s3o6 = 0.28867513459481288225; // sqrt(3)/6
inline constexpr double c1 = 0.5 - s3o6;
inline constexpr double c2 = 0.5 + s3o6;
inline constexpr double a11 = 0.25;
inline constexpr double a12 = 0.25 - s3o6;
inline constexpr double a21 = 0.25 + s3o6;
inline constexpr double a22 = 0.25;
inline constexpr double b1 = 0.5;
inline constexpr double b2 = 0.5;
} // namespace gl2

/// Central-difference Jacobian for vector fields without an analytic one.
template <class Rhs>
struct NumericalJacobian {
    Rhs rhs;

    template <class Vec>
    auto operator()(double t, const Vec& x) const {
        constexpr int N = Vec::SizeAtCompileTime;
        using Mat = Eigen::Matrix<double, N, N>;
        const auto n = x.size();
        Mat J(n, n);
        Vec xp = x, xm = x;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double eps = 1e-6 * (1.0 + std::abs(x[j]));
            xp[j] = x[j] + eps;
            xm[j] = x[j] - eps;
            J.col(j) = (rhs(t, xp) - rhs(t, xm)) / (2.0 * eps);
            xp[j] = x[j];
            xm[j] = x[j];
        }
        return J;
    }
};

template <class Rhs>
NumericalJacobian(Rhs) -> NumericalJacobian<Rhs>;

/// One step of the 2-stage Gauss-Legendre implicit Runge-Kutta method.
/// Stage derivatives are solved by a full Newton iteration on the coupled
/// 2n-dimensional stage system; h may be negative (the method is symmetric).
template <class Rhs, class Jac, class Vec>
Vec gl2_step(Rhs&& rhs, Jac&& jac, double t, const Vec& x, double h, const StepperConfig& cfg) {
    using namespace gl2;
    constexpr int N = Vec::SizeAtCompileTime;
    constexpr int N2 = (N == Eigen::Dynamic) ? Eigen::Dynamic : 2 * N;
    using Mat2 = Eigen::Matrix<double, N2, N2>;
    using Vec2 = Eigen::Matrix<double, N2, 1>;

    const auto n = x.size();
    const double t1 = t + c1 * h, t2 = t + c2 * h;

    // explicit-Euler predictor for both stages
    Vec k1 = rhs(t, x);
    Vec k2 = k1;

    Mat2 M(2 * n, 2 * n);
    Vec2 g(2 * n);
    Vec y1 = x, y2 = x;

    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        y1 = x + h * (a11 * k1 + a12 * k2);
        y2 = x + h * (a21 * k1 + a22 * k2);
        const Vec f1 = rhs(t1, y1);
        const Vec f2 = rhs(t2, y2);
        g.head(n) = k1 - f1;
        g.tail(n) = k2 - f2;

        const double scale = 1.0 + std::max(k1.template lpNorm<Eigen::Infinity>(),
                                            k2.template lpNorm<Eigen::Infinity>());
        if (g.template lpNorm<Eigen::Infinity>() <= cfg.newton_tol * scale)
            return x + h * (b1 * k1 + b2 * k2);

        const auto J1 = jac(t1, y1);
        const auto J2 = jac(t2, y2);
        M.setIdentity(2 * n, 2 * n);
        M.topLeftCorner(n, n) -= h * a11 * J1;
        M.topRightCorner(n, n) = -h * a12 * J1;
        M.bottomLeftCorner(n, n) = -h * a21 * J2;
        M.bottomRightCorner(n, n) -= h * a22 * J2;

        const Vec2 dk = M.partialPivLu().solve(-g);
        k1 += dk.head(n);
        k2 += dk.tail(n);
        if (!k1.allFinite() || !k2.allFinite()) break;
        // very stiff fields reach a residual floor set by cancellation in the
        // stage states; a negligible correction is just as conclusive
        if (dk.template lpNorm<Eigen::Infinity>() <= cfg.newton_tol * scale)
            return x + h * (b1 * k1 + b2 * k2);
    }
    throw NumericError("Gauss-Legendre stage Newton iteration did not converge at t = " +
                       std::to_string(t) + " (step too large or problem too stiff)");
}

/// Fixed-step integration from t0 to tf > t0; the final step is shortened to
/// land exactly on tf.
template <class Rhs, class Jac, class Vec>
TrajectoryT<Vec> integrate(Rhs&& rhs, Jac&& jac, double t0, double tf, const Vec& x0,
                           const StepperConfig& cfg) {
    cfg.check();
    if (tf < t0) throw DataError("integrate needs tf >= t0");
    TrajectoryT<Vec> traj;
    if (tf == t0) {
        traj.times.push_back(t0);
        traj.states.push_back(x0);
        return traj;
    }
    const double span = tf - t0;
    const double steps_d = span / cfg.h;
    if (steps_d > 4.0e9) throw DataError("integration span requires too many steps");
    auto n_full = static_cast<long long>(std::floor(steps_d * (1.0 + 1e-14)));
    const double tail = span - static_cast<double>(n_full) * cfg.h;
    const bool partial = tail > 1e-12 * std::max(1.0, std::abs(tf));

    traj.times.reserve(static_cast<std::size_t>(n_full) + 2);
    traj.states.reserve(static_cast<std::size_t>(n_full) + 2);
    traj.times.push_back(t0);
    traj.states.push_back(x0);
    Vec x = x0;
    for (long long k = 0; k < n_full; ++k) {
        const double t = t0 + static_cast<double>(k) * cfg.h;
        x = gl2_step(rhs, jac, t, x, cfg.h, cfg);
        traj.times.push_back(t + cfg.h);
        traj.states.push_back(x);
    }
    if (partial) {
        x = gl2_step(rhs, jac, traj.times.back(), x, tf - traj.times.back(), cfg);
        traj.times.push_back(tf);
        traj.states.push_back(x);
    }
    return traj;
}

/// Monodromy matrix of z' = A(t) z over one period, integrated column by
/// column; the stage equations are linear, so Newton terminates immediately.
template <class MatFn>
FundamentalSolution monodromy(MatFn&& A, double sigma, const StepperConfig& cfg) {
    if (!(sigma > 0.0)) throw DataError("monodromy needs sigma > 0");
    const Eigen::MatrixXd A0 = A(0.0);
    const auto d = A0.rows();
    if (A0.cols() != d) throw DataError("monodromy needs a square system matrix");

    auto rhs = [&A](double t, const Eigen::VectorXd& z) -> Eigen::VectorXd { return A(t) * z; };
    auto jac = [&A](double t, const Eigen::VectorXd&) -> Eigen::MatrixXd { return A(t); };

    FundamentalSolution out;
    out.sigma = sigma;
    out.monodromy.resize(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
        z[j] = 1.0;
        const auto traj = integrate(rhs, jac, 0.0, sigma, z, cfg);
        out.monodromy.col(j) = traj.states.back();
    }
    return out;
}

inline std::string trajectory_to_csv(const Trajectory& traj, const std::vector<std::string>& names,
                                     const std::string& meta = {}) {
    std::string out;
    if (!meta.empty()) out += "# " + meta + "\n";
    out += "t";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    char buf[40];
    for (std::size_t i = 0; i < traj.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times[i]);
        out += buf;
        for (Eigen::Index j = 0; j < traj.states[i].size(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", traj.states[i][j]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

} // namespace floqfit

#endif
