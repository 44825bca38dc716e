#ifndef FLOQFIT_MODEL_HPP
#define FLOQFIT_MODEL_HPP

#include <Eigen/Dense>
#include <optional>

#include "floqfit/errors.hpp"
#include "floqfit/forcing.hpp"

namespace floqfit {

/// Demographic/epidemiological constants of the reduced host model.
/// All rates are per week; nu = theta/rho is the mosquito-to-host abundance
/// ratio inherited from the full host-vector model.
struct IrParams {
    double N = 1e7;        // total human population
    double mu = 1.0 / 3120.0;  // human death rate
    double gamma = 0.25;   // recovery rate
    double kappa = 1.0 / 36.0; // loss-of-immunity rate
    double nu = 0.5;       // theta / rho, dimensionless

    void check() const {
        if (!(N > 0 && mu > 0 && gamma > 0 && kappa > 0 && nu > 0))
            throw DataError("all IR parameters must be strictly positive");
    }
};

/// Full host-vector parameter set; nu is derived, not stored.
struct SiruvParams {
    double N = 1e7;
    double mu = 1.0 / 3120.0;
    double gamma = 0.25;
    double kappa = 1.0 / 36.0;
    double Lambda = 1e6; // mosquito recruitment, per week
    double rho = 1.0;    // mosquito infection rate
    double theta = 0.5;  // mosquito death rate

    double nu() const { return theta / rho; }

    void check() const {
        if (!(N > 0 && mu > 0 && gamma > 0 && kappa > 0 && Lambda > 0 && rho > 0 && theta > 0))
            throw DataError("all SIRUV parameters must be strictly positive");
    }

    IrParams reduced() const { return {N, mu, gamma, kappa, nu()}; }
};

struct HumanState {
    double I = 0.0;
    double R = 0.0;
};

struct SiruvState {
    double S = 0.0, I = 0.0, R = 0.0, U = 0.0, V = 0.0;
};

struct Equilibria {
    HumanState dfe{0.0, 0.0};
    std::optional<HumanState> ee;
};

inline double basic_reproduction_number(double alpha, double gamma, double mu, double nu) {
    if (!(gamma + mu > 0.0) || !(nu > 0.0))
        throw DataError("basic_reproduction_number needs gamma+mu > 0 and nu > 0");
    return alpha / ((gamma + mu) * nu);
}

inline double basic_reproduction_number(const IrParams& p, double alpha) {
    return basic_reproduction_number(alpha, p.gamma, p.mu, p.nu);
}

/// Right-hand side of the reduced IR system:
///   I' = beta(t) (N - I - R) I / (I + nu N) - (gamma + mu) I
///   R' = gamma I - (mu + kappa) R
inline Eigen::Vector2d ir_rhs(const IrParams& p, const SeasonalForcing& f, double t,
                              const Eigen::Vector2d& x) {
    const double I = x[0], R = x[1];
    const double beta = f(t);
    const double denom = I + p.nu * p.N;
    Eigen::Vector2d d;
    d[0] = beta * (p.N - I - R) * I / denom - (p.gamma + p.mu) * I;
    d[1] = p.gamma * I - (p.mu + p.kappa) * R;
    return d;
}

/// Jacobian of ir_rhs with respect to (I, R).
inline Eigen::Matrix2d ir_jacobian(const IrParams& p, const SeasonalForcing& f, double t,
                                   const Eigen::Vector2d& x) {
    const double I = x[0], R = x[1];
    const double beta = f(t);
    const double denom = I + p.nu * p.N;
    const double sat = I / denom; // infection saturation I/(I + nu N)
    Eigen::Matrix2d J;
    J(0, 0) = beta * ((p.N - I - R) / denom * (1.0 - sat) - sat) - (p.gamma + p.mu);
    J(0, 1) = -beta * sat;
    J(1, 0) = p.gamma;
    J(1, 1) = -(p.mu + p.kappa);
    return J;
}

/// The five SIRUV derivatives; human compartments sum to zero by construction.
inline Eigen::Matrix<double, 5, 1> siruv_rhs(const SiruvParams& p, const SeasonalForcing& f,
                                             double t, const Eigen::Matrix<double, 5, 1>& x) {
    const double S = x[0], I = x[1], R = x[2], U = x[3], V = x[4];
    const double beta = f(t);
    const double M = U + V;
    const double infection = M > 0.0 ? beta / M * S * V : 0.0;
    Eigen::Matrix<double, 5, 1> d;
    d[0] = p.mu * (p.N - S) - infection + p.kappa * R;
    d[1] = infection - (p.gamma + p.mu) * I;
    d[2] = p.gamma * I - (p.mu + p.kappa) * R;
    d[3] = p.Lambda - p.rho / p.N * U * I - p.theta * U;
    d[4] = p.rho / p.N * U * I - p.theta * V;
    return d;
}

/// Quasi-steady-state mosquito compartments conditioned on I.
inline std::pair<double, double> qssa_vector(const SiruvParams& p, double I) {
    if (I < 0.0) throw DataError("qssa_vector needs I >= 0");
    const double denom = p.theta * p.N + p.rho * I;
    const double U = p.Lambda * p.N / denom;
    const double V = p.rho * p.Lambda * I / (p.theta * denom);
    return {U, V};
}

/// DFE is always (0,0); the endemic equilibrium exists iff R0 > 1 and takes
/// the closed form
///   EE_I = N (mu+kappa)(gamma+mu) nu (R0 - 1) / ((alpha+mu)(gamma+mu+kappa) + gamma kappa)
///   EE_R = N gamma      (gamma+mu) nu (R0 - 1) / (same denominator)
inline Equilibria equilibria(const IrParams& p, double alpha) {
    p.check();
    Equilibria eq;
    const double r0 = basic_reproduction_number(p, alpha);
    if (r0 > 1.0) {
        const double denom = (alpha + p.mu) * (p.gamma + p.mu + p.kappa) + p.gamma * p.kappa;
        const double common = p.N * (p.gamma + p.mu) * p.nu * (r0 - 1.0) / denom;
        eq.ee = HumanState{(p.mu + p.kappa) * common, p.gamma * common};
    }
    return eq;
}

} // namespace floqfit

#endif
