#ifndef FLOQFIT_NLP_HPP
#define FLOQFIT_NLP_HPP

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <vector>

#include "floqfit/errors.hpp"
#include "floqfit/qp.hpp"

namespace floqfit {

/// Linear inequality row: sum_i coeff_i z_i + offset >= 0.
struct LinearConstraint {
    std::vector<std::pair<int, double>> terms;
    double offset = 0.0;

    double eval(const Eigen::VectorXd& z) const {
        double v = offset;
        for (const auto& [i, c] : terms) v += c * z[i];
        return v;
    }

    void add_transposed(double mult, Eigen::VectorXd& out) const {
        for (const auto& [i, c] : terms) out[i] += c * mult;
    }

    double dot(const Eigen::VectorXd& p) const {
        double v = 0.0;
        for (const auto& [i, c] : terms) v += c * p[i];
        return v;
    }
};

/// Frozen linearization of the equality constraints at one iterate.
/// Implementations expose exactly the products the null-space SQP needs,
/// so structured problems (collocation) never materialize the Jacobian.
class EqLinearization {
public:
    virtual ~EqLinearization() = default;
    virtual bool ok() const = 0;
    /// Basis of the tangent space of the linearized constraints, n x d.
    virtual const Eigen::MatrixXd& nullspace() const = 0;
    /// A step p with J_E p = -c (nonbasic components zero / minimum norm).
    virtual Eigen::VectorXd particular(const Eigen::VectorXd& c) const = 0;
    /// J_E^T lambda.
    virtual Eigen::VectorXd apply_transposed(const Eigen::VectorXd& lambda) const = 0;
    /// lambda with J_E^T lambda ~= w (exact on the basic rows / least squares).
    virtual Eigen::VectorXd multipliers(const Eigen::VectorXd& w) const = 0;
};

class NlpProblem {
public:
    virtual ~NlpProblem() = default;
    virtual int dim() const = 0;
    virtual int eq_count() const = 0;
    virtual const std::vector<LinearConstraint>& inequalities() const = 0;
    virtual double objective(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const = 0;
    virtual void equality(const Eigen::VectorXd& z, Eigen::VectorXd& c) const = 0;
    virtual std::unique_ptr<EqLinearization> linearize(const Eigen::VectorXd& z) const = 0;
    /// Per-variable magnitudes used for the initial quasi-Newton matrix and
    /// the scaled stationarity test.
    virtual Eigen::VectorXd scales() const { return Eigen::VectorXd::Ones(dim()); }
};

/// Dense QR-based linearization for small generic problems.
class DenseEqLinearization final : public EqLinearization {
public:
    explicit DenseEqLinearization(Eigen::MatrixXd J) : J_(std::move(J)) {
        const auto n = J_.cols();
        const auto m = J_.rows();
        if (m == 0) {
            Z_ = Eigen::MatrixXd::Identity(n, n);
            full_rank_ = true;
            return;
        }
        qrT_.compute(J_.transpose());
        const auto rank = qrT_.rank();
        full_rank_ = (rank == m);
        Eigen::MatrixXd Q = qrT_.householderQ();
        Z_ = Q.rightCols(n - rank);
        cod_.compute(J_);
    }

    bool ok() const override { return full_rank_; }
    const Eigen::MatrixXd& nullspace() const override { return Z_; }

    Eigen::VectorXd particular(const Eigen::VectorXd& c) const override {
        if (J_.rows() == 0) return Eigen::VectorXd::Zero(J_.cols());
        return cod_.solve(-c);
    }

    Eigen::VectorXd apply_transposed(const Eigen::VectorXd& lambda) const override {
        if (J_.rows() == 0) return Eigen::VectorXd::Zero(J_.cols());
        return J_.transpose() * lambda;
    }

    Eigen::VectorXd multipliers(const Eigen::VectorXd& w) const override {
        if (J_.rows() == 0) return Eigen::VectorXd();
        return qrT_.solve(w);
    }

private:
    Eigen::MatrixXd J_;
    Eigen::MatrixXd Z_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrT_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
    bool full_rank_ = false;
};

enum class SolveStatus { Converged, MaxIter, LineSearchFail, QpInfeasible };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "Converged";
        case SolveStatus::MaxIter: return "MaxIter";
        case SolveStatus::LineSearchFail: return "LineSearchFail";
        default: return "QpInfeasible";
    }
}

struct SqpOptions {
    double tol = 1e-8;        // KKT residual target (scaled)
    int max_iter = 300;
    double ls_eta = 1e-4;     // Armijo slope fraction
    double ls_tau = 0.5;      // backtracking factor
    int ls_max = 40;
};

struct SqpResult {
    Eigen::VectorXd z;
    Eigen::VectorXd eq_mult;
    Eigen::VectorXd ineq_mult;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::MaxIter;
};

/// Classic line-search SQP: damped-BFGS Lagrangian model, equality
/// null-space reduction, dual active-set QP on the reduced subproblem,
/// l1 merit with a multiplier-tracking penalty.
class SqpSolver {
public:
    explicit SqpSolver(const NlpProblem& problem, SqpOptions opts = {})
        : prob_(problem), opts_(opts) {}

    SqpResult solve(const Eigen::VectorXd& z0) const {
        const int n = prob_.dim();
        const int me = prob_.eq_count();
        const auto& ineq = prob_.inequalities();
        const int mi = static_cast<int>(ineq.size());
        const Eigen::VectorXd s = prob_.scales();

        SqpResult res;
        res.z = z0;
        res.eq_mult = Eigen::VectorXd::Zero(me);
        res.ineq_mult = Eigen::VectorXd::Zero(mi);

        Eigen::VectorXd z = z0;
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) B(i, i) = 1.0 / (s[i] * s[i]);

        Eigen::VectorXd grad(n), c(me), ci(mi);
        double f = prob_.objective(z, &grad);
        prob_.equality(z, c);
        for (int i = 0; i < mi; ++i) ci[i] = ineq[i].eval(z);

        std::unique_ptr<EqLinearization> lin = prob_.linearize(z);
        double penalty = 1.0;

        for (int iter = 0; iter < opts_.max_iter; ++iter) {
            res.iterations = iter;
            if (!lin->ok()) { res.status = SolveStatus::QpInfeasible; return finish(res, z, f, grad, c, ci, *lin, s); }

            // ----- QP subproblem in the equality null space -----
            // The raw basis mixes O(1) parameter entries with huge state
            // sensitivities, so columns are renormalized in the scaled metric
            // before the reduced QP is formed. When the full restoration step
            // leaves no room for the linear inequalities (long horizons
            // amplify linearized defects), the restoration is damped: aim
            // J_E p = -theta c instead.
            Eigen::MatrixXd Z = lin->nullspace();
            const int d = static_cast<int>(Z.cols());
            for (int j = 0; j < d; ++j) {
                const double nrm = (Z.col(j).cwiseQuotient(s)).norm();
                if (nrm > 0.0) Z.col(j) /= nrm;
            }
            const Eigen::VectorXd pY_full = me > 0 ? lin->particular(c) : Eigen::VectorXd::Zero(n);

            Eigen::VectorXd p;
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(mi);
            double theta = 1.0;
            if (d > 0) {
                const Eigen::MatrixXd BZ = B * Z;
                Eigen::MatrixXd Hr = Z.transpose() * BZ;
                Hr = 0.5 * (Hr + Hr.transpose());
                Eigen::MatrixXd Cr(mi, d);
                for (int i = 0; i < mi; ++i)
                    for (int j = 0; j < d; ++j) Cr(i, j) = ineq[i].dot(Z.col(j));

                bool solved = false;
                for (int attempt = 0; attempt < 8 && !solved; ++attempt) {
                    const Eigen::VectorXd pY = theta * pY_full;
                    const Eigen::VectorXd gr = Z.transpose() * (grad + B * pY);
                    Eigen::VectorXd cr(mi);
                    for (int i = 0; i < mi; ++i) cr[i] = ci[i] + ineq[i].dot(pY);
                    const QpResult qp = DenseQp::solve(Hr, gr, Eigen::MatrixXd(0, d),
                                                       Eigen::VectorXd(), Cr, cr);
                    if (qp.status == QpStatus::Solved) {
                        p = pY + Z * qp.x;
                        mu = qp.ineq_mult;
                        solved = true;
                    } else {
                        if (debug_enabled())
                            std::fprintf(stderr,
                                         "[sqp] iter %d qp attempt %d failed (status %d, theta "
                                         "%.3g, min ci %.3g, qp iters %d)\n",
                                         iter, attempt, static_cast<int>(qp.status), theta,
                                         mi > 0 ? ci.minCoeff() : 0.0, qp.iterations);
                        theta *= 0.25;
                    }
                }
                if (!solved) {
                    res.status = SolveStatus::QpInfeasible;
                    return finish(res, z, f, grad, c, ci, *lin, s);
                }
            } else {
                p = pY_full;
            }

            // Two multiplier estimates: the QP's own (with the B p term, used
            // to size the merit penalty) and the current-point least-squares
            // estimate (without it, used for the KKT test and the BFGS pair).
            // The latter keeps termination independent of quasi-Newton
            // conditioning.
            Eigen::VectorXd w = grad;
            for (int i = 0; i < mi; ++i) ineq[i].add_transposed(-mu[i], w);
            const Eigen::VectorXd lam = me > 0 ? lin->multipliers(w) : Eigen::VectorXd();
            w += B * p;
            const Eigen::VectorXd lam_qp = me > 0 ? lin->multipliers(w) : Eigen::VectorXd();

            // ----- convergence test -----
            const double kkt = kkt_residual(grad, c, ci, mu, lam, *lin, s, f);
            res.kkt_residual = kkt;
            if (kkt <= opts_.tol) {
                res.status = SolveStatus::Converged;
                res.z = z;
                res.objective = f;
                res.eq_mult = lam;
                res.ineq_mult = mu;
                return res;
            }

            // ----- l1 merit line search -----
            double mult_norm = 0.0;
            if (me > 0)
                mult_norm = std::max({mult_norm, lam.cwiseAbs().maxCoeff(),
                                      lam_qp.cwiseAbs().maxCoeff()});
            if (mi > 0) mult_norm = std::max(mult_norm, mu.cwiseAbs().maxCoeff());
            const double pen_needed = 1.1 * mult_norm + 1e-6;
            // track the multipliers both ways: a stale huge penalty stalls
            // the line search long after the multipliers have settled
            penalty = (penalty > 16.0 * pen_needed) ? 4.0 * pen_needed
                                                    : std::max(penalty, pen_needed);

            const double viol0 = c.cwiseAbs().sum() + violation(ci);
            const double merit0 = f + penalty * viol0;
            // the damped restoration removes only theta of the equality violation
            const double deriv =
                grad.dot(p) - penalty * (theta * c.cwiseAbs().sum() + violation(ci));

            // cap absurd trial steps (early iterates far from the manifold)
            double step = 1.0;
            double rel = 0.0;
            for (int i = 0; i < n; ++i) rel = std::max(rel, std::abs(p[i]) / s[i]);
            if (rel > 100.0) step = 100.0 / rel;

            double f_new = f;
            Eigen::VectorXd z_new = z, c_new = c, ci_new = ci;
            bool accepted = false;
            for (int ls = 0; ls < opts_.ls_max; ++ls) {
                z_new = z + step * p;
                f_new = prob_.objective(z_new, nullptr);
                prob_.equality(z_new, c_new);
                for (int i = 0; i < mi; ++i) ci_new[i] = ineq[i].eval(z_new);
                const double merit = f_new + penalty * (c_new.cwiseAbs().sum() + violation(ci_new));
                if (merit <= merit0 + opts_.ls_eta * step * deriv) { accepted = true; break; }
                step *= opts_.ls_tau;
            }
            if (!accepted) {
                res.status = SolveStatus::LineSearchFail;
                return finish(res, z, f, grad, c, ci, *lin, s);
            }

            // ----- move, relinearize, damped BFGS update -----
            Eigen::VectorXd grad_new(n);
            f_new = prob_.objective(z_new, &grad_new);
            std::unique_ptr<EqLinearization> lin_new = prob_.linearize(z_new);

            Eigen::VectorXd gl_old = grad;
            Eigen::VectorXd gl_new = grad_new;
            if (me > 0) {
                gl_old -= lin->apply_transposed(lam);
                gl_new -= lin_new->apply_transposed(lam);
            }
            for (int i = 0; i < mi; ++i) {
                ineq[i].add_transposed(-mu[i], gl_old);
                ineq[i].add_transposed(-mu[i], gl_new);
            }
            const Eigen::VectorXd sv = z_new - z;
            Eigen::VectorXd y = gl_new - gl_old;
            const Eigen::VectorXd Bs = B * sv;
            const double sBs = sv.dot(Bs);
            double sy = sv.dot(y);
            if (sBs > 0.0 && sy < 0.2 * sBs) {
                const double theta = 0.8 * sBs / (sBs - sy); // Powell damping
                y = theta * y + (1.0 - theta) * Bs;
                sy = sv.dot(y);
            }
            if (sBs > 1e-300 && sy > 1e-12 * sv.norm() * y.norm()) {
                B -= (Bs * Bs.transpose()) / sBs;
                B += (y * y.transpose()) / sy;
            }

            if (debug_enabled())
                std::fprintf(stderr,
                             "[sqp] iter %d f %.6g |c| %.3g kkt %.3g step %.3g theta %.3g pen %.3g\n",
                             iter, f_new, c_new.cwiseAbs().maxCoeff(), kkt, step, theta, penalty);

            z = z_new;
            f = f_new;
            grad = grad_new;
            c = c_new;
            ci = ci_new;
            lin = std::move(lin_new);
            res.eq_mult = lam;
            res.ineq_mult = mu;
        }

        res.status = SolveStatus::MaxIter;
        return finish(res, z, f, grad, c, ci, *lin, s);
    }

private:
    static bool debug_enabled() {
        static const bool on = std::getenv("FLOQFIT_SQP_DEBUG") != nullptr;
        return on;
    }

    static double violation(const Eigen::VectorXd& ci) {
        double v = 0.0;
        for (int i = 0; i < ci.size(); ++i) v += std::max(0.0, -ci[i]);
        return v;
    }

    double kkt_residual(const Eigen::VectorXd& grad, const Eigen::VectorXd& c,
                        const Eigen::VectorXd& ci, const Eigen::VectorXd& mu,
                        const Eigen::VectorXd& lam, const EqLinearization& lin,
                        const Eigen::VectorXd& s, double f) const {
        Eigen::VectorXd gl = grad;
        if (c.size() > 0) gl -= lin.apply_transposed(lam);
        const auto& ineq = prob_.inequalities();
        for (std::size_t i = 0; i < ineq.size(); ++i) ineq[i].add_transposed(-mu[static_cast<int>(i)], gl);

        const double fscale = 1.0 + std::abs(f);
        double stat = 0.0;
        int stat_idx = 0;
        for (int i = 0; i < gl.size(); ++i) {
            const double v = std::abs(gl[i]) * s[i];
            if (v > stat) { stat = v; stat_idx = i; }
        }
        stat /= fscale;

        double feas = c.size() > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
        double viol = 0.0, comp = 0.0;
        for (int i = 0; i < ci.size(); ++i) {
            viol = std::max(viol, -ci[i]);
            comp = std::max(comp, std::abs(mu[i] * ci[i]) / fscale);
        }
        if (debug_enabled())
            std::fprintf(stderr, "[kkt] stat %.3g (var %d) feas %.3g viol %.3g comp %.3g\n", stat,
                         stat_idx, feas, viol, comp);
        return std::max({stat, feas, viol, comp});
    }

    SqpResult finish(SqpResult res, const Eigen::VectorXd& z, double f, const Eigen::VectorXd& grad,
                     const Eigen::VectorXd& c, const Eigen::VectorXd& ci,
                     const EqLinearization& lin, const Eigen::VectorXd& s) const {
        res.z = z;
        res.objective = f;
        res.kkt_residual = kkt_residual(grad, c, ci, res.ineq_mult, res.eq_mult, lin, s, f);
        return res;
    }

    const NlpProblem& prob_;
    SqpOptions opts_;
};

inline SqpResult sqp_solve(const NlpProblem& problem, const Eigen::VectorXd& z0,
                           double tol = 1e-8, int max_iter = 300) {
    SqpOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    return SqpSolver(problem, o).solve(z0);
}

} // namespace floqfit

#endif
