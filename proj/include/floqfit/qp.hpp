#ifndef FLOQFIT_QP_HPP
#define FLOQFIT_QP_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "floqfit/errors.hpp"

namespace floqfit {

enum class QpStatus { Solved, Infeasible, MaxIter };

struct QpResult {
    QpStatus status = QpStatus::Infeasible;
    Eigen::VectorXd x;           // primal solution
    Eigen::VectorXd eq_mult;     // equality multipliers (free sign)
    Eigen::VectorXd ineq_mult;   // inequality multipliers (>= 0, 0 when inactive)
    int iterations = 0;
};

/// Strictly convex QP
///     min 1/2 x'Hx + g'x   s.t.  E x + e0 = 0,   C x + c0 >= 0
/// solved with the dual active-set method of Goldfarb and Idnani. The dual
/// iteration starts from the unconstrained minimizer, so no feasible point
/// is needed, and primal infeasibility surfaces as an unbounded dual step.
class DenseQp {
public:
    static QpResult solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                          const Eigen::MatrixXd& E_in, const Eigen::VectorXd& e0_in,
                          const Eigen::MatrixXd& C_in, const Eigen::VectorXd& c0_in,
                          int max_iter = 0) {
        const int n = static_cast<int>(g.size());
        const int me = static_cast<int>(e0_in.size());
        const int mi = static_cast<int>(c0_in.size());
        if (H.rows() != n || H.cols() != n) throw DataError("QP Hessian dimension mismatch");
        if ((me > 0 && E_in.cols() != n) || (mi > 0 && C_in.cols() != n))
            throw DataError("QP constraint dimension mismatch");
        if (max_iter <= 0) max_iter = 20 * (n + me + mi + 10);

        // normalize constraint rows so the dual pivot tolerances are
        // meaningful across heterogeneous scales
        Eigen::MatrixXd E = E_in;
        Eigen::VectorXd e0 = e0_in;
        Eigen::VectorXd escale = Eigen::VectorXd::Ones(me);
        for (int i = 0; i < me; ++i) {
            const double nrm = E.row(i).norm();
            if (nrm > 0.0) { E.row(i) /= nrm; e0[i] /= nrm; escale[i] = nrm; }
        }
        Eigen::MatrixXd C = C_in;
        Eigen::VectorXd c0 = c0_in;
        Eigen::VectorXd cscale = Eigen::VectorXd::Ones(mi);
        for (int i = 0; i < mi; ++i) {
            const double nrm = C.row(i).norm();
            if (nrm > 0.0) { C.row(i) /= nrm; c0[i] /= nrm; cscale[i] = nrm; }
        }

        QpResult res;
        res.eq_mult = Eigen::VectorXd::Zero(me);
        res.ineq_mult = Eigen::VectorXd::Zero(mi);

        // Cholesky of H, with a tiny escalating ridge if the BFGS matrix has
        // drifted to the PSD boundary.
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (llt.info() != Eigen::Success) {
            const double base = H.diagonal().cwiseAbs().maxCoeff() + 1.0;
            double ridge = 1e-12 * base;
            Eigen::MatrixXd Hr = H;
            for (int k = 0; k < 6 && llt.info() != Eigen::Success; ++k, ridge *= 100.0) {
                Hr = H + ridge * Eigen::MatrixXd::Identity(n, n);
                llt.compute(Hr);
            }
            if (llt.info() != Eigen::Success)
                throw NumericError("QP Hessian is not positive definite");
        }

        // J = L^{-T}; the active-set bookkeeping rotates J and grows R.
        Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
        llt.matrixU().solveInPlace(J);
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
        double R_norm = 1.0;

        Eigen::VectorXd x = llt.solve(-g);
        std::vector<int> active;      // constraint ids: 0..me-1 eq, me..me+mi-1 ineq
        Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1); // multipliers of active set
        int iq = 0;

        Eigen::VectorXd d(n), z(n), r(n), np(n);
        const double tau = 1e-11;
        const double inf = std::numeric_limits<double>::infinity();

        auto compute_d = [&](const Eigen::VectorXd& normal) { d.noalias() = J.transpose() * normal; };
        auto update_z = [&]() {
            if (iq < n) z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
            else z.setZero();
        };
        auto update_r = [&]() {
            if (iq > 0)
                r.head(iq) = R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
        };

        auto add_constraint = [&]() -> bool {
            // rotate d so entries below iq vanish, carrying J along
            for (int j = n - 1; j >= iq + 1; --j) {
                double cc = d[j - 1], ss = d[j];
                const double h = std::hypot(cc, ss);
                if (h == 0.0) continue;
                d[j] = 0.0;
                ss /= h;
                cc /= h;
                if (cc < 0.0) { cc = -cc; ss = -ss; d[j - 1] = -h; }
                else d[j - 1] = h;
                const double xny = ss / (1.0 + cc);
                for (int k = 0; k < n; ++k) {
                    const double t1 = J(k, j - 1), t2 = J(k, j);
                    J(k, j - 1) = t1 * cc + t2 * ss;
                    J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
                }
            }
            ++iq;
            R.col(iq - 1).head(iq) = d.head(iq);
            R_norm = std::max(R_norm, std::abs(d[iq - 1]));
            return std::abs(d[iq - 1]) > std::numeric_limits<double>::epsilon() * R_norm * 100.0;
        };

        auto delete_constraint = [&](int pos) {
            // drop active constraint at position pos (>= me) and restore R
            for (int i = pos; i < iq - 1; ++i) {
                active[static_cast<std::size_t>(i)] = active[static_cast<std::size_t>(i) + 1];
                u[i] = u[i + 1];
                R.col(i) = R.col(i + 1);
            }
            active.pop_back();
            u[iq - 1] = u[iq];
            u[iq] = 0.0;
            R.col(iq - 1).setZero();
            --iq;
            for (int j = pos; j < iq; ++j) {
                double cc = R(j, j), ss = R(j + 1, j);
                const double h = std::hypot(cc, ss);
                if (h == 0.0) continue;
                cc /= h;
                ss /= h;
                R(j + 1, j) = 0.0;
                if (cc < 0.0) { R(j, j) = -h; cc = -cc; ss = -ss; }
                else R(j, j) = h;
                const double xny = ss / (1.0 + cc);
                for (int k = j + 1; k < iq; ++k) {
                    const double t1 = R(j, k), t2 = R(j + 1, k);
                    R(j, k) = t1 * cc + t2 * ss;
                    R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
                }
                for (int k = 0; k < n; ++k) {
                    const double t1 = J(k, j), t2 = J(k, j + 1);
                    J(k, j) = t1 * cc + t2 * ss;
                    J(k, j + 1) = xny * (J(k, j) + t1) - t2;
                }
            }
        };

        // phase 1: equalities, added unconditionally
        for (int i = 0; i < me; ++i) {
            np = E.row(i).transpose();
            compute_d(np);
            update_z();
            update_r();
            double t2 = 0.0;
            const double resid = np.dot(x) + e0[i];
            const double znp = z.dot(np);
            if (std::abs(znp) > tau * (1.0 + std::abs(resid))) t2 = -resid / znp;
            else if (std::abs(resid) > 1e-8 * (1.0 + e0.cwiseAbs().maxCoeff())) {
                res.status = QpStatus::Infeasible; // linearly dependent and inconsistent
                res.x = x;
                return res;
            }
            x += t2 * z;
            for (int k = 0; k < iq; ++k) u[k] -= t2 * r[k];
            u[iq] = t2;
            active.push_back(i);
            if (!add_constraint()) {
                // dependent but consistent equality: drop it silently
                active.pop_back();
                --iq;
                R.col(iq).setZero();
                u[iq] = 0.0;
            }
            ++res.iterations;
        }

        const double c0_scale = 1.0 + (mi > 0 ? c0.cwiseAbs().maxCoeff() : 0.0);

        for (int iter = me; iter < max_iter; ++iter) {
            // most violated inactive inequality
            int ip = -1;
            double worst = -tau * c0_scale;
            for (int i = 0; i < mi; ++i) {
                bool is_active = false;
                for (int k = me; k < iq; ++k)
                    if (active[static_cast<std::size_t>(k)] == me + i) { is_active = true; break; }
                if (is_active) continue;
                const double s = C.row(i).dot(x) + c0[i];
                if (s < worst) { worst = s; ip = i; }
            }
            if (ip < 0) {
                res.status = QpStatus::Solved;
                res.x = x;
                for (int k = 0; k < iq; ++k) {
                    const int id = active[static_cast<std::size_t>(k)];
                    if (id < me) res.eq_mult[id] = u[k] / escale[id];
                    else res.ineq_mult[id - me] = std::max(0.0, u[k]) / cscale[id - me];
                }
                res.iterations = iter;
                return res;
            }

            np = C.row(ip).transpose();
            double u_plus = 0.0;
            double s_ip = C.row(ip).dot(x) + c0[ip];

            while (true) {
                ++res.iterations;
                compute_d(np);
                update_z();
                update_r();

                // dual blocking step over active inequalities
                double t1 = inf;
                int l_pos = -1;
                for (int k = me; k < iq; ++k) {
                    if (r[k] > tau) {
                        const double ratio = u[k] / r[k];
                        if (ratio < t1) { t1 = ratio; l_pos = k; }
                    }
                }
                const double znp = z.dot(np);
                const double t2 = (znp > tau) ? -s_ip / znp : inf;
                const double t = std::min(t1, t2);

                if (t >= inf) {
                    res.status = QpStatus::Infeasible;
                    res.x = x;
                    return res;
                }

                if (t2 >= inf) {
                    // step in dual space only: drop the blocking constraint
                    for (int k = 0; k < iq; ++k) u[k] -= t * r[k];
                    u_plus += t;
                    delete_constraint(l_pos);
                    continue;
                }

                x += t * z;
                for (int k = 0; k < iq; ++k) u[k] -= t * r[k];
                u_plus += t;
                s_ip = C.row(ip).dot(x) + c0[ip];

                if (t == t2) {
                    u[iq] = u_plus;
                    active.push_back(me + ip);
                    if (!add_constraint()) {
                        active.pop_back();
                        --iq;
                        R.col(iq).setZero();
                        u[iq] = 0.0;
                    }
                    break;
                }
                delete_constraint(l_pos);
            }
        }

        res.status = QpStatus::MaxIter;
        res.x = x;
        return res;
    }
};

/// Spec-facing wrapper.
inline QpResult qp_subproblem_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                    const Eigen::MatrixXd& E, const Eigen::VectorXd& e0,
                                    const Eigen::MatrixXd& C, const Eigen::VectorXd& c0) {
    return DenseQp::solve(H, g, E, e0, C, c0);
}

} // namespace floqfit

#endif
