#ifndef FLOQFIT_COLLOCATION_HPP
#define FLOQFIT_COLLOCATION_HPP

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "floqfit/errors.hpp"
#include "floqfit/integrate.hpp"
#include "floqfit/model.hpp"
#include "floqfit/nlp.hpp"
#include "floqfit/timeseries.hpp"

namespace floqfit {

/// The four uniperiod schemes plus the multi-frequency extension.
struct SchemeSpec {
    enum class Id { S1, S2, S3, S4, MF };
    Id id = Id::S2;
    double lambda = 0.0;            // Tikhonov weight on (alpha, delta, omega, nu)
    double epsilon = 0.0;           // half-width of the omega box
    std::vector<double> omega_star; // per-harmonic target frequencies
    int m = 1;                      // harmonic count
    bool enforce_R0_positivity = false;

    bool has_omega_box() const { return id == Id::S2 || id == Id::S4 || id == Id::MF; }
    bool multi_frequency() const { return id == Id::MF; }

    void check() const {
        if (m < 1) throw DataError("scheme needs m >= 1");
        if (!multi_frequency() && m != 1) throw DataError("schemes 1-4 are single-harmonic");
        if ((id == Id::S1 || id == Id::S2) && lambda != 0.0)
            throw DataError("schemes 1 and 2 require lambda = 0");
        if ((id == Id::S3 || id == Id::S4) && !(lambda > 0.0))
            throw DataError("schemes 3 and 4 require lambda > 0");
        if (lambda < 0.0) throw DataError("lambda must be nonnegative");
        if (has_omega_box()) {
            if (!(epsilon > 0.0)) throw DataError("omega box requires epsilon > 0");
            if (omega_star.size() != static_cast<std::size_t>(m))
                throw DataError("omega_star must list one target per harmonic");
        }
        if (omega_star.empty()) throw DataError("scheme needs at least one omega_star seed");
    }

    static const char* name(Id id) {
        switch (id) {
            case Id::S1: return "S1";
            case Id::S2: return "S2";
            case Id::S3: return "S3";
            case Id::S4: return "S4";
            default: return "MF";
        }
    }
};

/// Index map of the decision vector:
///   [alpha | delta_1..m | omega_1..m | nu | (slack_1..m) | nodes | stages]
/// Node k holds (I_k, R_k); interval k holds the four stage derivatives
/// (K1_I, K1_R, K2_I, K2_R) of the 2-stage Gauss-Legendre rule.
struct DecisionLayout {
    int m = 1;
    bool slacks = false;
    int n_nodes = 0;

    int alpha() const { return 0; }
    int delta(int j) const { return 1 + j; }
    int omega(int j) const { return 1 + m + j; }
    int nu() const { return 1 + 2 * m; }
    int slack(int j) const { return 2 + 2 * m + j; }
    int npar() const { return 2 + 2 * m + (slacks ? m : 0); }
    int node(int k) const { return npar() + 2 * k; }
    int stage(int k) const { return npar() + 2 * n_nodes + 4 * k; }
    int intervals() const { return n_nodes - 1; }
    int dim() const { return npar() + 2 * n_nodes + 4 * intervals(); }
    int eq_count() const { return 6 * intervals(); }
};

namespace detail {

struct ModelParams {
    double alpha = 0.0;
    Eigen::VectorXd delta;
    Eigen::VectorXd omega;
    double nu = 0.0;
};

inline ModelParams unpack(const DecisionLayout& lay, const Eigen::VectorXd& z) {
    ModelParams p;
    p.alpha = z[lay.alpha()];
    p.delta.resize(lay.m);
    p.omega.resize(lay.m);
    for (int j = 0; j < lay.m; ++j) {
        p.delta[j] = z[lay.delta(j)];
        p.omega[j] = z[lay.omega(j)];
    }
    p.nu = z[lay.nu()];
    return p;
}

inline double beta_at(const ModelParams& p, double t) {
    double b = p.alpha;
    for (int j = 0; j < p.delta.size(); ++j)
        b += p.delta[j] * std::cos(2.0 * std::numbers::pi * p.omega[j] * t);
    return b;
}

} // namespace detail

class CollocationLinearization;

/// Eq. "discretize then optimize": trapezoid misfit over the weekly grid,
/// Gauss-Legendre collocation defects as equalities, scheme box/sign rules
/// as linear inequalities. Weekly grid step h = 1.
class CollocationProblem final : public NlpProblem {
public:
    CollocationProblem(SchemeSpec scheme, const IncidenceSeries& train, const IrParams& fixed)
        : scheme_(std::move(scheme)), fixed_(fixed) {
        scheme_.check();
        if (train.cadence != Cadence::Weekly) throw DataError("transcription expects weekly data");
        if (train.size() < 8) throw DataError("transcription needs at least 8 training points");
        data_ = train.counts();
        lay_.m = scheme_.m;
        lay_.slacks = scheme_.multi_frequency();
        lay_.n_nodes = static_cast<int>(data_.size());

        weights_.assign(data_.size(), h_);
        weights_.front() = 0.5 * h_;
        weights_.back() = 0.5 * h_;

        build_inequalities();
        scale_ = Eigen::VectorXd::Ones(lay_.dim());
        double dmax = 1.0;
        for (double d : data_) dmax = std::max(dmax, d);
        data_scale_ = dmax;
    }

    const DecisionLayout& layout() const { return lay_; }
    const SchemeSpec& scheme() const { return scheme_; }
    const IrParams& fixed_params() const { return fixed_; }
    const std::vector<double>& data() const { return data_; }
    const std::vector<double>& quadrature_weights() const { return weights_; }
    double data_scale() const { return data_scale_; }

    int dim() const override { return lay_.dim(); }
    int eq_count() const override { return lay_.eq_count(); }
    const std::vector<LinearConstraint>& inequalities() const override { return ineq_; }

    double objective(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const override {
        if (grad) grad->setZero(lay_.dim());
        double misfit = 0.0;
        for (int k = 0; k < lay_.n_nodes; ++k) {
            const double e = z[lay_.node(k)] - data_[static_cast<std::size_t>(k)];
            misfit += weights_[static_cast<std::size_t>(k)] * e * e;
            if (grad) (*grad)[lay_.node(k)] = weights_[static_cast<std::size_t>(k)] * e;
        }
        double pen = 0.0;
        if (scheme_.lambda > 0.0) {
            auto add = [&](int idx) {
                pen += z[idx] * z[idx];
                if (grad) (*grad)[idx] += scheme_.lambda * z[idx];
            };
            add(lay_.alpha());
            for (int j = 0; j < lay_.m; ++j) { add(lay_.delta(j)); add(lay_.omega(j)); }
            add(lay_.nu());
        }
        return 0.5 * misfit + 0.5 * scheme_.lambda * pen;
    }

    void equality(const Eigen::VectorXd& z, Eigen::VectorXd& c) const override {
        using namespace gl2;
        c.resize(lay_.eq_count());
        const detail::ModelParams p = detail::unpack(lay_, z);
        for (int k = 0; k < lay_.intervals(); ++k) {
            const double tk = static_cast<double>(k) * h_;
            const Eigen::Vector2d xk(z[lay_.node(k)], z[lay_.node(k) + 1]);
            const Eigen::Vector2d xk1(z[lay_.node(k + 1)], z[lay_.node(k + 1) + 1]);
            const Eigen::Vector2d K1(z[lay_.stage(k)], z[lay_.stage(k) + 1]);
            const Eigen::Vector2d K2(z[lay_.stage(k) + 2], z[lay_.stage(k) + 3]);
            const Eigen::Vector2d y1 = xk + h_ * (a11 * K1 + a12 * K2);
            const Eigen::Vector2d y2 = xk + h_ * (a21 * K1 + a22 * K2);
            c.segment<2>(6 * k) = K1 - rhs_at(p, tk + c1 * h_, y1);
            c.segment<2>(6 * k + 2) = K2 - rhs_at(p, tk + c2 * h_, y2);
            c.segment<2>(6 * k + 4) = xk1 - xk - h_ * (b1 * K1 + b2 * K2);
        }
    }

    std::unique_ptr<EqLinearization> linearize(const Eigen::VectorXd& z) const override;

    Eigen::VectorXd scales() const override { return scale_; }

    /// Copy with the quasi-Newton scaling anchored at a start point.
    CollocationProblem with_scales(const Eigen::VectorXd& z0) const {
        CollocationProblem p = *this;
        Eigen::VectorXd s(lay_.dim());
        const double a0 = std::max(std::abs(z0[lay_.alpha()]), 1e-8);
        s[lay_.alpha()] = a0;
        for (int j = 0; j < lay_.m; ++j) {
            s[lay_.delta(j)] = std::max(std::abs(z0[lay_.delta(j)]), 0.3 * a0);
            s[lay_.omega(j)] = std::max(std::abs(z0[lay_.omega(j)]), 1e-3);
        }
        s[lay_.nu()] = std::max(std::abs(z0[lay_.nu()]), 1e-8);
        if (lay_.slacks)
            for (int j = 0; j < lay_.m; ++j)
                s[lay_.slack(j)] = s[lay_.delta(j)];
        const double state_floor = std::max(1.0, 0.05 * data_scale_);
        for (int i = lay_.node(0); i < lay_.dim(); ++i)
            s[i] = std::max(std::abs(z0[i]), state_floor);
        p.scale_ = s;
        return p;
    }

    /// Model right-hand side with decision-vector parameters.
    Eigen::Vector2d rhs_at(const detail::ModelParams& p, double t, const Eigen::Vector2d& x) const {
        const double beta = detail::beta_at(p, t);
        const double denom = x[0] + p.nu * fixed_.N;
        Eigen::Vector2d d;
        d[0] = beta * (fixed_.N - x[0] - x[1]) * x[0] / denom - (fixed_.gamma + fixed_.mu) * x[0];
        d[1] = fixed_.gamma * x[0] - (fixed_.mu + fixed_.kappa) * x[1];
        return d;
    }

    Eigen::Matrix2d state_jacobian(const detail::ModelParams& p, double t, const Eigen::Vector2d& x) const {
        const double beta = detail::beta_at(p, t);
        const double denom = x[0] + p.nu * fixed_.N;
        const double sat = x[0] / denom;
        Eigen::Matrix2d J;
        J(0, 0) = beta * ((fixed_.N - x[0] - x[1]) / denom * (1.0 - sat) - sat) -
                  (fixed_.gamma + fixed_.mu);
        J(0, 1) = -beta * sat;
        J(1, 0) = fixed_.gamma;
        J(1, 1) = -(fixed_.mu + fixed_.kappa);
        return J;
    }

    /// d f / d (alpha, delta_j, omega_j, nu); slack columns stay zero.
    Eigen::MatrixXd param_jacobian(const detail::ModelParams& p, double t,
                                   const Eigen::Vector2d& x) const {
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2, lay_.npar());
        const double denom = x[0] + p.nu * fixed_.N;
        const double common = (fixed_.N - x[0] - x[1]) * x[0] / denom;
        P(0, lay_.alpha()) = common;
        for (int j = 0; j < lay_.m; ++j) {
            const double phase = 2.0 * std::numbers::pi * p.omega[j] * t;
            P(0, lay_.delta(j)) = std::cos(phase) * common;
            P(0, lay_.omega(j)) =
                -p.delta[j] * std::sin(phase) * 2.0 * std::numbers::pi * t * common;
        }
        const double beta = detail::beta_at(p, t);
        P(0, lay_.nu()) = -beta * (fixed_.N - x[0] - x[1]) * x[0] * fixed_.N / (denom * denom);
        return P;
    }

private:
    void build_inequalities() {
        auto row = [&](std::vector<std::pair<int, double>> terms, double offset) {
            ineq_.push_back({std::move(terms), offset});
        };
        if (scheme_.multi_frequency()) {
            // alpha >= sum_j s_j with s_j >= |delta_j|, kept smooth via slacks
            for (int j = 0; j < lay_.m; ++j) {
                row({{lay_.slack(j), 1.0}, {lay_.delta(j), -1.0}}, 0.0);
                row({{lay_.slack(j), 1.0}, {lay_.delta(j), 1.0}}, 0.0);
            }
            std::vector<std::pair<int, double>> sum{{lay_.alpha(), 1.0}};
            for (int j = 0; j < lay_.m; ++j) sum.emplace_back(lay_.slack(j), -1.0);
            row(std::move(sum), 0.0);
        } else {
            row({{lay_.alpha(), 1.0}, {lay_.delta(0), -1.0}}, 0.0); // alpha - delta >= 0
            row({{lay_.alpha(), 1.0}, {lay_.delta(0), 1.0}}, 0.0);  // alpha + delta >= 0
        }
        for (int j = 0; j < lay_.m; ++j) {
            if (scheme_.has_omega_box()) {
                const double lo = scheme_.omega_star[static_cast<std::size_t>(j)] - scheme_.epsilon;
                const double hi = scheme_.omega_star[static_cast<std::size_t>(j)] + scheme_.epsilon;
                row({{lay_.omega(j), 1.0}}, -lo);
                row({{lay_.omega(j), -1.0}}, hi);
            } else {
                row({{lay_.omega(j), 1.0}}, -1e-8); // keep the frequency positive
            }
        }
        row({{lay_.nu(), 1.0}}, -1e-10);  // nu > 0
        row({{lay_.alpha(), 1.0}}, 0.0);  // alpha >= 0 (implied, kept explicit)
        for (int k = 0; k < lay_.n_nodes; ++k) row({{lay_.node(k), 1.0}}, 0.0); // I_k >= 0
        if (scheme_.enforce_R0_positivity) row({{lay_.node(0) + 1, 1.0}}, 0.0); // R(0) >= 0
    }

    SchemeSpec scheme_;
    IrParams fixed_;
    DecisionLayout lay_;
    std::vector<double> data_;
    std::vector<double> weights_;
    std::vector<LinearConstraint> ineq_;
    Eigen::VectorXd scale_;
    double data_scale_ = 1.0;
    double h_ = 1.0;

    friend class CollocationLinearization;
};

/// Block bidiagonal equality Jacobian: the basic variables (stages plus the
/// nodes from 1 on) factor into per-interval 4x4 stage systems, so every
/// solve is a single forward or backward sweep.
class CollocationLinearization final : public EqLinearization {
public:
    CollocationLinearization(const CollocationProblem& prob, const Eigen::VectorXd& z)
        : prob_(prob), lay_(prob.lay_) {
        using namespace gl2;
        const detail::ModelParams p = detail::unpack(lay_, z);
        const int ni = lay_.intervals();
        const double h = prob_.h_;
        lu_.reserve(static_cast<std::size_t>(ni));
        Jstack_.resize(static_cast<std::size_t>(ni));
        Pstack_.resize(static_cast<std::size_t>(ni));
        ok_ = true;
        for (int k = 0; k < ni; ++k) {
            const double tk = static_cast<double>(k) * h;
            const Eigen::Vector2d xk(z[lay_.node(k)], z[lay_.node(k) + 1]);
            const Eigen::Vector2d K1(z[lay_.stage(k)], z[lay_.stage(k) + 1]);
            const Eigen::Vector2d K2(z[lay_.stage(k) + 2], z[lay_.stage(k) + 3]);
            const Eigen::Vector2d y1 = xk + h * (a11 * K1 + a12 * K2);
            const Eigen::Vector2d y2 = xk + h * (a21 * K1 + a22 * K2);
            const double t1 = tk + c1 * h, t2 = tk + c2 * h;
            const Eigen::Matrix2d J1 = prob_.state_jacobian(p, t1, y1);
            const Eigen::Matrix2d J2 = prob_.state_jacobian(p, t2, y2);

            Eigen::Matrix4d D = Eigen::Matrix4d::Identity();
            D.block<2, 2>(0, 0) -= h * a11 * J1;
            D.block<2, 2>(0, 2) = -h * a12 * J1;
            D.block<2, 2>(2, 0) = -h * a21 * J2;
            D.block<2, 2>(2, 2) -= h * a22 * J2;
            D_.push_back(D);
            lu_.emplace_back(D);
            luT_.emplace_back(D.transpose());
            if (std::abs(lu_.back().determinant()) < 1e-300) ok_ = false;

            Jstack_[static_cast<std::size_t>(k)].topRows<2>() = J1;
            Jstack_[static_cast<std::size_t>(k)].bottomRows<2>() = J2;
            Eigen::MatrixXd P(4, lay_.npar());
            P.topRows<2>() = prob_.param_jacobian(p, t1, y1);
            P.bottomRows<2>() = prob_.param_jacobian(p, t2, y2);
            Pstack_[static_cast<std::size_t>(k)] = std::move(P);
        }
        build_nullspace();
    }

    bool ok() const override { return ok_; }
    const Eigen::MatrixXd& nullspace() const override { return Z_; }

    /// Forward sweep: J_E p = -c with free (nonbasic) components fixed to 0.
    Eigen::VectorXd particular(const Eigen::VectorXd& c) const override {
        return sweep(Eigen::VectorXd::Zero(lay_.npar() + 2), -c);
    }

    Eigen::VectorXd apply_transposed(const Eigen::VectorXd& lambda) const override {
        using namespace gl2;
        const double h = prob_.h_;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(lay_.dim());
        for (int k = 0; k < lay_.intervals(); ++k) {
            const auto ks = static_cast<std::size_t>(k);
            const Eigen::Vector4d ld = lambda.segment<4>(6 * k);
            const Eigen::Vector2d lc = lambda.segment<2>(6 * k + 4);
            // stage variables
            Eigen::Vector4d wk = D_[ks].transpose() * ld;
            wk.head<2>() -= h * b1 * lc;
            wk.tail<2>() -= h * b2 * lc;
            w.segment<4>(lay_.stage(k)) += wk;
            // node k
            Eigen::Vector2d wx = -Jstack_[ks].transpose() * ld - lc;
            w.segment<2>(lay_.node(k)) += wx;
            // node k+1
            w.segment<2>(lay_.node(k + 1)) += lc;
            // parameters
            w.head(lay_.npar()) -= Pstack_[ks].transpose() * ld;
        }
        return w;
    }

    /// Backward sweep on the basic rows of J_E^T lambda = w.
    Eigen::VectorXd multipliers(const Eigen::VectorXd& w) const override {
        using namespace gl2;
        const double h = prob_.h_;
        const int ni = lay_.intervals();
        Eigen::VectorXd lambda(lay_.eq_count());
        Eigen::Vector2d carry; // lambda_cont of interval k, computed from node k+1 row
        for (int k = ni - 1; k >= 0; --k) {
            const auto ks = static_cast<std::size_t>(k);
            Eigen::Vector2d lc = w.segment<2>(lay_.node(k + 1));
            if (k + 1 < ni) {
                // node k+1 row also sees interval k+1's defect and continuity rows
                const Eigen::Vector4d ld_next = lambda.segment<4>(6 * (k + 1));
                lc += Jstack_[static_cast<std::size_t>(k + 1)].transpose() * ld_next + carry;
            }
            Eigen::Vector4d rhs = w.segment<4>(lay_.stage(k));
            rhs.head<2>() += h * b1 * lc;
            rhs.tail<2>() += h * b2 * lc;
            const Eigen::Vector4d ld = luT_[ks].solve(rhs);
            lambda.segment<4>(6 * k) = ld;
            lambda.segment<2>(6 * k + 4) = lc;
            carry = lc;
        }
        return lambda;
    }

private:
    /// Solves the linearized dynamics for given nonbasic components
    /// free = (params, x_0) and right-hand side r (length 6*intervals).
    Eigen::VectorXd sweep(const Eigen::VectorXd& free, const Eigen::VectorXd& r) const {
        using namespace gl2;
        const double h = prob_.h_;
        Eigen::VectorXd p = Eigen::VectorXd::Zero(lay_.dim());
        p.head(lay_.npar()) = free.head(lay_.npar());
        p.segment<2>(lay_.node(0)) = free.tail<2>();
        const Eigen::VectorXd dp = free.head(lay_.npar());
        Eigen::Vector2d dx = free.tail<2>();
        for (int k = 0; k < lay_.intervals(); ++k) {
            const auto ks = static_cast<std::size_t>(k);
            Eigen::Vector4d rhs = r.segment<4>(6 * k);
            rhs += Jstack_[ks] * dx;
            rhs += Pstack_[ks] * dp;
            const Eigen::Vector4d dK = lu_[ks].solve(rhs);
            p.segment<4>(lay_.stage(k)) = dK;
            Eigen::Vector2d dx1 = r.segment<2>(6 * k + 4) + dx;
            dx1 += h * (b1 * dK.head<2>() + b2 * dK.tail<2>());
            p.segment<2>(lay_.node(k + 1)) = dx1;
            dx = dx1;
        }
        return p;
    }

    void build_nullspace() {
        const int d = lay_.npar() + 2;
        Z_.resize(lay_.dim(), d);
        const Eigen::VectorXd zero_r = Eigen::VectorXd::Zero(lay_.eq_count());
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
            e[j] = 1.0;
            Z_.col(j) = sweep(e, zero_r);
        }
    }

    const CollocationProblem& prob_;
    DecisionLayout lay_;
    std::vector<Eigen::Matrix4d> D_;
    std::vector<Eigen::PartialPivLU<Eigen::Matrix4d>> lu_;
    std::vector<Eigen::PartialPivLU<Eigen::Matrix4d>> luT_;
    std::vector<Eigen::Matrix<double, 4, 2>> Jstack_;
    std::vector<Eigen::MatrixXd> Pstack_;
    Eigen::MatrixXd Z_;
    bool ok_ = true;
};

inline std::unique_ptr<EqLinearization> CollocationProblem::linearize(const Eigen::VectorXd& z) const {
    return std::make_unique<CollocationLinearization>(*this, z);
}

/// Spec-facing transcription entry point.
inline CollocationProblem transcribe(const SchemeSpec& scheme, const IncidenceSeries& train,
                                     const IrParams& fixed) {
    return CollocationProblem(scheme, train, fixed);
}

inline double objective_eval(const CollocationProblem& problem, const Eigen::VectorXd& z) {
    return problem.objective(z, nullptr);
}

} // namespace floqfit

#endif
