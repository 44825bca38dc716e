#ifndef FLOQFIT_FORCING_HPP
#define FLOQFIT_FORCING_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "floqfit/errors.hpp"
#include "floqfit/rational.hpp"

namespace floqfit {

struct Harmonic {
    double delta = 0.0;   // amplitude, 1/weeks
    Rational omega;       // frequency, 1/weeks, exact
};

/// Seasonal infection rate beta(t) = alpha + sum_j delta_j cos(2 pi omega_j t).
/// Frequencies are exact rationals so that the common period sigma (the lcm
/// of the harmonic periods) is exact; irrational or zero frequencies are
/// rejected, for which the Floquet machinery would not apply.
class SeasonalForcing {
public:
    SeasonalForcing() : alpha_(0.0), sigma_(1.0) {}

    SeasonalForcing(double alpha, std::vector<Harmonic> harmonics)
        : alpha_(alpha), harmonics_(std::move(harmonics)) {
        if (alpha < 0.0) throw DataError("forcing intercept alpha must be nonnegative");
        sigma_ = 1.0;
        bool first = true;
        Rational period_lcm;
        for (const auto& h : harmonics_) {
            if (!h.omega.positive()) throw DataError("harmonic frequency must be positive");
            const Rational period = reciprocal(h.omega);
            period_lcm = first ? period : rational_lcm(period_lcm, period);
            first = false;
        }
        if (!first) sigma_ = period_lcm.value();
        // alpha >= sum |delta_j| keeps beta nonnegative; constructing a forcing
        // that dips negative is allowed (the optimizer enforces the constraint),
        // so only flag it.
        double amp = 0.0;
        for (const auto& h : harmonics_) amp += std::abs(h.delta);
        nonnegative_ = alpha_ >= amp;
    }

    double alpha() const { return alpha_; }
    const std::vector<Harmonic>& harmonics() const { return harmonics_; }
    double sigma() const { return sigma_; }
    bool nonnegative() const { return nonnegative_; }
    std::size_t size() const { return harmonics_.size(); }

    double operator()(double t) const {
        double b = alpha_;
        for (const auto& h : harmonics_)
            b += h.delta * std::cos(2.0 * std::numbers::pi * h.omega.value() * t);
        return b;
    }

    /// d beta / dt, used by stage-equation Jacobians only through beta itself,
    /// but handy for diagnostics.
    double derivative(double t) const {
        double d = 0.0;
        for (const auto& h : harmonics_) {
            const double w = 2.0 * std::numbers::pi * h.omega.value();
            d -= h.delta * w * std::sin(w * t);
        }
        return d;
    }

    static SeasonalForcing constant(double alpha) { return SeasonalForcing(alpha, {}); }

private:
    double alpha_;
    std::vector<Harmonic> harmonics_;
    double sigma_;
    bool nonnegative_ = true;
};

inline double forcing_eval(const SeasonalForcing& f, double t) { return f(t); }

/// Builds a forcing from plain doubles by snapping each frequency to a
/// rational with the given number of decimal places (reports carry more
/// digits than a rational period analysis can use).
inline SeasonalForcing make_forcing_rounded(double alpha, const std::vector<double>& deltas,
                                            const std::vector<double>& omegas, int decimals) {
    if (deltas.size() != omegas.size()) throw DataError("delta/omega lists differ in length");
    if (decimals < 1 || decimals > 15) throw DataError("omega rounding decimals out of range");
    std::int64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    std::vector<Harmonic> hs;
    hs.reserve(deltas.size());
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        const auto num = static_cast<std::int64_t>(std::llround(omegas[j] * static_cast<double>(scale)));
        if (num <= 0) throw DataError("frequency rounds to a nonpositive rational");
        hs.push_back({deltas[j], Rational(num, scale)});
    }
    return SeasonalForcing(alpha, std::move(hs));
}

} // namespace floqfit

#endif
