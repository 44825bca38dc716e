#ifndef FLOQFIT_SYNTH_HPP
#define FLOQFIT_SYNTH_HPP

#include <cmath>
#include <random>

#include "floqfit/config.hpp"
#include "floqfit/integrate.hpp"
#include "floqfit/timeseries.hpp"

namespace floqfit {

struct SynthOptions {
    int weeks = 505;
    std::uint64_t seed = 0;
    double noise_sd = 0.0; // additive Gaussian, in cases/week; 0 = exact samples
    StepperConfig stepper{0.25, 1e-12, 25};
};

/// Weekly incidence sampled from an integrated IR system. The stand-in for
/// the restricted hospital data: a ground-truth series whose generating
/// parameters are known exactly.
inline IncidenceSeries generate_synthetic(const ModelSpec& spec, const SynthOptions& opts) {
    if (opts.weeks < 2) throw DataError("synthetic series needs at least 2 weeks");
    auto rhs = [&](double t, const Eigen::Vector2d& x) {
        return ir_rhs(spec.params, spec.forcing, t, x);
    };
    auto jac = [&](double t, const Eigen::Vector2d& x) {
        return ir_jacobian(spec.params, spec.forcing, t, x);
    };
    const Eigen::Vector2d x0(spec.I0, spec.R0_init);
    const auto traj = integrate(rhs, jac, 0.0, static_cast<double>(opts.weeks - 1), x0, opts.stepper);

    std::mt19937_64 rng(opts.seed);
    auto gauss = [&rng]() {
        // Box-Muller on implementation-pinned uniforms
        const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };

    IncidenceSeries out;
    out.cadence = Cadence::Weekly;
    out.provenance = Provenance::Synthetic;
    const double steps_per_week = 1.0 / opts.stepper.h;
    for (int k = 0; k < opts.weeks; ++k) {
        const auto idx = std::min(static_cast<std::size_t>(std::llround(k * steps_per_week)),
                                  traj.states.size() - 1);
        if (std::abs(traj.times[idx] - static_cast<double>(k)) > 1e-9)
            throw DataError("synthetic sampling needs a step size that divides one week");
        double v = traj.states[idx][0];
        if (opts.noise_sd > 0.0) v += opts.noise_sd * gauss();
        out.records.push_back({k, std::max(0.0, v)});
    }
    return out;
}

} // namespace floqfit

#endif
