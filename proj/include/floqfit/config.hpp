#ifndef FLOQFIT_CONFIG_HPP
#define FLOQFIT_CONFIG_HPP

#include <string>
#include <vector>

#include "floqfit/forcing.hpp"
#include "floqfit/io.hpp"
#include "floqfit/model.hpp"

namespace floqfit {

/// A fully specified IR system: fixed rates, seasonal forcing, initial state.
struct ModelSpec {
    IrParams params;
    SeasonalForcing forcing;
    double I0 = 0.0;
    double R0_init = 0.0;
};

/// Parses the plain-text parameter format:
///   N = 1e7
///   mu = 1/3120        # fractions and exact decimals both work
///   gamma = 0.25
///   kappa = 1/36
///   nu = 2.5e-4
///   alpha = 6.57e-5
///   delta = -8.5e-6, 3.2e-5
///   omega = 0.00609, 0.01882
///   I0 = 114.7
///   R0 = 0
/// Frequencies are kept as exact rationals so the common period is exact.
inline ModelSpec model_spec_from(const KeyValueFile& kv) {
    ModelSpec spec;
    spec.params.N = kv.get_rational("N").value();
    spec.params.mu = kv.get_rational("mu").value();
    spec.params.gamma = kv.get_rational("gamma").value();
    spec.params.kappa = kv.get_rational("kappa").value();
    spec.params.nu = kv.get_rational("nu").value();
    spec.params.check();

    const double alpha = kv.get_rational("alpha").value();
    std::vector<Harmonic> hs;
    if (kv.has("delta") != kv.has("omega"))
        throw DataError("parameter file must provide delta and omega together");
    if (kv.has("delta")) {
        const auto deltas = kv.get_rational_list("delta");
        const auto omegas = kv.get_rational_list("omega");
        if (deltas.size() != omegas.size())
            throw DataError("delta and omega lists differ in length");
        for (std::size_t j = 0; j < deltas.size(); ++j)
            hs.push_back({deltas[j].value(), omegas[j]});
    }
    spec.forcing = SeasonalForcing(alpha, std::move(hs));
    spec.I0 = kv.get_double("I0", 0.0);
    spec.R0_init = kv.get_double("R0", 0.0);
    if (spec.I0 < 0.0 || spec.R0_init < 0.0)
        throw DataError("initial conditions must be nonnegative");
    return spec;
}

inline ModelSpec load_model_spec(const std::filesystem::path& path) {
    return model_spec_from(KeyValueFile::load(path));
}

} // namespace floqfit

#endif
