#ifndef FLOQFIT_SPECTRAL_HPP
#define FLOQFIT_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "floqfit/errors.hpp"
#include "floqfit/forcing.hpp"
#include "floqfit/timeseries.hpp"

namespace floqfit {

/// One-sided magnitude spectrum of a mean-removed series; bin k maps to
/// frequency k/n cycles per sample period.
struct Spectrum {
    std::size_t n = 0;               // sample count
    std::vector<double> frequencies; // k/n for k = 0..floor(n/2)
    std::vector<double> magnitudes;  // |X_k|
};

struct SpectralPeak {
    std::size_t bin = 0;
    Rational frequency_exact; // bin/n
    double frequency = 0.0;   // cycles per week
    double period = 0.0;      // weeks, stored as 1/frequency
    double magnitude = 0.0;
    int rank = 0; // 1 = largest magnitude among selected peaks
};

/// Direct O(n^2) transform; n is a few hundred in this pipeline, so a fast
/// transform would buy nothing measurable.
inline Spectrum dft_magnitude(const IncidenceSeries& series) {
    const std::size_t n = series.size();
    if (n < 4) throw DataError("dft_magnitude needs at least 4 samples");
    double mean = 0.0;
    for (const auto& r : series.records) mean += r.count;
    mean /= static_cast<double>(n);

    Spectrum sp;
    sp.n = n;
    const std::size_t half = n / 2;
    sp.frequencies.resize(half + 1);
    sp.magnitudes.resize(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        double re = 0.0, im = 0.0;
        const double w = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double x = series.records[j].count - mean;
            re += x * std::cos(w * static_cast<double>(j));
            im += x * std::sin(w * static_cast<double>(j));
        }
        sp.frequencies[k] = static_cast<double>(k) / static_cast<double>(n);
        sp.magnitudes[k] = std::hypot(re, im);
    }
    return sp;
}

/// Strict local maxima ranked by magnitude, greedily thinned so selected
/// peaks stay at least min_separation apart in frequency. The DC bin is
/// excluded; fewer than m peaks is legal when the spectrum has fewer maxima.
inline std::vector<SpectralPeak> top_peaks(const Spectrum& sp, std::size_t m,
                                           double min_separation) {
    if (m < 1) throw DataError("top_peaks needs m >= 1");
    if (min_separation < 0.0) throw DataError("min_separation must be nonnegative");
    const std::size_t half = sp.magnitudes.size() - 1;

    double peak_mag = 0.0;
    for (double m_k : sp.magnitudes) peak_mag = std::max(peak_mag, m_k);
    const double floor = 1e-8 * peak_mag; // transform round-off is not a peak

    std::vector<std::size_t> maxima;
    for (std::size_t k = 1; k + 1 <= half; ++k)
        if (sp.magnitudes[k] > sp.magnitudes[k - 1] && sp.magnitudes[k] > sp.magnitudes[k + 1] &&
            sp.magnitudes[k] > floor)
            maxima.push_back(k);
    if (maxima.empty()) throw DataError("spectrum has no interior local maxima");

    std::sort(maxima.begin(), maxima.end(), [&sp](std::size_t a, std::size_t b) {
        if (sp.magnitudes[a] != sp.magnitudes[b]) return sp.magnitudes[a] > sp.magnitudes[b];
        return a < b;
    });

    std::vector<SpectralPeak> out;
    for (const std::size_t k : maxima) {
        if (out.size() == m) break;
        bool ok = true;
        for (const auto& p : out)
            if (std::abs(sp.frequencies[k] - p.frequency) < min_separation) { ok = false; break; }
        if (!ok) continue;
        SpectralPeak pk;
        pk.bin = k;
        pk.frequency_exact = Rational(static_cast<std::int64_t>(k), static_cast<std::int64_t>(sp.n));
        pk.frequency = sp.frequencies[k];
        pk.period = 1.0 / pk.frequency;
        pk.magnitude = sp.magnitudes[k];
        pk.rank = static_cast<int>(out.size()) + 1;
        out.push_back(pk);
    }
    return out;
}

/// Structural starting point for the assimilation: frequencies fixed at the
/// detected peaks, amplitudes zeroed, intercept alpha0.
inline SeasonalForcing peak_to_forcing_seed(const std::vector<SpectralPeak>& peaks, double alpha0) {
    if (peaks.empty()) throw DataError("peak_to_forcing_seed needs a nonempty peak list");
    if (!(alpha0 > 0.0)) throw DataError("peak_to_forcing_seed needs alpha0 > 0");
    std::vector<Harmonic> hs;
    hs.reserve(peaks.size());
    for (const auto& p : peaks) hs.push_back({0.0, p.frequency_exact});
    return SeasonalForcing(alpha0, std::move(hs));
}

inline std::string spectrum_to_csv(const Spectrum& sp, const std::vector<SpectralPeak>& peaks) {
    std::string out = "#peaks:";
    for (const auto& p : peaks)
        out += " " + format_double(p.frequency) + " (period " + format_double(p.period) +
               ", magnitude " + format_double(p.magnitude) + ")";
    out += "\nfrequency,magnitude\n";
    for (std::size_t k = 0; k < sp.frequencies.size(); ++k)
        out += format_double(sp.frequencies[k]) + "," + format_double(sp.magnitudes[k]) + "\n";
    return out;
}

} // namespace floqfit

#endif
