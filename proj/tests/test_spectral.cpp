#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "floqfit/spectral.hpp"

using namespace floqfit;

namespace {

IncidenceSeries weekly(const std::vector<double>& v) {
    IncidenceSeries s;
    s.cadence = Cadence::Weekly;
    for (std::size_t i = 0; i < v.size(); ++i)
        s.records.push_back({static_cast<std::int64_t>(i), v[i]});
    return s;
}

IncidenceSeries tone(std::size_t n, double base, double amp1, double f1, double amp2, double f2) {
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j)
        v[j] = base + amp1 * std::cos(2.0 * std::numbers::pi * f1 * static_cast<double>(j)) +
               amp2 * std::cos(2.0 * std::numbers::pi * f2 * static_cast<double>(j));
    return weekly(v);
}

} // namespace

TEST_CASE("dft_magnitude basics") {
    SECTION("zero series -> zero spectrum") {
        const auto sp = dft_magnitude(weekly(std::vector<double>(16, 0.0)));
        for (double m : sp.magnitudes) CHECK(m == 0.0);
    }
    SECTION("constant series -> zero after mean removal") {
        const auto sp = dft_magnitude(weekly(std::vector<double>(16, 41.0)));
        for (double m : sp.magnitudes) CHECK(m == Catch::Approx(0.0).margin(1e-9));
    }
    SECTION("on-grid cosine concentrates at its bin with magnitude a*n/2") {
        const std::size_t n = 520;
        const double a = 7.5;
        const auto sp = dft_magnitude(tone(n, 100.0, a, 1.0 / 52.0, 0.0, 0.25));
        REQUIRE(sp.magnitudes.size() == 261);
        CHECK(sp.magnitudes[10] == Catch::Approx(a * n / 2.0).epsilon(1e-9));
        for (std::size_t k = 0; k <= 260; ++k)
            if (k != 10) CHECK(sp.magnitudes[k] < 1e-7 * a * n);
        CHECK(sp.frequencies[10] == Catch::Approx(10.0 / 520.0));
    }
    SECTION("too short") {
        CHECK_THROWS_AS(dft_magnitude(weekly({1, 2, 3})), DataError);
    }
}

TEST_CASE("Parseval identity within 1e-9 relative") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t n = 64 + 2 * (rng() % 200) + (rep % 2); // even and odd lengths
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(rng() % 1000) / 7.0;
        const auto series = weekly(v);
        const auto sp = dft_magnitude(series);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(n);
        double ssq = 0.0;
        for (double x : v) ssq += (x - mean) * (x - mean);

        // reconstruct the two-sided sum from the one-sided bins
        double total = sp.magnitudes[0] * sp.magnitudes[0];
        const std::size_t half = n / 2;
        for (std::size_t k = 1; k <= half; ++k) {
            const double mk = sp.magnitudes[k] * sp.magnitudes[k];
            const bool self_conjugate = (n % 2 == 0 && k == half);
            total += self_conjugate ? mk : 2.0 * mk;
        }
        CHECK(total == Catch::Approx(static_cast<double>(n) * ssq).epsilon(1e-9));
    }
}

TEST_CASE("top_peaks recovers tones in amplitude order") {
    SECTION("two-tone, both recovered (exhaustive argmax oracle)") {
        const std::size_t n = 520;
        const auto sp = dft_magnitude(tone(n, 50.0, 3.0, 1.0 / 52.0, 8.0, 1.0 / 26.0));
        const auto peaks = top_peaks(sp, 2, 2.0 / static_cast<double>(n));
        REQUIRE(peaks.size() == 2);
        CHECK(peaks[0].bin == 20); // 1/26 had the larger amplitude
        CHECK(peaks[1].bin == 10);
        CHECK(peaks[0].rank == 1);
        CHECK(peaks[1].rank == 2);
        CHECK(peaks[0].frequency == Catch::Approx(1.0 / 26.0));
        CHECK(peaks[1].frequency == Catch::Approx(1.0 / 52.0));
        // exhaustive argmax agrees with the first peak
        std::size_t argmax = 1;
        for (std::size_t k = 1; k + 1 < sp.magnitudes.size(); ++k)
            if (sp.magnitudes[k] > sp.magnitudes[argmax]) argmax = k;
        CHECK(argmax == peaks[0].bin);
    }
    SECTION("single tone, m = 3 returns one peak") {
        const auto sp = dft_magnitude(tone(260, 10.0, 5.0, 1.0 / 52.0, 0.0, 0.3));
        const auto peaks = top_peaks(sp, 3, 0.0);
        CHECK(peaks.size() == 1);
    }
    SECTION("no local maxima") {
        // strictly increasing magnitudes have no interior maximum
        Spectrum sp;
        sp.n = 8;
        sp.frequencies = {0.0, 0.125, 0.25, 0.375, 0.5};
        sp.magnitudes = {0.0, 1.0, 2.0, 3.0, 4.0};
        CHECK_THROWS_AS(top_peaks(sp, 1, 0.0), DataError);
    }
    SECTION("sorted by descending magnitude, all strict local maxima (property)") {
        std::mt19937_64 rng(5);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> v(200);
            for (auto& x : v) x = static_cast<double>(rng() % 1000);
            const auto sp = dft_magnitude(weekly(v));
            std::vector<SpectralPeak> peaks;
            try {
                peaks = top_peaks(sp, 5, 3.0 / 200.0);
            } catch (const DataError&) {
                continue;
            }
            for (std::size_t i = 1; i < peaks.size(); ++i)
                CHECK(peaks[i - 1].magnitude >= peaks[i].magnitude);
            for (const auto& p : peaks) {
                REQUIRE(p.bin >= 1);
                REQUIRE(p.bin + 1 < sp.magnitudes.size());
                CHECK(sp.magnitudes[p.bin] > sp.magnitudes[p.bin - 1]);
                CHECK(sp.magnitudes[p.bin] > sp.magnitudes[p.bin + 1]);
                CHECK(p.period == 1.0 / p.frequency); // stored exactly this way
            }
            for (std::size_t i = 0; i < peaks.size(); ++i)
                for (std::size_t j = i + 1; j < peaks.size(); ++j)
                    CHECK(std::abs(peaks[i].frequency - peaks[j].frequency) >= 3.0 / 200.0);
        }
    }
}

TEST_CASE("paper frequencies map to the reported periods") {
    // 0.005941, 0.017822, 0.0237624 -> 168.32, 56.11, 42.08 weeks
    CHECK(1.0 / 0.005941 == Catch::Approx(168.32).margin(0.005));
    CHECK(1.0 / 0.017822 == Catch::Approx(56.11).margin(0.005));
    CHECK(1.0 / 0.0237624 == Catch::Approx(42.08).margin(0.005));
}

TEST_CASE("peak_to_forcing_seed builds a zero-amplitude forcing") {
    const auto sp = dft_magnitude(tone(520, 50.0, 3.0, 1.0 / 52.0, 8.0, 1.0 / 26.0));
    const auto peaks = top_peaks(sp, 2, 2.0 / 520.0);
    const auto f = peak_to_forcing_seed(peaks, 0.3);
    CHECK(f.alpha() == 0.3);
    REQUIRE(f.size() == 2);
    for (const auto& h : f.harmonics()) CHECK(h.delta == 0.0);
    CHECK(f.harmonics()[0].omega.value() == Catch::Approx(1.0 / 26.0));
    // common period of 1/26 and 1/52 is 52 weeks
    CHECK(f.sigma() == Catch::Approx(52.0));
    // beta is constant alpha0 with zero amplitudes
    CHECK(f(13.7) == Catch::Approx(0.3));

    CHECK_THROWS_AS(peak_to_forcing_seed(peaks, 0.0), DataError);
    CHECK_THROWS_AS(peak_to_forcing_seed({}, 0.3), DataError);
}
