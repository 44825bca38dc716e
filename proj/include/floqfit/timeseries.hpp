#ifndef FLOQFIT_TIMESERIES_HPP
#define FLOQFIT_TIMESERIES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "floqfit/errors.hpp"
#include "floqfit/io.hpp"

namespace floqfit {

enum class Cadence { Daily, Weekly };
enum class Provenance { Raw, Filtered, Synthetic };

inline const char* to_string(Cadence c) { return c == Cadence::Daily ? "daily" : "weekly"; }
inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Raw: return "raw";
        case Provenance::Filtered: return "filtered";
        default: return "synthetic";
    }
}

struct IncidenceRecord {
    std::int64_t time_index = 0; // days or weeks since series start
    double count = 0.0;          // cases per period, >= 0
};

/// Uniformly spaced incidence counts. Indices are abstract day/week numbers;
/// calendar mapping is a presentation concern handled by the CLI only.
struct IncidenceSeries {
    Cadence cadence = Cadence::Weekly;
    Provenance provenance = Provenance::Raw;
    std::vector<IncidenceRecord> records;

    std::size_t size() const { return records.size(); }
    double count(std::size_t i) const { return records[i].count; }
    std::int64_t first_index() const { return records.front().time_index; }
    std::int64_t last_index() const { return records.back().time_index; }

    std::vector<double> counts() const {
        std::vector<double> v(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) v[i] = records[i].count;
        return v;
    }
};

struct FilterSpec {
    int window = 13; // odd, in weeks
};

/// Checks uniform unit spacing, nonnegative counts, and minimum length.
inline void validate(const IncidenceSeries& s) {
    if (s.records.size() < 2) throw DataError("series must contain at least 2 records");
    for (std::size_t i = 0; i < s.records.size(); ++i) {
        if (s.records[i].count < 0.0)
            throw DataError("negative count at index " + std::to_string(s.records[i].time_index));
        if (i > 0 && s.records[i].time_index != s.records[i - 1].time_index + 1)
            throw DataError("series indices must advance by 1 (gap after index " +
                            std::to_string(s.records[i - 1].time_index) + ")");
    }
}

namespace detail {

inline bool parse_csv_record(const std::string& line, std::int64_t& idx, double& cnt) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) return false;
    const std::string a = trim(line.substr(0, comma));
    const std::string b = trim(line.substr(comma + 1));
    try {
        std::size_t pos = 0;
        idx = std::stoll(a, &pos);
        if (pos != a.size()) return false;
        cnt = std::stod(b, &pos);
        if (pos != b.size()) return false;
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

} // namespace detail

/// Reads `time_index,count` CSV. An optional non-numeric header line is
/// skipped; `#` lines may carry cadence/provenance metadata written by
/// write_series_csv. Records are sorted by index and validated.
inline IncidenceSeries read_series_csv(const std::filesystem::path& path,
                                       Cadence default_cadence = Cadence::Weekly,
                                       Provenance default_provenance = Provenance::Raw) {
    std::istringstream is(read_file(path));
    IncidenceSeries out;
    out.cadence = default_cadence;
    out.provenance = default_provenance;

    std::string line;
    int lineno = 0;
    bool saw_record = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            // metadata comment: "# cadence=weekly provenance=filtered"
            std::istringstream meta(t.substr(1));
            std::string tok;
            while (meta >> tok) {
                if (tok == "cadence=daily") out.cadence = Cadence::Daily;
                else if (tok == "cadence=weekly") out.cadence = Cadence::Weekly;
                else if (tok == "provenance=raw") out.provenance = Provenance::Raw;
                else if (tok == "provenance=filtered") out.provenance = Provenance::Filtered;
                else if (tok == "provenance=synthetic") out.provenance = Provenance::Synthetic;
            }
            continue;
        }
        std::int64_t idx;
        double cnt;
        if (!detail::parse_csv_record(t, idx, cnt)) {
            if (!saw_record) continue; // tolerated header line
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed record '" + t + "'");
        }
        if (cnt < 0.0)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": negative count");
        if (!std::isfinite(cnt))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-finite count");
        out.records.push_back({idx, cnt});
        saw_record = true;
    }
    if (out.records.empty()) throw DataError(path.string() + ": no records");

    std::sort(out.records.begin(), out.records.end(),
              [](const IncidenceRecord& a, const IncidenceRecord& b) { return a.time_index < b.time_index; });
    for (std::size_t i = 1; i < out.records.size(); ++i)
        if (out.records[i].time_index == out.records[i - 1].time_index)
            throw DataError(path.string() + ": duplicate time index " +
                            std::to_string(out.records[i].time_index));
    validate(out);
    return out;
}

/// Daily-cadence ingest with per-line diagnostics; see read_series_csv for
/// the accepted grammar.
inline IncidenceSeries ingest_daily(const std::filesystem::path& path) {
    IncidenceSeries s = read_series_csv(path, Cadence::Daily, Provenance::Raw);
    s.cadence = Cadence::Daily;
    return s;
}

inline std::string series_to_csv(const IncidenceSeries& s) {
    std::ostringstream os;
    os << "# cadence=" << to_string(s.cadence) << " provenance=" << to_string(s.provenance) << "\n";
    os << "time_index,count\n";
    for (const auto& r : s.records)
        os << r.time_index << "," << format_double(r.count) << "\n";
    return os.str();
}

inline void write_series_csv(const std::filesystem::path& path, const IncidenceSeries& s) {
    atomic_write(path, series_to_csv(s));
}

/// Week k = sum of days 7k..7k+6 counted from the first record; a trailing
/// partial week is dropped.
inline IncidenceSeries aggregate_weekly(const IncidenceSeries& daily) {
    if (daily.cadence != Cadence::Daily) throw DataError("aggregate_weekly expects a daily series");
    if (daily.size() < 7) throw DataError("aggregate_weekly needs at least 7 days");
    IncidenceSeries weekly;
    weekly.cadence = Cadence::Weekly;
    weekly.provenance = daily.provenance;
    const std::size_t weeks = daily.size() / 7;
    weekly.records.reserve(weeks);
    for (std::size_t w = 0; w < weeks; ++w) {
        double sum = 0.0;
        for (std::size_t d = 0; d < 7; ++d) sum += daily.records[7 * w + d].count;
        weekly.records.push_back({static_cast<std::int64_t>(w), sum});
    }
    if (weekly.records.size() < 2) throw DataError("aggregation produced fewer than 2 weeks");
    return weekly;
}

/// Centered moving average; at the edges the window shrinks symmetrically to
/// the largest centered window that fits, so the output has no phase delay
/// and the same length as the input.
inline IncidenceSeries moving_average(const IncidenceSeries& s, const FilterSpec& spec) {
    if (spec.window <= 0 || spec.window % 2 == 0)
        throw DataError("moving-average window must be a positive odd integer");
    if (static_cast<std::size_t>(spec.window) > s.size())
        throw DataError("moving-average window exceeds series length");
    const std::size_t n = s.size();
    const int half = spec.window / 2;
    IncidenceSeries out;
    out.cadence = s.cadence;
    out.provenance = Provenance::Filtered;
    out.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int hi = std::min<int>({half, static_cast<int>(i), static_cast<int>(n - 1 - i)});
        double sum = 0.0;
        for (int j = -hi; j <= hi; ++j) sum += s.records[i + j].count;
        out.records[i] = {s.records[i].time_index, sum / (2 * hi + 1)};
    }
    return out;
}

inline std::pair<IncidenceSeries, IncidenceSeries>
split_train_test(const IncidenceSeries& s, std::size_t n_train) {
    if (n_train == 0 || n_train >= s.size())
        throw DataError("n_train must satisfy 0 < n_train < series length");
    IncidenceSeries train{s.cadence, s.provenance, {}}, test{s.cadence, s.provenance, {}};
    train.records.assign(s.records.begin(), s.records.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.records.assign(s.records.begin() + static_cast<std::ptrdiff_t>(n_train), s.records.end());
    return {std::move(train), std::move(test)};
}

/// Piecewise-linear evaluation at time t (in the series' own index units,
/// absolute, so a split-off test series keeps its original domain).
inline double interpolate(const IncidenceSeries& s, double t) {
    const double t0 = static_cast<double>(s.first_index());
    const double t1 = static_cast<double>(s.last_index());
    if (!(t >= t0 && t <= t1))
        throw DataError("interpolation time outside series domain");
    const double u = t - t0;
    const auto k = static_cast<std::size_t>(std::floor(u));
    if (k + 1 >= s.size()) return s.records.back().count;
    const double frac = u - static_cast<double>(k);
    return s.records[k].count * (1.0 - frac) + s.records[k + 1].count * frac;
}

} // namespace floqfit

#endif
