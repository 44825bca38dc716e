#ifndef FLOQFIT_IO_HPP
#define FLOQFIT_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "floqfit/errors.hpp"
#include "floqfit/rational.hpp"

namespace floqfit {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) { out.push_back(cur); cur.clear(); }
        else cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

/// Fixed 17-significant-digit formatting; reports round-trip exactly and
/// two runs with the same inputs produce byte-identical files.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes through a temporary file in the same directory, then renames, so
/// readers never observe partial output.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot open '" + tmp.string() + "' for writing");
        os << content;
        if (!os) throw DataError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("rename to '" + path.string() + "' failed: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// `key = value` file with `#` comments. Values stay strings until asked for;
/// frequency-like fields can be pulled out as exact rationals.
class KeyValueFile {
public:
    KeyValueFile() = default;

    static KeyValueFile parse(const std::string& text, const std::string& origin = "config") {
        KeyValueFile kv;
        kv.origin_ = origin;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw DataError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key.empty())
                throw DataError(origin + ":" + std::to_string(lineno) + ": empty key");
            kv.values_[key] = val;
        }
        return kv;
    }

    static KeyValueFile load(const std::filesystem::path& path) {
        return parse(read_file(path), path.string());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw DataError(origin_ + ": missing key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const {
        const std::string& s = raw(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw DataError(origin_ + ": key '" + key + "': bad number '" + s + "'");
        }
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_long(const std::string& key) const {
        const std::string& s = raw(key);
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw DataError(origin_ + ": key '" + key + "': bad integer '" + s + "'");
        }
    }

    long get_long(const std::string& key, long fallback) const {
        return has(key) ? get_long(key) : fallback;
    }

    Rational get_rational(const std::string& key) const {
        try {
            return parse_rational(raw(key));
        } catch (const DataError& e) {
            throw DataError(origin_ + ": key '" + key + "': " + e.what());
        }
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split(raw(key), ',')) {
            const std::string t = trim(item);
            if (t.empty()) throw DataError(origin_ + ": key '" + key + "': empty list item");
            out.push_back(std::stod(t));
        }
        return out;
    }

    std::vector<Rational> get_rational_list(const std::string& key) const {
        std::vector<Rational> out;
        for (const auto& item : split(raw(key), ','))
            out.push_back(parse_rational(item));
        return out;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return values_; }

    /// Stable FNV-1a hash of the canonical (sorted) key=value rendering,
    /// recorded in reports as config provenance.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ULL;
            }
        };
        for (const auto& [k, v] : values_) { mix(k); mix("="); mix(v); mix("\n"); }
        return h;
    }

private:
    std::map<std::string, std::string> values_;
    std::string origin_ = "config";
};

} // namespace floqfit

#endif
