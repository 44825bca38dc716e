#ifndef FLOQFIT_RATIONAL_HPP
#define FLOQFIT_RATIONAL_HPP

#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <string>

#include "floqfit/errors.hpp"

namespace floqfit {

/// Exact rational p/q on int64, normalized to q > 0 and gcd(p, q) = 1.
/// Carries the frequencies of the seasonal forcing so that common periods
/// are exact; decimal strings parse losslessly ("0.017822" -> 8911/500000).
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw DataError("rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
        if (num == 0) den = 1;
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool positive() const { return num > 0; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num == b.num && a.den == b.den;
    }
};

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b, const char* ctx) {
    const __int128 p = static_cast<__int128>(a) * static_cast<__int128>(b);
    if (p > INT64_MAX || p < INT64_MIN)
        throw DataError(std::string("integer overflow while ") + ctx);
    return static_cast<std::int64_t>(p);
}

} // namespace detail

/// Parses "123", "-0.017822", or "p/q" into an exact rational.
/// Decimal expansions are limited to 15 fractional digits so the
/// denominator stays representable.
inline Rational parse_rational(const std::string& text) {
    std::string s = text;
    // strip surrounding whitespace
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) throw DataError("empty numeric field");
    s = s.substr(b, e - b + 1);

    const auto slash = s.find('/');
    if (slash != std::string::npos) {
        const std::string ns = s.substr(0, slash), ds = s.substr(slash + 1);
        std::size_t pos = 0;
        std::int64_t n = 0, d = 0;
        try {
            n = std::stoll(ns, &pos);
            if (pos != ns.size()) throw std::invalid_argument(ns);
            d = std::stoll(ds, &pos);
            if (pos != ds.size()) throw std::invalid_argument(ds);
        } catch (const std::exception&) {
            throw DataError("malformed fraction '" + s + "'");
        }
        return Rational(n, d);
    }

    bool neg = false;
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) { neg = (s[i] == '-'); ++i; }
    std::int64_t intpart = 0, fracpart = 0, scale = 1;
    bool any_digit = false;
    for (; i < s.size() && s[i] != '.' && s[i] != 'e' && s[i] != 'E'; ++i) {
        if (s[i] < '0' || s[i] > '9') throw DataError("malformed number '" + s + "'");
        intpart = detail::checked_mul(intpart, 10, "parsing decimal");
        intpart += s[i] - '0';
        any_digit = true;
    }
    if (i < s.size() && s[i] == '.') {
        ++i;
        int digits = 0;
        for (; i < s.size() && s[i] != 'e' && s[i] != 'E'; ++i) {
            if (s[i] < '0' || s[i] > '9') throw DataError("malformed number '" + s + "'");
            if (++digits > 15) throw DataError("decimal '" + s + "' exceeds 15 fractional digits");
            fracpart = fracpart * 10 + (s[i] - '0');
            scale = detail::checked_mul(scale, 10, "parsing decimal");
            any_digit = true;
        }
    }
    long exp10 = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t pos = 0;
        try {
            exp10 = std::stol(s.substr(i + 1), &pos);
        } catch (const std::exception&) {
            throw DataError("malformed exponent in '" + s + "'");
        }
        if (pos != s.size() - i - 1) throw DataError("malformed exponent in '" + s + "'");
        if (exp10 > 18 || exp10 < -18) throw DataError("exponent out of range in '" + s + "'");
        i = s.size();
    }
    if (!any_digit || i != s.size()) throw DataError("malformed number '" + s + "'");
    std::int64_t n = detail::checked_mul(intpart, scale, "parsing decimal") + fracpart;
    std::int64_t d = scale;
    for (; exp10 > 0; --exp10) n = detail::checked_mul(n, 10, "applying exponent");
    for (; exp10 < 0; ++exp10) d = detail::checked_mul(d, 10, "applying exponent");
    if (neg) n = -n;
    return Rational(n, d);
}

/// Least common multiple of rationals: lcm(a/b, c/d) = lcm(a,c)/gcd(b,d).
inline Rational rational_lcm(const Rational& x, const Rational& y) {
    const std::int64_t xa = x.num < 0 ? -x.num : x.num;
    const std::int64_t ya = y.num < 0 ? -y.num : y.num;
    if (xa == 0 || ya == 0) throw DataError("lcm of zero period");
    const std::int64_t g = std::gcd(xa, ya);
    const std::int64_t n = detail::checked_mul(xa / g, ya, "computing period lcm");
    return Rational(n, std::gcd(x.den, y.den));
}

/// Reciprocal, as needed to convert a frequency into its period.
inline Rational reciprocal(const Rational& x) {
    if (x.num == 0) throw DataError("reciprocal of zero");
    return Rational(x.den, x.num);
}

} // namespace floqfit

#endif
