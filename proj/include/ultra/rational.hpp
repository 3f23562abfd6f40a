#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

#include "ultra/errors.hpp"

namespace ultra {

// Exact rational arithmetic.  Distances and levels are never floats: every
// comparison in the library is decided exactly, so all arithmetic goes
// through this type.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Renders p/q with q > 0 and gcd(p,q) = 1, as "p" when q == 1.
inline std::string rat_str(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

// Accepts "p", "-p", "p/q" with optional surrounding whitespace.
inline Rational parse_rational(std::string_view text) {
    size_t a = text.find_first_not_of(" \t\r\n");
    size_t b = text.find_last_not_of(" \t\r\n");
    if (a == std::string_view::npos)
        throw MalformedInputError("empty rational literal");
    text = text.substr(a, b - a + 1);

    const auto bad = [&] {
        return MalformedInputError("bad rational literal '" + std::string(text) + "'");
    };
    const auto is_int = [](std::string_view s) {
        if (!s.empty() && (s[0] == '-' || s[0] == '+')) s.remove_prefix(1);
        if (s.empty()) return false;
        for (char c : s)
            if (c < '0' || c > '9') return false;
        return true;
    };

    size_t slash = text.find('/');
    try {
        if (slash == std::string_view::npos) {
            if (!is_int(text)) throw bad();
            return Rational(BigInt(std::string(text)));
        }
        std::string_view ns = text.substr(0, slash);
        std::string_view ds = text.substr(slash + 1);
        if (!is_int(ns) || !is_int(ds)) throw bad();
        BigInt num{std::string(ns)}, den{std::string(ds)};
        if (den == 0) throw MalformedInputError("zero denominator in '" + std::string(text) + "'");
        return Rational(num, den);
    } catch (const std::exception& e) {
        if (dynamic_cast<const Error*>(&e)) throw;
        throw bad();
    }
}

// r^k for k >= 0.
inline Rational rat_pow(const Rational& r, unsigned k) {
    Rational acc{1};
    Rational base = r;
    while (k) {
        if (k & 1) acc *= base;
        base *= base;
        k >>= 1;
    }
    return acc;
}

} // namespace ultra
