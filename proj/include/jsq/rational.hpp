#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

#include "jsq/errors.hpp"

namespace jsq {

using Rational = boost::multiprecision::cpp_rational;

/// Exact rational for the shortest decimal that round-trips to `value`,
/// so 0.3 becomes 3/10 rather than the dyadic value of the nearest double.
inline Rational decimal_rational(double value) {
    if (!std::isfinite(value)) throw InvalidParameter("non-finite value has no rational form");
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific);
    if (ec != std::errc{}) throw NumericError("to_chars failed");
    std::string text(buf, end);

    auto epos = text.find('e');
    std::string mantissa = text.substr(0, epos);
    int exponent = std::stoi(text.substr(epos + 1));
    bool negative = !mantissa.empty() && mantissa.front() == '-';
    if (negative) mantissa.erase(0, 1);

    std::string digits;
    int frac_digits = 0;
    bool after_point = false;
    for (char c : mantissa) {
        if (c == '.') {
            after_point = true;
            continue;
        }
        digits.push_back(c);
        if (after_point) ++frac_digits;
    }
    boost::multiprecision::cpp_int numer(digits);
    boost::multiprecision::cpp_int ten_pow = 1;
    int shift = exponent - frac_digits;
    for (int i = 0; i < std::abs(shift); ++i) ten_pow *= 10;
    Rational r = shift >= 0 ? Rational(numer * ten_pow) : Rational(numer, ten_pow);
    return negative ? Rational(-r) : r;
}

inline Rational pow_int(const Rational& base, int exponent) {
    Rational out = 1;
    Rational b = exponent >= 0 ? base : Rational(1) / base;
    for (int e = std::abs(exponent); e > 0; --e) out *= b;
    return out;
}

} // namespace jsq
