#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

namespace qpol {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Rational factorial(int n) {
    Int f = 1;
    for (int i = 2; i <= n; ++i)
        f *= i;
    return Rational(f);
}

/// "p" or "p/q" with q > 0.
inline std::string rational_string(const Rational& r) {
    std::string s = numerator(r).str();
    if (denominator(r) != 1)
        s += "/" + denominator(r).str();
    return s;
}

} // namespace qpol
