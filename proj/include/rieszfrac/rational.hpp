#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/gmp.hpp>

#include "rieszfrac/errors.hpp"

namespace rieszfrac {

using Integer = boost::multiprecision::mpz_int;
using Rational = boost::multiprecision::mpq_rational;

// Compile-time switch between the exact rational engine and plain doubles.
template <class Scalar>
struct ScalarTraits {
  static constexpr bool exact = false;
  static double to_double(const Scalar& x) { return static_cast<double>(x); }
  static std::string to_string(const Scalar& x);
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static double to_double(const Rational& x) { return x.convert_to<double>(); }
  static std::string to_string(const Rational& x);
};

template <class Scalar>
double to_double(const Scalar& x) {
  return ScalarTraits<Scalar>::to_double(x);
}

// "p/q" for non-integers, "p" for integers; always reduced.
inline std::string format_rational(const Rational& x) {
  const Integer num = boost::multiprecision::numerator(x);
  const Integer den = boost::multiprecision::denominator(x);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class Scalar>
std::string ScalarTraits<Scalar>::to_string(const Scalar& x) {
  return format_double(static_cast<double>(x));
}

inline std::string ScalarTraits<Rational>::to_string(const Rational& x) {
  return format_rational(x);
}

template <class Scalar>
std::string to_string(const Scalar& x) {
  return ScalarTraits<Scalar>::to_string(x);
}

namespace detail {

inline bool is_integer_literal(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

// Decimal only: GMP would read a leading zero as an octal prefix.
inline Integer decimal_integer(std::string_view s) {
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  const bool negative = s[0] == '-';
  while (i + 1 < s.size() && s[i] == '0') ++i;
  Integer v(std::string(s.substr(i)));
  return negative ? Integer(-v) : v;
}

}  // namespace detail

// Accepts "p/q", "p", and finite decimal literals such as "0.25".
inline Rational parse_rational(std::string_view text) {
  std::string s(text);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
  s = s.substr(start);

  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    const std::string num = s.substr(0, slash);
    const std::string den = s.substr(slash + 1);
    if (!detail::is_integer_literal(num) || !detail::is_integer_literal(den)) {
      throw ParseError("malformed rational '" + s + "'");
    }
    Integer d = detail::decimal_integer(den);
    if (d == 0) throw ParseError("zero denominator in '" + s + "'");
    return Rational(detail::decimal_integer(num), d);
  }
  if (detail::is_integer_literal(s)) return Rational(detail::decimal_integer(s));

  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    const std::size_t frac_len = s.size() - dot - 1;
    if (digits == "-" || digits == "+" || digits.empty()) digits += "0";
    if (!detail::is_integer_literal(digits)) {
      throw ParseError("malformed rational '" + s + "'");
    }
    Integer den = boost::multiprecision::pow(Integer(10), static_cast<unsigned>(frac_len));
    return Rational(detail::decimal_integer(digits), den);
  }
  throw ParseError("malformed rational '" + s + "'");
}

// x^k for integer k (negative allowed when x != 0).
inline Rational pow_int(const Rational& x, long k) {
  if (k < 0) return pow_int(Rational(1) / x, -k);
  Rational result = 1;
  Rational base = x;
  while (k > 0) {
    if (k & 1) result *= base;
    base *= base;
    k >>= 1;
  }
  return result;
}

inline double pow_int(double x, long k) { return std::pow(x, static_cast<double>(k)); }

}  // namespace rieszfrac
