#pragma once

// Exact rational arithmetic for the symbolic layers. Thin wrapper around
// boost::rational over an arbitrary-precision integer, so polynomial shifts,
// products and compositions can never overflow.

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace smalltime {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::rational<Int>;

inline Rat rat(long long p, long long q = 1) { return Rat(Int(p), Int(q)); }

inline double to_double(const Rat& r) {
  return r.numerator().convert_to<double>() / r.denominator().convert_to<double>();
}

inline Rat rat_abs(const Rat& r) { return r < Rat(0) ? -r : r; }

inline Rat rat_pow(const Rat& base, int e) {
  if (e < 0) throw std::invalid_argument("rat_pow: negative exponent");
  Rat acc(1);
  Rat b = base;
  int k = e;
  while (k > 0) {
    if (k & 1) acc *= b;
    b *= b;
    k >>= 1;
  }
  return acc;
}

// Accepts "p", "p/q" and exact decimals like "-3.25". Throws on anything else.
inline Rat rat_parse(const std::string& s) {
  auto fail = [&]() -> Rat {
    throw std::invalid_argument("cannot parse rational: '" + s + "'");
  };
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    neg = (s[i] == '-');
    ++i;
  }
  auto digits = [&](std::size_t& j) -> Int {
    if (j >= s.size() || !std::isdigit(static_cast<unsigned char>(s[j]))) fail();
    Int v = 0;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
      v = v * 10 + (s[j] - '0');
      ++j;
    }
    return v;
  };
  Int num = digits(i);
  Int den = 1;
  if (i < s.size() && s[i] == '/') {
    ++i;
    den = digits(i);
    if (den == 0) fail();
  } else if (i < s.size() && s[i] == '.') {
    ++i;
    std::size_t start = i;
    Int frac = digits(i);
    for (std::size_t k = start; k < i; ++k) {
      num *= 10;
      den *= 10;
    }
    num += frac;
  }
  if (i != s.size()) fail();
  Rat r(num, den);
  return neg ? -r : r;
}

inline std::string rat_str(const Rat& r) {
  std::string out = r.numerator().str();
  if (r.denominator() != 1) out += "/" + r.denominator().str();
  return out;
}

// Exact conversion: every finite double is a dyadic rational.
inline Rat rat_from_double(double x) {
  if (x == 0.0) return Rat(0);
  if (!std::isfinite(x)) throw std::invalid_argument("rat_from_double: non-finite");
  int e = 0;
  double m = std::frexp(x, &e);
  auto im = static_cast<long long>(std::ldexp(m, 53));
  int shift = e - 53;
  Rat r(Int(im), Int(1));
  if (shift >= 0) return r * Rat(Int(1) << shift, Int(1));
  return r / Rat(Int(1) << (-shift), Int(1));
}

// Reduce v against an exact row-echelon basis over the rationals and insert
// it when it enlarges the span; returns whether it did.
inline bool echelon_insert(std::vector<std::vector<Rat>>& basis, std::vector<Rat> v) {
  for (const auto& row : basis) {
    std::size_t p = 0;
    while (p < row.size() && row[p] == Rat(0)) ++p;
    if (p == row.size()) continue;
    if (v[p] != Rat(0)) {
      const Rat f = v[p] / row[p];
      for (std::size_t i = p; i < v.size(); ++i) v[i] -= f * row[i];
    }
  }
  for (const auto& c : v)
    if (c != Rat(0)) {
      basis.push_back(std::move(v));
      return true;
    }
  return false;
}

}  // namespace smalltime
