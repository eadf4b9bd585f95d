#pragma once

// The scaling algebra: pairs (a1, a2) of half-integers ordered so that a larger
// second component means a *smaller* element when the first components tie,
// extended with an absorbing infinity. A pair evaluates against a small
// parameter as eps^{a1} * (log log eps^{-1})^{a2}, which is what makes the
// order the right one: a <= b exactly when eval(a) >= eval(b) for all small eps.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace smalltime {

// Stored as numerators over 2: value = (num1/2, num2/2).
struct ScalingPair {
  long long num1 = 0;
  long long num2 = 0;

  friend bool operator==(const ScalingPair&, const ScalingPair&) = default;
};

struct ScalingExt {
  bool is_inf = false;
  ScalingPair pair{};  // meaningful only when !is_inf

  static ScalingExt infinity() { return ScalingExt{true, {}}; }
  static ScalingExt finite(long long num1, long long num2) {
    return ScalingExt{false, {num1, num2}};
  }

  friend bool operator==(const ScalingExt& a, const ScalingExt& b) {
    if (a.is_inf || b.is_inf) return a.is_inf == b.is_inf;
    return a.pair == b.pair;
  }
};

enum class Cmp { Less, Equal, Greater };

inline Cmp compare(const ScalingPair& a, const ScalingPair& b) {
  if (a.num1 != b.num1) return a.num1 < b.num1 ? Cmp::Less : Cmp::Greater;
  if (a.num2 == b.num2) return Cmp::Equal;
  // First components tie: the larger log-log power is the smaller element.
  return a.num2 > b.num2 ? Cmp::Less : Cmp::Greater;
}

inline Cmp compare(const ScalingExt& a, const ScalingExt& b) {
  if (a.is_inf && b.is_inf) return Cmp::Equal;
  if (a.is_inf) return Cmp::Greater;
  if (b.is_inf) return Cmp::Less;
  return compare(a.pair, b.pair);
}

inline bool scaling_less(const ScalingExt& a, const ScalingExt& b) {
  return compare(a, b) == Cmp::Less;
}

inline ScalingPair add(const ScalingPair& a, const ScalingPair& b) {
  return {a.num1 + b.num1, a.num2 + b.num2};
}

inline ScalingPair sub(const ScalingPair& a, const ScalingPair& b) {
  return {a.num1 - b.num1, a.num2 - b.num2};
}

inline ScalingExt add(const ScalingExt& a, const ScalingExt& b) {
  if (a.is_inf || b.is_inf) return ScalingExt::infinity();
  return ScalingExt{false, add(a.pair, b.pair)};
}

// k is a multiplicity (monomial exponent), so k >= 0; 0 * infinity = (0, 0).
inline ScalingExt scalar_mul(long long k, const ScalingExt& a) {
  if (k < 0) throw std::invalid_argument("scalar_mul: negative multiplicity");
  if (k == 0) return ScalingExt::finite(0, 0);
  if (a.is_inf) return ScalingExt::infinity();
  return ScalingExt::finite(k * a.pair.num1, k * a.pair.num2);
}

// eps^{a1} * (log log eps^{-1})^{a2}; needs 0 < eps < e^{-1} so the log-log
// factor is positive. Negative a2 is allowed (remainder exponents use it).
inline double eval_epsilon(const ScalingPair& a, double eps) {
  if (!(eps > 0.0 && eps < std::exp(-1.0)))
    throw std::domain_error("eval_epsilon: eps must lie in (0, e^-1)");
  const double ll = std::log(std::log(1.0 / eps));
  return std::pow(eps, static_cast<double>(a.num1) / 2.0) *
         std::pow(ll, static_cast<double>(a.num2) / 2.0);
}

inline double eval_epsilon(const ScalingExt& a, double eps) {
  if (a.is_inf) {
    if (!(eps > 0.0 && eps < std::exp(-1.0)))
      throw std::domain_error("eval_epsilon: eps must lie in (0, e^-1)");
    return 0.0;
  }
  return eval_epsilon(a.pair, eps);
}

inline std::string format_half(long long num) {
  if (num % 2 == 0) return std::to_string(num / 2);
  return std::to_string(num) + "/2";
}

inline std::string format(const ScalingPair& a) {
  return "(" + format_half(a.num1) + ", " + format_half(a.num2) + ")";
}

inline std::string format(const ScalingExt& a) {
  return a.is_inf ? "inf" : format(a.pair);
}

inline void to_json(nlohmann::json& j, const ScalingExt& a) {
  if (a.is_inf)
    j = nlohmann::json{{"inf", true}};
  else
    j = nlohmann::json{{"num1", a.pair.num1}, {"num2", a.pair.num2}};
}

inline void from_json(const nlohmann::json& j, ScalingExt& a) {
  if (j.contains("inf")) {
    if (!j.at("inf").get<bool>())
      throw std::invalid_argument("scaling: \"inf\" must be true when present");
    a = ScalingExt::infinity();
    return;
  }
  a = ScalingExt::finite(j.at("num1").get<long long>(), j.at("num2").get<long long>());
}

}  // namespace smalltime
