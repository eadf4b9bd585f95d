#pragma once

// Polynomials with exact rational coefficients, polynomial vector fields, and
// the small calculus the analysis needs: Lie brackets, relative degree along a
// constant direction with its leading bracket, scalings of monomials /
// polynomials / fields against scaling assignments, and homogeneous splits.
//
// Canonical form: terms sorted in graded lexicographic order (total degree
// ascending; ties broken by lexicographically greater exponent vector first),
// pairwise distinct exponent vectors, no zero coefficients. Every constructor
// and operation returns canonical polynomials, so equal polynomials compare
// and serialize identically.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "smalltime/rational.hpp"
#include "smalltime/scaling.hpp"

namespace smalltime {

struct Monomial {
  Rat c;
  std::vector<int> e;

  friend bool operator==(const Monomial&, const Monomial&) = default;
};

inline int total_degree(const std::vector<int>& e) {
  int t = 0;
  for (int k : e) t += k;
  return t;
}

inline bool exp_grlex_less(const std::vector<int>& a, const std::vector<int>& b) {
  const int ta = total_degree(a), tb = total_degree(b);
  if (ta != tb) return ta < tb;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] > b[i];
  return false;
}

struct Polynomial {
  int n = 0;
  std::vector<Monomial> terms;

  bool is_zero() const { return terms.empty(); }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;
};

struct PolyVectorField {
  int n = 0;
  std::vector<Polynomial> comp;

  friend bool operator==(const PolyVectorField&, const PolyVectorField&) = default;
};

// --- construction ----------------------------------------------------------

inline Polynomial normalize(int n, std::vector<Monomial> raw) {
  for (const auto& m : raw) {
    if (static_cast<int>(m.e.size()) != n)
      throw std::invalid_argument("monomial exponent vector has wrong length");
    for (int k : m.e)
      if (k < 0) throw std::invalid_argument("negative exponent in monomial");
  }
  std::sort(raw.begin(), raw.end(),
            [](const Monomial& a, const Monomial& b) { return exp_grlex_less(a.e, b.e); });
  Polynomial p{n, {}};
  for (auto& m : raw) {
    if (!p.terms.empty() && p.terms.back().e == m.e)
      p.terms.back().c += m.c;
    else
      p.terms.push_back(std::move(m));
    if (!p.terms.empty() && p.terms.back().c == Rat(0)) p.terms.pop_back();
  }
  return p;
}

inline Polynomial poly_zero(int n) { return Polynomial{n, {}}; }

inline Polynomial poly_const(int n, const Rat& c) {
  return normalize(n, {Monomial{c, std::vector<int>(n, 0)}});
}

inline Polynomial poly_var(int n, int i, const Rat& c = Rat(1)) {
  std::vector<int> e(n, 0);
  e.at(i) = 1;
  return normalize(n, {Monomial{c, e}});
}

inline Polynomial poly_monomial(int n, const Rat& c, std::vector<int> e) {
  return normalize(n, {Monomial{c, std::move(e)}});
}

// --- arithmetic -------------------------------------------------------------

inline Polynomial add(const Polynomial& a, const Polynomial& b) {
  if (a.n != b.n) throw std::invalid_argument("polynomial dimension mismatch");
  std::vector<Monomial> raw = a.terms;
  raw.insert(raw.end(), b.terms.begin(), b.terms.end());
  return normalize(a.n, std::move(raw));
}

inline Polynomial scalar_mul(const Rat& c, const Polynomial& p) {
  if (c == Rat(0)) return poly_zero(p.n);
  Polynomial q = p;
  for (auto& m : q.terms) m.c *= c;
  return q;
}

inline Polynomial neg(const Polynomial& p) { return scalar_mul(Rat(-1), p); }

inline Polynomial sub(const Polynomial& a, const Polynomial& b) { return add(a, neg(b)); }

inline Polynomial mul(const Polynomial& a, const Polynomial& b) {
  if (a.n != b.n) throw std::invalid_argument("polynomial dimension mismatch");
  std::vector<Monomial> raw;
  raw.reserve(a.terms.size() * b.terms.size());
  for (const auto& ma : a.terms)
    for (const auto& mb : b.terms) {
      Monomial m{ma.c * mb.c, ma.e};
      for (int i = 0; i < a.n; ++i) m.e[i] += mb.e[i];
      raw.push_back(std::move(m));
    }
  return normalize(a.n, std::move(raw));
}

inline Polynomial derivative(const Polynomial& p, int i) {
  std::vector<Monomial> raw;
  for (const auto& m : p.terms) {
    if (m.e.at(i) == 0) continue;
    Monomial d{m.c * Rat(m.e[i]), m.e};
    d.e[i] -= 1;
    raw.push_back(std::move(d));
  }
  return normalize(p.n, std::move(raw));
}

// --- evaluation -------------------------------------------------------------

inline double evaluate(const Polynomial& p, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != p.n)
    throw std::invalid_argument("evaluation point has wrong dimension");
  double acc = 0.0;
  for (const auto& m : p.terms) {
    double t = to_double(m.c);
    for (int i = 0; i < p.n; ++i)
      for (int k = 0; k < m.e[i]; ++k) t *= x[i];
    acc += t;
  }
  return acc;
}

inline Rat evaluate_exact(const Polynomial& p, const std::vector<Rat>& x) {
  if (static_cast<int>(x.size()) != p.n)
    throw std::invalid_argument("evaluation point has wrong dimension");
  Rat acc(0);
  for (const auto& m : p.terms) {
    Rat t = m.c;
    for (int i = 0; i < p.n; ++i)
      if (m.e[i] > 0) t *= rat_pow(x[i], m.e[i]);
    acc += t;
  }
  return acc;
}

// Coefficients lowered to double once, for hot numeric loops.
struct CompiledPoly {
  std::vector<double> coeff;
  std::vector<std::vector<int>> exps;
  double operator()(const double* x) const {
    double acc = 0.0;
    for (std::size_t t = 0; t < coeff.size(); ++t) {
      double v = coeff[t];
      const auto& e = exps[t];
      for (std::size_t i = 0; i < e.size(); ++i)
        for (int k = 0; k < e[i]; ++k) v *= x[i];
      acc += v;
    }
    return acc;
  }
};

inline CompiledPoly compile(const Polynomial& p) {
  CompiledPoly cp;
  for (const auto& m : p.terms) {
    cp.coeff.push_back(to_double(m.c));
    cp.exps.push_back(m.e);
  }
  return cp;
}

struct CompiledField {
  int n = 0;
  std::vector<CompiledPoly> comp;
  void operator()(const double* x, double* out) const {
    for (int j = 0; j < n; ++j) out[j] = comp[j](x);
  }
};

inline CompiledField compile(const PolyVectorField& f) {
  CompiledField cf;
  cf.n = f.n;
  for (const auto& p : f.comp) cf.comp.push_back(compile(p));
  return cf;
}

// --- fields -----------------------------------------------------------------

inline PolyVectorField field_zero(int n) {
  return PolyVectorField{n, std::vector<Polynomial>(static_cast<std::size_t>(n), poly_zero(n))};
}

inline PolyVectorField make_field(std::vector<Polynomial> comps) {
  if (comps.empty()) throw std::invalid_argument("empty vector field");
  const int n = static_cast<int>(comps.size());
  for (const auto& p : comps)
    if (p.n != n) throw std::invalid_argument("field components must live in dimension n");
  return PolyVectorField{n, std::move(comps)};
}

inline PolyVectorField constant_field(const std::vector<Rat>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<Polynomial> comps;
  for (int j = 0; j < n; ++j) comps.push_back(poly_const(n, v[j]));
  return PolyVectorField{n, std::move(comps)};
}

inline bool field_is_zero(const PolyVectorField& f) {
  return std::all_of(f.comp.begin(), f.comp.end(),
                     [](const Polynomial& p) { return p.is_zero(); });
}

// The field's value when every component is a constant polynomial.
inline std::optional<std::vector<Rat>> constant_field_value(const PolyVectorField& f) {
  std::vector<Rat> v(static_cast<std::size_t>(f.n), Rat(0));
  for (int j = 0; j < f.n; ++j) {
    const auto& p = f.comp[j];
    if (p.is_zero()) continue;
    if (p.terms.size() != 1 || total_degree(p.terms[0].e) != 0) return std::nullopt;
    v[j] = p.terms[0].c;
  }
  return v;
}

inline PolyVectorField field_add(const PolyVectorField& a, const PolyVectorField& b) {
  if (a.n != b.n) throw std::invalid_argument("field dimension mismatch");
  std::vector<Polynomial> comps;
  for (int j = 0; j < a.n; ++j) comps.push_back(add(a.comp[j], b.comp[j]));
  return PolyVectorField{a.n, std::move(comps)};
}

inline PolyVectorField field_sub(const PolyVectorField& a, const PolyVectorField& b) {
  if (a.n != b.n) throw std::invalid_argument("field dimension mismatch");
  std::vector<Polynomial> comps;
  for (int j = 0; j < a.n; ++j) comps.push_back(sub(a.comp[j], b.comp[j]));
  return PolyVectorField{a.n, std::move(comps)};
}

inline PolyVectorField field_scalar_mul(const Rat& c, const PolyVectorField& f) {
  std::vector<Polynomial> comps;
  for (const auto& p : f.comp) comps.push_back(scalar_mul(c, p));
  return PolyVectorField{f.n, std::move(comps)};
}

inline std::vector<double> evaluate(const PolyVectorField& f, const std::vector<double>& x) {
  std::vector<double> out(static_cast<std::size_t>(f.n));
  for (int j = 0; j < f.n; ++j) out[j] = evaluate(f.comp[j], x);
  return out;
}

inline std::vector<Rat> evaluate_exact(const PolyVectorField& f, const std::vector<Rat>& x) {
  std::vector<Rat> out;
  for (int j = 0; j < f.n; ++j) out.push_back(evaluate_exact(f.comp[j], x));
  return out;
}

// jacobian(f)[j][i] = d f^j / d x^i
inline std::vector<std::vector<Polynomial>> jacobian(const PolyVectorField& f) {
  std::vector<std::vector<Polynomial>> J(static_cast<std::size_t>(f.n));
  for (int j = 0; j < f.n; ++j)
    for (int i = 0; i < f.n; ++i) J[j].push_back(derivative(f.comp[j], i));
  return J;
}

// [X, Y] = DY.X - DX.Y
inline PolyVectorField lie_bracket(const PolyVectorField& X, const PolyVectorField& Y) {
  if (X.n != Y.n) throw std::invalid_argument("field dimension mismatch");
  const int n = X.n;
  std::vector<Polynomial> comps;
  for (int j = 0; j < n; ++j) {
    Polynomial acc = poly_zero(n);
    for (int i = 0; i < n; ++i) {
      acc = add(acc, mul(derivative(Y.comp[j], i), X.comp[i]));
      acc = sub(acc, mul(derivative(X.comp[j], i), Y.comp[i]));
    }
    comps.push_back(std::move(acc));
  }
  return PolyVectorField{n, std::move(comps)};
}

// --- shifts -----------------------------------------------------------------

// p(x + c), expanded exactly.
inline Polynomial compose_shift(const Polynomial& p, const std::vector<Rat>& c) {
  if (static_cast<int>(c.size()) != p.n)
    throw std::invalid_argument("shift point has wrong dimension");
  Polynomial acc = poly_zero(p.n);
  for (const auto& m : p.terms) {
    Polynomial term = poly_const(p.n, m.c);
    for (int i = 0; i < p.n; ++i) {
      if (m.e[i] == 0) continue;
      const Polynomial lin = add(poly_var(p.n, i), poly_const(p.n, c[i]));
      for (int k = 0; k < m.e[i]; ++k) term = mul(term, lin);
    }
    acc = add(acc, term);
  }
  return acc;
}

inline PolyVectorField compose_shift(const PolyVectorField& f, const std::vector<Rat>& c) {
  std::vector<Polynomial> comps;
  for (const auto& p : f.comp) comps.push_back(compose_shift(p, c));
  return PolyVectorField{f.n, std::move(comps)};
}

// --- relative degree and leading bracket ------------------------------------

// R^j(x + lambda v) collected by powers of lambda; coefficient of lambda^d is
// a polynomial in x. Used both to define the relative degree and as an
// independent route to the leading bracket.
inline std::vector<Polynomial> lambda_expansion(const Polynomial& p, const std::vector<Rat>& v) {
  if (static_cast<int>(v.size()) != p.n)
    throw std::invalid_argument("direction has wrong dimension");
  std::vector<std::vector<Monomial>> buckets;  // index = lambda degree
  for (const auto& m : p.terms) {
    // expand prod_i (x_i + lambda v_i)^{e_i}
    std::vector<std::pair<Monomial, int>> partial{{Monomial{m.c, std::vector<int>(p.n, 0)}, 0}};
    for (int i = 0; i < p.n; ++i) {
      if (m.e[i] == 0) continue;
      std::vector<std::pair<Monomial, int>> next;
      // binomial coefficients for (x_i + lambda v_i)^{e_i}
      Rat binom(1);
      for (int k = 0; k <= m.e[i]; ++k) {
        if (k > 0) binom = binom * Rat(m.e[i] - k + 1) / Rat(k);
        if (v[i] == Rat(0) && k > 0) continue;
        const Rat w = binom * rat_pow(v[i], k);
        for (const auto& [mon, d] : partial) {
          Monomial q = mon;
          q.c *= w;
          q.e[i] += m.e[i] - k;
          next.emplace_back(std::move(q), d + k);
        }
      }
      partial = std::move(next);
    }
    for (auto& [mon, d] : partial) {
      if (static_cast<std::size_t>(d) >= buckets.size()) buckets.resize(d + 1);
      buckets[d].push_back(std::move(mon));
    }
  }
  std::vector<Polynomial> out;
  for (auto& b : buckets) out.push_back(normalize(p.n, std::move(b)));
  while (!out.empty() && out.back().is_zero()) out.pop_back();
  return out;
}

// Largest lambda-degree of R(x + lambda v) over all components; 0 for the
// zero field (callers that care can test field_is_zero separately).
inline int relative_degree(const PolyVectorField& R, const std::vector<Rat>& v) {
  int deg = 0;
  for (const auto& p : R.comp) {
    const auto buckets = lambda_expansion(p, v);
    if (!buckets.empty()) deg = std::max(deg, static_cast<int>(buckets.size()) - 1);
  }
  return deg;
}

// Br(V, R) = ad_V^{deg}(R) / deg! for the constant field V = v. Equals the
// lambda^{deg} coefficient of R(x + lambda v).
inline PolyVectorField br(const std::vector<Rat>& v, const PolyVectorField& R) {
  const int d = relative_degree(R, v);
  PolyVectorField acc = R;
  Rat fact(1);
  for (int k = 1; k <= d; ++k) {
    // [V, acc] = D(acc).v for constant V
    std::vector<Polynomial> comps;
    for (int j = 0; j < acc.n; ++j) {
      Polynomial s = poly_zero(acc.n);
      for (int i = 0; i < acc.n; ++i) {
        if (v[i] == Rat(0)) continue;
        s = add(s, scalar_mul(v[i], derivative(acc.comp[j], i)));
      }
      comps.push_back(std::move(s));
    }
    acc = PolyVectorField{acc.n, std::move(comps)};
    fact *= Rat(k);
  }
  return field_scalar_mul(Rat(1) / fact, acc);
}

// --- scalings ---------------------------------------------------------------

inline ScalingExt monomial_scaling(const std::vector<int>& e,
                                   const std::vector<ScalingExt>& a) {
  if (e.size() != a.size()) throw std::invalid_argument("scaling assignment length mismatch");
  ScalingExt acc = ScalingExt::finite(0, 0);
  for (std::size_t i = 0; i < e.size(); ++i)
    acc = add(acc, scalar_mul(e[i], a[i]));
  return acc;
}

// Minimum over monomials in the scaling order; the zero polynomial maps to
// infinity.
inline ScalingExt poly_scaling(const Polynomial& p, const std::vector<ScalingExt>& a) {
  ScalingExt best = ScalingExt::infinity();
  for (const auto& m : p.terms) {
    const ScalingExt s = monomial_scaling(m.e, a);
    if (compare(s, best) == Cmp::Less) best = s;
  }
  return best;
}

inline ScalingExt field_scaling(const PolyVectorField& f, const std::vector<ScalingExt>& a) {
  ScalingExt best = ScalingExt::infinity();
  for (const auto& p : f.comp) {
    const ScalingExt s = poly_scaling(p, a);
    if (compare(s, best) == Cmp::Less) best = s;
  }
  return best;
}

struct HomogeneousSplit {
  Polynomial leading;
  Polynomial rest;
};

// leading = sum of monomials whose scaling equals poly_scaling(p, a) exactly.
inline HomogeneousSplit homogeneous_split(const Polynomial& p,
                                          const std::vector<ScalingExt>& a) {
  const ScalingExt d = poly_scaling(p, a);
  HomogeneousSplit out{poly_zero(p.n), poly_zero(p.n)};
  if (p.is_zero()) return out;
  std::vector<Monomial> lead, rest;
  for (const auto& m : p.terms) {
    if (compare(monomial_scaling(m.e, a), d) == Cmp::Equal)
      lead.push_back(m);
    else
      rest.push_back(m);
  }
  out.leading = normalize(p.n, std::move(lead));
  out.rest = normalize(p.n, std::move(rest));
  return out;
}

inline bool is_homogeneous(const Polynomial& p, const std::vector<ScalingExt>& a,
                           const ScalingExt& d) {
  for (const auto& m : p.terms)
    if (compare(monomial_scaling(m.e, a), d) != Cmp::Equal) return false;
  return true;
}

// --- printing ---------------------------------------------------------------

inline std::string monomial_str(const Monomial& m, bool with_sign = false) {
  const Rat c = with_sign ? rat_abs(m.c) : m.c;
  std::string vars;
  for (std::size_t i = 0; i < m.e.size(); ++i) {
    if (m.e[i] == 0) continue;
    if (!vars.empty()) vars += "*";
    vars += "x" + std::to_string(i + 1);
    if (m.e[i] > 1) vars += "^" + std::to_string(m.e[i]);
  }
  if (vars.empty()) return rat_str(c);
  if (c == Rat(1)) return vars;
  if (c == Rat(-1)) return "-" + vars;
  return rat_str(c) + "*" + vars;
}

inline std::string poly_str(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  for (std::size_t t = 0; t < p.terms.size(); ++t) {
    if (t == 0) {
      out += monomial_str(p.terms[t]);
    } else if (p.terms[t].c < Rat(0)) {
      out += " - " + monomial_str(p.terms[t], /*with_sign=*/true);
    } else {
      out += " + " + monomial_str(p.terms[t]);
    }
  }
  return out;
}

// --- json -------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Monomial& m) {
  j = nlohmann::json{{"c", rat_str(m.c)}, {"e", m.e}};
}

inline nlohmann::json poly_to_json(const Polynomial& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : p.terms) arr.push_back(m);
  return arr;
}

inline nlohmann::json field_to_json(const PolyVectorField& f) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : f.comp) arr.push_back(poly_to_json(p));
  return arr;
}

inline Monomial monomial_from_json(const nlohmann::json& j, int n) {
  Monomial m{rat_parse(j.at("c").get<std::string>()), j.at("e").get<std::vector<int>>()};
  if (static_cast<int>(m.e.size()) != n)
    throw std::invalid_argument("monomial exponent vector has wrong length");
  return m;
}

inline Polynomial poly_from_json(const nlohmann::json& j, int n) {
  std::vector<Monomial> raw;
  for (const auto& jm : j) raw.push_back(monomial_from_json(jm, n));
  return normalize(n, std::move(raw));
}

inline PolyVectorField field_from_json(const nlohmann::json& j, int n) {
  if (static_cast<int>(j.size()) != n)
    throw std::invalid_argument("vector field must have n components");
  std::vector<Polynomial> comps;
  for (const auto& jp : j) comps.push_back(poly_from_json(jp, n));
  return PolyVectorField{n, std::move(comps)};
}

}  // namespace smalltime
