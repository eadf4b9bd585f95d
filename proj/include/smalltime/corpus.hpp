#pragma once

// Programmatic builders for the bundled example systems. The JSON corpus under
// corpus/ is generated from these (tools/make_corpus) so data files and tests
// can never drift apart.

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smalltime/poly.hpp"
#include "smalltime/propagation.hpp"

namespace smalltime {

// Underdamped Langevin: coordinates (q_1..q_k, p_1..p_k),
//   dq = p dt,  dp = (-p - grad U(q)) dt + sqrt(2) dB,  U(q) = sum_i q_i^4 / 4.
inline SdeSystem make_langevin(int k) {
  const int n = 2 * k;
  std::vector<Polynomial> comps;
  for (int i = 0; i < k; ++i) comps.push_back(poly_var(n, k + i));  // dq_i = p_i
  for (int i = 0; i < k; ++i) {
    Polynomial cube = poly_monomial(n, Rat(-1), [&] {
      std::vector<int> e(n, 0);
      e[i] = 3;
      return e;
    }());
    comps.push_back(add(poly_var(n, k + i, Rat(-1)), cube));  // dp_i = -p_i - q_i^3
  }
  SdeSystem sys{n, std::vector<double>(n, 0.0), make_field(std::move(comps))};
  for (int i = 0; i < k; ++i) sys.sigma[k + i] = std::sqrt(2.0);
  validate(sys);
  return sys;
}

// The same system recentred at x*: drift x -> P(x + x*).
inline SdeSystem recenter(const SdeSystem& sys, const std::vector<Rat>& xstar) {
  SdeSystem out = sys;
  out.drift = compose_shift(sys.drift, xstar);
  return out;
}

// Cyclic Lorenz '96: P^j = (x^{j+1} - x^{j-2}) x^{j-1} - x^j, noise on the
// first two coordinates.
inline SdeSystem make_lorenz96(int n, int forced = 2) {
  if (n < 4) throw std::invalid_argument("lorenz96 needs n >= 4");
  std::vector<Polynomial> comps;
  for (int j = 0; j < n; ++j) {
    const int jm1 = (j - 1 + n) % n, jm2 = (j - 2 + n) % n, jp1 = (j + 1) % n;
    std::vector<Monomial> raw;
    auto quad = [&](int a, int b, long long c) {
      std::vector<int> e(n, 0);
      e[a] += 1;
      e[b] += 1;
      raw.push_back(Monomial{Rat(c), e});
    };
    quad(jp1, jm1, 1);
    quad(jm2, jm1, -1);
    std::vector<int> lin(n, 0);
    lin[j] = 1;
    raw.push_back(Monomial{Rat(-1), lin});
    comps.push_back(normalize(n, std::move(raw)));
  }
  SdeSystem sys{n, std::vector<double>(n, 0.0), make_field(std::move(comps))};
  for (int j = 0; j < forced && j < n; ++j) sys.sigma[j] = 1.0;
  validate(sys);
  return sys;
}

// Integrator chain: dx^1 = dB, dx^j = x^{j-1} dt.
inline SdeSystem make_ik(int n) {
  std::vector<Polynomial> comps;
  comps.push_back(poly_zero(n));
  for (int j = 1; j < n; ++j) comps.push_back(poly_var(n, j - 1));
  SdeSystem sys{n, std::vector<double>(n, 0.0), make_field(std::move(comps))};
  sys.sigma[0] = 1.0;
  validate(sys);
  return sys;
}

inline SdeSystem make_kolmogorov2() { return make_ik(2); }

// Propagating but hypoelliptically degenerate: dx^1 = dB, dx^2 = x^1 dt,
// dx^3 = x^1 dt — the last two coordinates receive identical forcing.
inline SdeSystem make_npnh() {
  std::vector<Polynomial> comps{poly_zero(3), poly_var(3, 0), poly_var(3, 0)};
  SdeSystem sys{3, {1.0, 0.0, 0.0}, make_field(std::move(comps))};
  validate(sys);
  return sys;
}

// Two forced coordinates feeding a quadratic chain whose last component mixes
// two monomials with tied leading power but different log-log weight.
inline SdeSystem make_rdr() {
  const int n = 4;
  std::vector<Polynomial> comps;
  comps.push_back(poly_zero(n));
  comps.push_back(poly_zero(n));
  comps.push_back(poly_monomial(n, Rat(1), {1, 1, 0, 0}));
  comps.push_back(add(poly_monomial(n, Rat(1), {1, 0, 2, 0}),
                      poly_monomial(n, Rat(1), {5, 0, 1, 0})));
  SdeSystem sys{n, {1.0, 1.0, 0.0, 0.0}, make_field(std::move(comps))};
  validate(sys);
  return sys;
}

// Driftless fully forced Brownian motion.
inline SdeSystem make_bm(int n) {
  SdeSystem sys{n, std::vector<double>(n, 1.0), field_zero(n)};
  validate(sys);
  return sys;
}

// Planar quadratic drift (x^2 - a y^2 + b y, 2x) with noise on y.
inline SdeSystem make_quadratic_planar(const Rat& a, const Rat& b) {
  Polynomial top = add(add(poly_monomial(2, Rat(1), {2, 0}),
                           poly_monomial(2, -a, {0, 2})),
                       poly_var(2, 1, b));
  SdeSystem sys{2, {0.0, 1.0}, make_field({top, poly_var(2, 0, Rat(2))})};
  validate(sys);
  return sys;
}

// Realified Sabra shell model with J complex shells u_m = a_m + i b_m,
// coordinates (a_1, b_1, ..., a_J, b_J):
//   du_m = i 2^m ( conj(u_{m+1}) u_{m+2} - delta conj(u_{m-1}) u_{m+1}
//                  - ((delta-1)/4) u_{m-2} u_{m-1} ) dt - delta 4^m u_m dt
// with out-of-range shells set to zero and noise on the first two shells.
inline SdeSystem make_sabra(int J, const Rat& delta) {
  if (J < 3) throw std::invalid_argument("sabra needs J >= 3");
  const int n = 2 * J;
  using CPoly = std::pair<Polynomial, Polynomial>;  // (re, im)
  auto czero = [&] { return CPoly{poly_zero(n), poly_zero(n)}; };
  auto shell = [&](int m) {  // 1-based shell index
    if (m < 1 || m > J) return czero();
    return CPoly{poly_var(n, 2 * (m - 1)), poly_var(n, 2 * (m - 1) + 1)};
  };
  auto conj = [](CPoly z) { return CPoly{z.first, neg(z.second)}; };
  auto cmul = [](const CPoly& u, const CPoly& v) {
    return CPoly{sub(mul(u.first, v.first), mul(u.second, v.second)),
                 add(mul(u.first, v.second), mul(u.second, v.first))};
  };
  auto caxpy = [](CPoly acc, const Rat& c, const CPoly& z) {
    return CPoly{add(acc.first, scalar_mul(c, z.first)),
                 add(acc.second, scalar_mul(c, z.second))};
  };

  std::vector<Polynomial> comps(static_cast<std::size_t>(n), poly_zero(n));
  for (int m = 1; m <= J; ++m) {
    CPoly combo = czero();
    combo = caxpy(combo, Rat(1), cmul(conj(shell(m + 1)), shell(m + 2)));
    combo = caxpy(combo, -delta, cmul(conj(shell(m - 1)), shell(m + 1)));
    combo = caxpy(combo, -(delta - Rat(1)) / Rat(4), cmul(shell(m - 2), shell(m - 1)));
    const Rat lam = rat_pow(Rat(2), m);
    const Rat nu = delta * rat_pow(Rat(4), m);
    // i * combo = (-Im, Re)
    comps[2 * (m - 1)] =
        add(scalar_mul(lam, neg(combo.second)), poly_var(n, 2 * (m - 1), -nu));
    comps[2 * (m - 1) + 1] =
        add(scalar_mul(lam, combo.first), poly_var(n, 2 * (m - 1) + 1, -nu));
  }
  SdeSystem sys{n, std::vector<double>(n, 0.0), make_field(std::move(comps))};
  sys.sigma[0] = sys.sigma[1] = sys.sigma[2] = sys.sigma[3] = 1.0;
  validate(sys);
  return sys;
}

// Named registry backing the JSON corpus and the test suites.
inline std::map<std::string, SdeSystem> corpus_systems() {
  std::map<std::string, SdeSystem> out;
  out["kolmogorov2"] = make_kolmogorov2();
  out["ik_n3"] = make_ik(3);
  out["ik_n4"] = make_ik(4);
  out["ik_n5"] = make_ik(5);
  out["ik_n8"] = make_ik(8);
  out["lorenz96_n4"] = make_lorenz96(4);
  out["lorenz96_n5"] = make_lorenz96(5);
  out["lorenz96_n6"] = make_lorenz96(6);
  out["lorenz96_n5_defective"] = make_lorenz96(5, /*forced=*/1);
  out["npnh"] = make_npnh();
  out["rdr"] = make_rdr();
  out["bm2"] = make_bm(2);
  out["bm3"] = make_bm(3);
  out["langevin_k1"] = make_langevin(1);
  out["langevin_k2"] = make_langevin(2);
  out["langevin_k2_shifted"] =
      recenter(make_langevin(2), {rat(1, 2), rat(-1, 3), rat(1, 2), Rat(0)});
  out["quadratic_cone"] = make_quadratic_planar(Rat(1), Rat(0));
  out["quadratic_span"] = make_quadratic_planar(Rat(0), Rat(3));
  out["sabra_j4"] = make_sabra(4, rat(1, 2));
  return out;
}

}  // namespace smalltime
