#pragma once

// Saturation of reachable directions. Starting from the noise directions, the
// family is closed under leading brackets br(v, Q) of scalable directions v
// with the drift and with previously derived flows:
//   * only directions realizable with both signs can be scaled, because the
//     construction adds a large multiple of v first and removes it after;
//   * the coefficient attached to the bracket is alpha^d for the relative
//     degree d, so the new element is two-sided exactly when the partner flow
//     was, or d is odd;
//   * constant brackets become rays, non-constant ones become derived flows
//     that later rounds may bracket again.
// Elements are deduplicated by exact rational proportionality; a one-sided
// ray meeting its opposite is merged into a two-sided one. The family is
// exactly controllable when the two-sided rays span R^n over the rationals,
// and the report carries that rational basis as the certificate.
//
// Sweeps stop as soon as the two-sided rays reach full rank (the verdict can
// only be affirmed, never retracted, by further elements), when a sweep adds
// nothing, or at the sweep cap. Quadratic drifts can mint fresh rational ray
// lines indefinitely, so a literal set-theoretic fixed point need not exist.
//
// The numeric companions check that the construction is honest: the endpoint
// error of the realizing flows must scale as predicted, and a randomized
// control probe can search for target balls directly.

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smalltime/numerics.hpp"
#include "smalltime/poly.hpp"
#include "smalltime/propagation.hpp"
#include "smalltime/rational.hpp"
#include "smalltime/rng.hpp"

namespace smalltime {

struct FamilyElement {
  bool is_ray = false;
  bool symmetric = false;  // realizable with both signs
  std::vector<Rat> ray;    // set when is_ray
  PolyVectorField field;   // always set (rays are constant fields)
  std::string provenance;  // human-readable derivation chain
};

struct SaturationOptions {
  int max_steps = 0;  // 0: use 2n
};

struct SaturationReport {
  std::vector<FamilyElement> elements;
  bool exact_controllable = false;
  bool reached_fixed_point = false;
  int steps_used = 0;
  std::vector<std::vector<Rat>> basis;  // echelonized two-sided rays
  std::vector<int> basis_index;         // elements contributing to the basis
};

namespace detail {

// identity of the line spanned by a field: all coefficients divided by the
// leading one; `sign` distinguishes the two rays on that line
struct LineKey {
  std::string key;
  int sign = 0;
};

inline LineKey line_key(const PolyVectorField& f) {
  Rat lead(0);
  for (const auto& p : f.comp)
    for (const auto& mn : p.terms)
      if (lead == Rat(0)) lead = mn.c;
  LineKey out;
  if (lead == Rat(0)) return out;
  out.sign = lead > Rat(0) ? 1 : -1;
  std::ostringstream os;
  for (int j = 0; j < f.n; ++j) {
    os << '#' << j << ':';
    for (const auto& mn : f.comp[static_cast<std::size_t>(j)].terms) {
      os << rat_str(mn.c / lead) << '[';
      for (int e : mn.e) os << e << ',';
      os << ']';
    }
  }
  out.key = os.str();
  return out;
}

}  // namespace detail

inline SaturationReport saturate(const SdeSystem& sys, SaturationOptions opt = {}) {
  validate(sys);
  const int n = sys.n;
  const std::size_t nu = static_cast<std::size_t>(n);
  const int max_steps = opt.max_steps > 0 ? opt.max_steps : 2 * n;

  SaturationReport rep;
  std::map<std::string, std::size_t> lines;  // line key -> element index

  // insert a candidate direction; returns true when the family changed
  const auto insert = [&](PolyVectorField f, bool symmetric, std::string prov) {
    if (field_is_zero(f)) return false;
    const auto lk = detail::line_key(f);
    const auto it = lines.find(lk.key);
    if (it == lines.end()) {
      FamilyElement el;
      el.symmetric = symmetric;
      const auto cv = constant_field_value(f);
      if (cv) {
        el.is_ray = true;
        el.ray = *cv;
      }
      el.field = std::move(f);
      el.provenance = std::move(prov);
      lines.emplace(lk.key, rep.elements.size());
      rep.elements.push_back(std::move(el));
      return true;
    }
    FamilyElement& el = rep.elements[it->second];
    if (el.symmetric) return false;
    const auto stored = detail::line_key(el.field);
    if (symmetric || stored.sign != lk.sign) {
      // two-sided now: either directly, or a one-sided ray met its opposite
      el.symmetric = true;
      el.provenance += " | " + prov;
      return true;
    }
    return false;
  };

  for (int l = 0; l < n; ++l)
    if (sys.sigma[static_cast<std::size_t>(l)] > 0.0) {
      std::vector<Rat> v(nu, Rat(0));
      v[static_cast<std::size_t>(l)] = rat_from_double(sys.sigma[static_cast<std::size_t>(l)]);
      std::ostringstream prov;
      prov << "noise e" << l;
      insert(constant_field(v), true, prov.str());
    }

  for (int step = 1; step <= max_steps; ++step) {
    rep.steps_used = step;
    bool changed = false;
    const std::size_t count = rep.elements.size();  // freeze: new elements join next sweep
    for (std::size_t ei = 0; ei < count; ++ei) {
      if (!(rep.elements[ei].is_ray && rep.elements[ei].symmetric)) continue;
      const std::vector<Rat> v = rep.elements[ei].ray;
      const std::string vname = rep.elements[ei].provenance;
      // bracket partners: the base drift, then every derived flow found so far
      for (std::size_t qi = 0; qi <= count; ++qi) {
        const bool base = qi == count;
        if (!base && (rep.elements[qi].is_ray)) continue;
        const PolyVectorField& Q = base ? sys.drift : rep.elements[qi].field;
        const bool q_sym = base ? false : rep.elements[qi].symmetric;
        const int d = relative_degree(Q, v);
        if (d == 0) continue;
        const auto B = br(v, Q);
        if (field_is_zero(B)) continue;
        const bool sym = q_sym || (d % 2 == 1);
        std::ostringstream prov;
        prov << "br^" << d << "(" << vname << "; "
             << (base ? std::string("drift") : rep.elements[qi].provenance) << ")";
        changed = insert(B, sym, prov.str()) || changed;
      }
    }
    if (!changed) {
      rep.reached_fixed_point = true;
      break;
    }
    // full span settles the decision; later sweeps could only rediscover it
    std::vector<std::vector<Rat>> rank_probe;
    for (const auto& el : rep.elements)
      if (el.is_ray && el.symmetric) echelon_insert(rank_probe, el.ray);
    if (static_cast<int>(rank_probe.size()) == n) {
      rep.reached_fixed_point = true;
      break;
    }
  }

  for (std::size_t ei = 0; ei < rep.elements.size(); ++ei) {
    const auto& el = rep.elements[ei];
    if (el.is_ray && el.symmetric && echelon_insert(rep.basis, el.ray))
      rep.basis_index.push_back(static_cast<int>(ei));
  }
  rep.exact_controllable = static_cast<int>(rep.basis.size()) == n;
  return rep;
}

// --- realizability checks ------------------------------------------------------

struct RealizationCheck {
  std::vector<double> lambdas;
  std::vector<double> errors;
  std::vector<double> scaled;  // lambda * error (ray case)
  bool stable = false;         // scaled errors within a factor 3 band
  bool decreasing = false;     // raw errors strictly decreasing
};

// Seeded ray j: the endpoint of phi_{s/lambda}(drift + lambda alpha sigma_j e_j)
// from x must approach x + s alpha sigma_j e_j at rate C / lambda, with a
// stable constant.
inline RealizationCheck ray_realization(const SdeSystem& sys, int j, double alpha, double s,
                                        const std::vector<double>& x,
                                        std::vector<double> lambdas = {10.0, 100.0, 1000.0}) {
  validate(sys);
  if (j < 0 || j >= sys.n || !(sys.sigma[static_cast<std::size_t>(j)] > 0.0))
    throw std::invalid_argument("ray_realization: j must be a noise coordinate");
  const std::size_t nu = static_cast<std::size_t>(sys.n);
  const std::vector<double> nosig(nu, 0.0);

  RealizationCheck chk;
  chk.lambdas = std::move(lambdas);
  for (double lam : chk.lambdas) {
    std::vector<Rat> c(nu, Rat(0));
    c[static_cast<std::size_t>(j)] =
        rat_from_double(lam * alpha * sys.sigma[static_cast<std::size_t>(j)]);
    const auto mod = field_add(sys.drift, constant_field(c));
    const auto p = flow(compile(mod), nosig, nullptr, x, s / lam);
    if (p.dead) {
      chk.errors.push_back(std::numeric_limits<double>::infinity());
      chk.scaled.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < nu; ++i) {
      const double want =
          x[i] + (static_cast<int>(i) == j ? s * alpha * sys.sigma[i] : 0.0);
      err += (p.terminal()[i] - want) * (p.terminal()[i] - want);
    }
    err = std::sqrt(err);
    chk.errors.push_back(err);
    chk.scaled.push_back(lam * err);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double c : chk.scaled) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  chk.stable = std::isfinite(hi) && (lo == 0.0 ? hi == 0.0 : hi / lo <= 3.0);
  chk.decreasing = true;
  for (std::size_t i = 1; i < chk.errors.size(); ++i)
    if (!(chk.errors[i] < chk.errors[i - 1])) chk.decreasing = false;
  return chk;
}

// Derived flow br(v, R): starting from x, adding lambda alpha v, flowing R for
// s / lambda^d and removing lambda alpha v must approach the time-s flow of
// alpha^d br(v, R) from x as lambda grows.
inline RealizationCheck flow_realization(const PolyVectorField& R, const std::vector<Rat>& v,
                                         double alpha, double s, const std::vector<double>& x,
                                         std::vector<double> lambdas = {10.0, 100.0}) {
  const std::size_t nu = static_cast<std::size_t>(R.n);
  if (v.size() != nu || x.size() != nu)
    throw std::invalid_argument("flow_realization: dimension mismatch");
  const int d = relative_degree(R, v);
  if (d == 0) throw std::invalid_argument("flow_realization: direction has relative degree 0");
  const auto B = br(v, R);
  const std::vector<double> nosig(nu, 0.0);

  const auto scaled_B = field_scalar_mul(rat_from_double(std::pow(alpha, d)), B);
  const auto target_path = flow(compile(scaled_B), nosig, nullptr, x, s);
  if (target_path.dead)
    throw std::domain_error("flow_realization: target flow exploded");
  const auto& target = target_path.terminal();

  RealizationCheck chk;
  chk.lambdas = std::move(lambdas);
  for (double lam : chk.lambdas) {
    std::vector<double> start = x;
    for (std::size_t i = 0; i < nu; ++i) start[i] += lam * alpha * to_double(v[i]);
    const auto p = flow(compile(R), nosig, nullptr, start, s / std::pow(lam, d));
    if (p.dead) {
      chk.errors.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < nu; ++i) {
      const double got = p.terminal()[i] - lam * alpha * to_double(v[i]);
      err += (got - target[i]) * (got - target[i]);
    }
    chk.errors.push_back(std::sqrt(err));
  }
  chk.decreasing = true;
  for (std::size_t i = 1; i < chk.errors.size(); ++i)
    if (!(chk.errors[i] < chk.errors[i - 1])) chk.decreasing = false;
  for (double e : chk.errors) chk.scaled.push_back(e);
  chk.stable = chk.decreasing;
  return chk;
}

// --- randomized reachability probe ------------------------------------------------

struct ProbeOptions {
  double t = 1.0;
  int attempts = 400;
  int max_segments = 8;
  double mag_lo = 1e-2;
  double mag_hi = 1e3;
  std::uint64_t seed = 23;
  int steps = 2048;
  double explosion = 1e8;
};

struct ProbeResult {
  bool reached = false;
  int attempts_used = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  std::vector<double> witness;
  double witness_time = 0.0;
  PiecewiseLinearControl control;
};

namespace detail {

// One randomized piecewise-linear push through the noise coordinates, with
// log-uniform slope magnitudes so both gentle and violent pushes are tried.
inline PiecewiseLinearControl probe_control(const SdeSystem& sys, const ProbeOptions& opt,
                                            std::uint64_t attempt) {
  const std::size_t nu = static_cast<std::size_t>(sys.n);
  RngStream rng(opt.seed, attempt);
  const int nseg = static_cast<int>(rng.uniform_int(1, opt.max_segments));
  std::vector<std::vector<double>> slopes;
  for (int s = 0; s < nseg; ++s) {
    std::vector<double> sl(nu, 0.0);
    for (std::size_t i = 0; i < nu; ++i) {
      if (!(sys.sigma[i] > 0.0)) continue;
      const double mag = std::exp(rng.uniform(std::log(opt.mag_lo), std::log(opt.mag_hi)));
      sl[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
    }
    slopes.push_back(sl);
  }
  return PiecewiseLinearControl::from_slopes(
      0.0, std::vector<double>(static_cast<std::size_t>(nseg), opt.t / nseg), slopes);
}

}  // namespace detail

// Random control probe: a target counts as reached when any trajectory point
// enters the ball. Exploding attempts simply fail.
inline ProbeResult reachability_probe(const SdeSystem& sys, const std::vector<double>& center,
                                      double radius, ProbeOptions opt = {}) {
  validate(sys);
  const std::size_t nu = static_cast<std::size_t>(sys.n);
  if (center.size() != nu) throw std::invalid_argument("reachability_probe: dimension mismatch");
  if (!(radius > 0.0)) throw std::invalid_argument("reachability_probe: radius must be positive");

  const CompiledField drift = compile(sys.drift);
  const std::vector<double> x0(nu, 0.0);
  FlowOptions fopt;
  fopt.steps = opt.steps;
  fopt.explosion = opt.explosion;

  ProbeResult res;
  for (int a = 0; a < opt.attempts; ++a) {
    ++res.attempts_used;
    const auto u = detail::probe_control(sys, opt, static_cast<std::uint64_t>(a));
    const auto p = flow(drift, sys.sigma, &u, x0, opt.t, fopt);
    for (std::size_t k = 0; k < p.x.size(); ++k) {
      double dist = 0.0;
      for (std::size_t i = 0; i < nu; ++i)
        dist += (p.x[k][i] - center[i]) * (p.x[k][i] - center[i]);
      dist = std::sqrt(dist);
      if (dist < res.best_distance) res.best_distance = dist;
      if (dist <= radius) {
        res.reached = true;
        res.witness = p.x[k];
        res.witness_time = p.t[k];
        res.control = u;
        return res;
      }
    }
  }
  return res;
}

}  // namespace smalltime
