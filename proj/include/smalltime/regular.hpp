#pragma once

// Boundary regularity pipeline. A boundary point of a domain is certified
// regular by composing four stages, each of which can only abstain, never
// overrule a later one:
//   1. recentre the system at the boundary point (exact polynomial shift);
//   2. run the distributional scalings; a defective system ends the run;
//   3. pass the domain through the scaling map and keep what survives: a
//      graph boundary term survives when its exponent-weighted scaling
//      matches the graph coordinate's, a super-level set keeps the minimal
//      power-homogeneous part of its defining function. The surviving
//      inequality, fattened by a fixed margin and intersected with the unit
//      box, is the uniform open target;
//   4. establish that the scaling-limit dynamics reaches the target, either
//      by exact controllability of the saturated direction family or by an
//      explicit randomized control that lands inside it.
// The verdict is Regular or Inconclusive with the failing stage named; the
// criteria are one-sided, so "irregular" is never claimed.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "smalltime/propagation.hpp"
#include "smalltime/rng.hpp"
#include "smalltime/saturation.hpp"

namespace smalltime {

// --- domain specification -----------------------------------------------------

// One term c * prod_{i != j} |x_i|^{r_i} of a graph boundary function.
struct SignomialTerm {
  Rat c;
  std::vector<Rat> r;  // nonnegative rational exponents; r[j] == 0
};

// Exponent denominators are capped so criticality comparisons stay exact and
// cheap; 64 covers every example in the corpus with room to spare.
inline constexpr long long kMaxExponentDenominator = 64;

struct DomainSpec {
  enum class Form { Graph, SuperLevel };

  Form form = Form::Graph;
  int n = 0;
  Rat delta = Rat(1, 10);  // locality radius recorded with the domain

  // Graph form: { x : x^j > sum_k c_k prod_{i != j} |x^i|^{r_ki} }.
  int j = 0;
  std::vector<SignomialTerm> terms;

  // SuperLevel form: { x : level(x) > 0 } with level(0) = 0.
  Polynomial level{};

  static DomainSpec graph(int n, int j, std::vector<SignomialTerm> terms,
                          Rat delta = Rat(1, 10)) {
    DomainSpec d;
    d.form = Form::Graph;
    d.n = n;
    d.j = j;
    d.terms = std::move(terms);
    d.delta = std::move(delta);
    return d;
  }

  static DomainSpec superlevel(Polynomial level, Rat delta = Rat(1, 10)) {
    DomainSpec d;
    d.form = Form::SuperLevel;
    d.n = level.n;
    d.level = std::move(level);
    d.delta = std::move(delta);
    return d;
  }
};

inline void validate(const DomainSpec& d) {
  if (d.n <= 0) throw std::invalid_argument("domain: dimension must be positive");
  if (!(d.delta > Rat(0))) throw std::invalid_argument("domain: radius must be positive");
  if (d.form == DomainSpec::Form::Graph) {
    if (d.j < 0 || d.j >= d.n) throw std::invalid_argument("domain: graph index out of range");
    for (const auto& t : d.terms) {
      if (static_cast<int>(t.r.size()) != d.n)
        throw std::invalid_argument("domain: term exponent count mismatch");
      if (t.c == Rat(0)) throw std::invalid_argument("domain: zero term coefficient");
      bool nonconstant = false;
      for (int i = 0; i < d.n; ++i) {
        const Rat& ri = t.r[static_cast<std::size_t>(i)];
        if (ri < Rat(0)) throw std::invalid_argument("domain: negative exponent");
        if (i == d.j && ri != Rat(0))
          throw std::invalid_argument("domain: boundary term uses the graph coordinate");
        if (ri.denominator() > Int(kMaxExponentDenominator))
          throw std::invalid_argument("domain: exponent denominator too large");
        if (ri > Rat(0)) nonconstant = true;
      }
      // a constant term would move 0 off the boundary
      if (!nonconstant) throw std::invalid_argument("domain: constant boundary term");
    }
  } else {
    if (d.level.n != d.n) throw std::invalid_argument("domain: level dimension mismatch");
    if (d.level.is_zero()) throw std::invalid_argument("domain: zero level function");
    const std::vector<Rat> origin(static_cast<std::size_t>(d.n), Rat(0));
    if (evaluate_exact(d.level, origin) != Rat(0))
      throw std::invalid_argument("domain: level function must vanish at the origin");
  }
}

inline double signomial_sum(const std::vector<SignomialTerm>& terms,
                            const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& t : terms) {
    double prod = to_double(t.c);
    for (std::size_t i = 0; i < t.r.size(); ++i) {
      if (t.r[i] == Rat(0)) continue;
      prod *= std::pow(std::abs(x[i]), to_double(t.r[i]));
    }
    s += prod;
  }
  return s;
}

inline bool domain_contains(const DomainSpec& d, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != d.n)
    throw std::invalid_argument("domain_contains: dimension mismatch");
  if (d.form == DomainSpec::Form::Graph)
    return x[static_cast<std::size_t>(d.j)] > signomial_sum(d.terms, x);
  return evaluate(d.level, x) > 0.0;
}

// --- JSON ----------------------------------------------------------------------

inline nlohmann::json domain_to_json(const DomainSpec& d) {
  nlohmann::json j;
  j["n"] = d.n;
  j["delta"] = rat_str(d.delta);
  if (d.form == DomainSpec::Form::Graph) {
    j["kind"] = "graph";
    j["j"] = d.j;
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : d.terms) {
      nlohmann::json jt;
      jt["c"] = rat_str(t.c);
      nlohmann::json r = nlohmann::json::array();
      for (const auto& ri : t.r) r.push_back(rat_str(ri));
      jt["r"] = std::move(r);
      terms.push_back(std::move(jt));
    }
    j["terms"] = std::move(terms);
  } else {
    j["kind"] = "superlevel";
    j["level"] = poly_to_json(d.level);
  }
  return j;
}

inline DomainSpec domain_from_json(const nlohmann::json& j) {
  DomainSpec d;
  d.n = j.at("n").get<int>();
  if (j.contains("delta")) d.delta = rat_parse(j.at("delta").get<std::string>());
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "graph") {
    d.form = DomainSpec::Form::Graph;
    d.j = j.at("j").get<int>();
    for (const auto& jt : j.at("terms")) {
      SignomialTerm t;
      t.c = rat_parse(jt.at("c").get<std::string>());
      for (const auto& jr : jt.at("r")) t.r.push_back(rat_parse(jr.get<std::string>()));
      d.terms.push_back(std::move(t));
    }
  } else if (kind == "superlevel") {
    d.form = DomainSpec::Form::SuperLevel;
    d.level = poly_from_json(j.at("level"), d.n);
  } else {
    throw std::invalid_argument("domain: unknown kind '" + kind + "'");
  }
  validate(d);
  return d;
}

// --- shifted system --------------------------------------------------------------

// Recentre so the boundary point becomes the origin: drift y -> P(y + x*).
inline SdeSystem shift_system(const SdeSystem& sys, const std::vector<Rat>& xstar) {
  validate(sys);
  if (static_cast<int>(xstar.size()) != sys.n)
    throw std::invalid_argument("shift_system: dimension mismatch");
  SdeSystem out = sys;
  out.drift = compose_shift(sys.drift, xstar);
  return out;
}

// Super-level domain { H > H(x*) } recentred at x*: level(y) = H(y + x*) - H(x*).
inline DomainSpec level_set_domain(const Polynomial& H, const std::vector<Rat>& xstar,
                                   Rat delta = Rat(1, 10)) {
  const Rat at_star = evaluate_exact(H, xstar);
  Polynomial g = sub(compose_shift(H, xstar), poly_const(H.n, at_star));
  auto d = DomainSpec::superlevel(std::move(g), std::move(delta));
  validate(d);
  return d;
}

// --- scaled-domain limit ----------------------------------------------------------

enum class LimitVerdict { HalfSpaceLike, PersistingBoundary, DegeneratePositive, DegenerateEmpty };

inline std::string limit_verdict_name(LimitVerdict v) {
  switch (v) {
    case LimitVerdict::HalfSpaceLike: return "half-space-like";
    case LimitVerdict::PersistingBoundary: return "persisting-boundary";
    case LimitVerdict::DegeneratePositive: return "degenerate-positive";
    case LimitVerdict::DegenerateEmpty: return "degenerate-empty";
  }
  return "?";
}

// What is left of the domain after the scaling map is pushed to its limit,
// plus the uniform open target carved out of it: the surviving inequality
// fattened by `margin` and intersected with the open unit box.
struct LimitDomain {
  DomainSpec::Form form = DomainSpec::Form::Graph;
  LimitVerdict verdict = LimitVerdict::DegenerateEmpty;
  int j = 0;                            // graph coordinate
  std::vector<SignomialTerm> critical;  // graph terms that survive the limit
  Polynomial leading{};                 // surviving part of a level function
  double margin = 0.1;
  bool feasible = false;      // target has a sampled interior point
  std::vector<double> witness;
  double witness_gap = -std::numeric_limits<double>::infinity();

  // Positive inside the open target, negative outside; the minimum of the
  // surviving inequality's slack and the distance to the box boundary.
  double gap(const std::vector<double>& y) const {
    double box = 1.0;
    for (double yi : y) box = std::min(box, 1.0 - std::abs(yi));
    const double slack = form == DomainSpec::Form::Graph
                             ? y[static_cast<std::size_t>(j)] - signomial_sum(critical, y) - margin
                             : evaluate(leading, y) - margin;
    return std::min(box, slack);
  }

  bool contains(const std::vector<double>& y) const { return gap(y) > 0.0; }
};

inline LimitDomain scaled_domain_limit(const DomainSpec& domain,
                                       const std::vector<ScalingExt>& scalings,
                                       double margin = 0.1, int samples = 4096,
                                       std::uint64_t seed = 29) {
  validate(domain);
  if (static_cast<int>(scalings.size()) != domain.n)
    throw std::invalid_argument("scaled_domain_limit: scaling count mismatch");
  for (const auto& s : scalings)
    if (s.is_inf) throw std::invalid_argument("scaled_domain_limit: scalings must be finite");

  LimitDomain lim;
  lim.form = domain.form;
  lim.j = domain.j;
  lim.margin = margin;

  if (domain.form == DomainSpec::Form::Graph) {
    // compare each term's exponent-weighted scaling with the graph coordinate's
    const Rat bj = Rat(scalings[static_cast<std::size_t>(domain.j)].pair.num1, 2);
    bool blows_up_positive = false;
    bool blows_up_negative = false;
    for (const auto& t : domain.terms) {
      Rat e(0);
      for (int i = 0; i < domain.n; ++i)
        e += t.r[static_cast<std::size_t>(i)] *
             Rat(scalings[static_cast<std::size_t>(i)].pair.num1, 2);
      if (e > bj) continue;  // subcritical: vanishes in the limit
      if (e == bj) {
        lim.critical.push_back(t);  // critical: survives unchanged
      } else {
        // supercritical: the term dominates the graph coordinate entirely
        (t.c > Rat(0) ? blows_up_positive : blows_up_negative) = true;
      }
    }
    if (blows_up_positive)  // conservative: an unbounded obstacle wins
      lim.verdict = LimitVerdict::DegenerateEmpty;
    else if (blows_up_negative)
      lim.verdict = LimitVerdict::DegeneratePositive;
    else
      lim.verdict = lim.critical.empty() ? LimitVerdict::HalfSpaceLike
                                         : LimitVerdict::PersistingBoundary;
  } else {
    lim.leading = homogeneous_split(domain.level, scalings).leading;
    lim.verdict = LimitVerdict::PersistingBoundary;
  }

  if (lim.verdict != LimitVerdict::DegenerateEmpty) {
    auto consider = [&lim](const std::vector<double>& y) {
      const double g = lim.gap(y);
      if (g > lim.witness_gap) {
        lim.witness_gap = g;
        lim.witness = y;
      }
    };
    // every boundary term vanishes on the graph axis, so the midpoint between
    // the margin and the box edge is feasible whenever anything is; random
    // samples can still improve the witness (root exponents make the target
    // exponentially thin, so sampling alone is not enough)
    if (domain.form == DomainSpec::Form::Graph && margin < 1.0) {
      std::vector<double> axis(static_cast<std::size_t>(domain.n), 0.0);
      axis[static_cast<std::size_t>(domain.j)] = 0.5 * (1.0 + margin);
      consider(axis);
    }
    RngStream rng(seed, 0);
    for (int k = 0; k < samples; ++k) {
      std::vector<double> y(static_cast<std::size_t>(domain.n));
      for (auto& yi : y) yi = rng.uniform(-1.0, 1.0);
      consider(y);
    }
    lim.feasible = lim.witness_gap > 0.0;
  }
  return lim;
}

// --- membership probe --------------------------------------------------------------

struct TargetProbeResult {
  bool reached = false;
  int attempts_used = 0;
  double best_gap = -std::numeric_limits<double>::infinity();
  std::vector<double> witness;
  double witness_time = 0.0;
  PiecewiseLinearControl control;
};

// Same randomized control search as the ball probe, but the hit test is
// membership in the open target set.
inline TargetProbeResult target_probe(const SdeSystem& sys, const LimitDomain& target,
                                      ProbeOptions opt = {}) {
  validate(sys);
  const CompiledField drift = compile(sys.drift);
  const std::vector<double> x0(static_cast<std::size_t>(sys.n), 0.0);
  FlowOptions fopt;
  fopt.steps = opt.steps;
  fopt.explosion = opt.explosion;

  TargetProbeResult res;
  for (int a = 0; a < opt.attempts; ++a) {
    ++res.attempts_used;
    const auto u = detail::probe_control(sys, opt, static_cast<std::uint64_t>(a));
    const auto p = flow(drift, sys.sigma, &u, x0, opt.t, fopt);
    for (std::size_t k = 0; k < p.x.size(); ++k) {
      const double g = target.gap(p.x[k]);
      if (g > res.best_gap) res.best_gap = g;
      if (g > 0.0) {
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

// --- the criteria -------------------------------------------------------------------

struct RegularOptions {
  double margin = 0.1;           // fattening that defines the open target
  int feasibility_samples = 4096;
  std::uint64_t seed = 29;
  bool try_saturation = true;    // attempt the exact certificate first
  ProbeOptions probe;            // fallback randomized reachability search
};

struct RegularReport {
  bool regular = false;
  std::string failing_stage;  // "", "propagation", "domain", "reachability"
  SdeSystem shifted;
  PropagationResult prop;
  bool limit_computed = false;
  LimitDomain limit;
  std::string reach_evidence;  // "saturation" or "probe"
  bool sat_ran = false;
  SaturationReport sat;
  bool probe_ran = false;
  TargetProbeResult probe;
};

inline RegularReport check_regular(const SdeSystem& sys, const std::vector<Rat>& xstar,
                                   const DomainSpec& domain, const RegularOptions& opt = {}) {
  validate(domain);
  if (domain.n != sys.n) throw std::invalid_argument("check_regular: dimension mismatch");

  RegularReport rep;
  rep.shifted = shift_system(sys, xstar);
  rep.prop = dist_scalings(rep.shifted);
  if (!rep.prop.propagating) {
    rep.failing_stage = "propagation";
    return rep;
  }

  rep.limit = scaled_domain_limit(domain, rep.prop.decomp.scalings, opt.margin,
                                  opt.feasibility_samples, opt.seed);
  rep.limit_computed = true;
  if (rep.limit.verdict == LimitVerdict::DegenerateEmpty || !rep.limit.feasible) {
    rep.failing_stage = "domain";
    return rep;
  }

  // the reachability question is posed for the scaling-limit dynamics
  const SdeSystem limit_sys{sys.n, rep.shifted.sigma, rep.prop.decomp.limit};
  if (opt.try_saturation) {
    rep.sat = saturate(limit_sys);
    rep.sat_ran = true;
    if (rep.sat.exact_controllable) {
      rep.regular = true;
      rep.reach_evidence = "saturation";
      return rep;
    }
  }
  rep.probe = target_probe(limit_sys, rep.limit, opt.probe);
  rep.probe_ran = true;
  if (rep.probe.reached) {
    rep.regular = true;
    rep.reach_evidence = "probe";
  } else {
    rep.failing_stage = "reachability";
  }
  return rep;
}

inline nlohmann::json regular_report_json(const RegularReport& rep) {
  nlohmann::json j;
  j["verdict"] = rep.regular ? "Regular" : "Inconclusive";
  j["failing_stage"] = rep.failing_stage;
  j["propagating"] = rep.prop.propagating;
  if (rep.prop.propagating) {
    nlohmann::json scal = nlohmann::json::array();
    for (const auto& s : rep.prop.decomp.scalings) scal.push_back(format(s));
    j["scalings"] = std::move(scal);
  }
  if (rep.limit_computed) {
    j["limit_verdict"] = limit_verdict_name(rep.limit.verdict);
    j["critical_terms"] = rep.limit.critical.size();
    j["target_margin"] = rep.limit.margin;
    j["target_feasible"] = rep.limit.feasible;
    if (rep.limit.feasible) j["target_witness"] = rep.limit.witness;
  }
  if (!rep.reach_evidence.empty()) j["evidence"] = rep.reach_evidence;
  if (rep.sat_ran) j["saturation_rank"] = rep.sat.basis.size();
  if (rep.probe_ran) {
    j["probe_attempts"] = rep.probe.attempts_used;
    j["probe_reached"] = rep.probe.reached;
    if (rep.probe.reached) j["probe_witness"] = rep.probe.witness;
  }
  return j;
}

}  // namespace smalltime
