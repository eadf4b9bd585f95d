#pragma once

// Layer-by-layer noise propagation analysis of a polynomial SDE
//
//   dx = P(x) dt + sigma dB,
//
// in two modes that differ only in bookkeeping of the log-log component:
// the pathwise (law-of-iterated-logarithm) mode tracks full pairs, the
// distributional mode tracks pure powers. Starting from the directly forced
// coordinates, each round finds the uncovered coordinates whose drift attains
// the minimal first-component scaling, assigns them that scaling plus (1, 0),
// and records the order-minimal homogeneous part of their drift as the limit
// field. The construction either covers every coordinate (noise propagating,
// with an intrinsic dimension = number of rounds) or stalls (noise defective).
//
// The remainder field collects, term by term, the epsilon-exponents with which
// the non-limit part of the drift enters the rescaled equation; every exponent
// is strictly above (0, 0) in the scaling order, which is exactly why the
// rescaled drift converges to the limit field.

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "smalltime/poly.hpp"
#include "smalltime/scaling.hpp"

namespace smalltime {

struct SdeSystem {
  int n = 0;
  std::vector<double> sigma;  // noise intensities, >= 0, size n
  PolyVectorField drift;      // P, n components in n variables
};

inline void validate(const SdeSystem& sys) {
  if (sys.n <= 0) throw std::invalid_argument("system dimension must be positive");
  if (static_cast<int>(sys.sigma.size()) != sys.n)
    throw std::invalid_argument("sigma must have length n");
  for (double s : sys.sigma)
    if (!(s >= 0.0)) throw std::invalid_argument("sigma entries must be >= 0");
  if (sys.drift.n != sys.n || static_cast<int>(sys.drift.comp.size()) != sys.n)
    throw std::invalid_argument("drift must be an n-component field in n variables");
}

inline void to_json(nlohmann::json& j, const SdeSystem& sys) {
  j = nlohmann::json{{"n", sys.n}, {"sigma", sys.sigma}, {"drift", field_to_json(sys.drift)}};
}

inline void from_json(const nlohmann::json& j, SdeSystem& sys) {
  sys.n = j.at("n").get<int>();
  sys.sigma = j.at("sigma").get<std::vector<double>>();
  sys.drift = field_from_json(j.at("drift"), sys.n);
  validate(sys);
}

enum class Mode { Lil, Dist };

inline std::string mode_name(Mode m) { return m == Mode::Lil ? "lil" : "dist"; }

struct LayerDecomposition {
  std::vector<std::vector<int>> layers;  // layers[0] = directly forced set
  std::vector<ScalingExt> scalings;      // per coordinate; infinity if uncovered
  PolyVectorField limit;                 // limit drift; zero on layer 0 and uncovered
};

struct PropagationResult {
  Mode mode = Mode::Lil;
  bool propagating = false;
  int dim = 0;                        // rounds beyond layer 0 (propagating case)
  int stuck_layer = 0;                // last nonempty layer index (defective case)
  std::vector<int> uncovered;         // nonempty exactly in the defective case
  LayerDecomposition decomp;
  std::vector<long long> layer_min;   // per round: minimal first component (numerator/2)
  std::vector<bool> lil_tie;          // per coordinate: non-leading monomial ties proj1
};

namespace detail {

inline PropagationResult propagate(const SdeSystem& sys, Mode mode) {
  validate(sys);
  const int n = sys.n;
  PropagationResult res;
  res.mode = mode;
  res.lil_tie.assign(n, false);
  auto& dec = res.decomp;
  dec.scalings.assign(n, ScalingExt::infinity());
  dec.limit = field_zero(n);

  std::vector<int> I0;
  for (int j = 0; j < n; ++j)
    if (sys.sigma[j] > 0.0) I0.push_back(j);
  dec.layers.push_back(I0);

  const ScalingExt init =
      mode == Mode::Lil ? ScalingExt::finite(1, 1) : ScalingExt::finite(1, 0);
  std::set<int> covered;
  for (int j : I0) {
    dec.scalings[j] = init;
    covered.insert(j);
  }

  while (static_cast<int>(covered.size()) < n) {
    std::vector<int> uncovered;
    for (int j = 0; j < n; ++j)
      if (!covered.count(j)) uncovered.push_back(j);

    // scaling of each uncovered drift component under the current assignment
    std::vector<ScalingExt> val(n, ScalingExt::infinity());
    bool any_finite = false;
    long long m = 0;
    for (int j : uncovered) {
      val[j] = poly_scaling(sys.drift.comp[j], dec.scalings);
      if (!val[j].is_inf) {
        if (!any_finite || val[j].pair.num1 < m) m = val[j].pair.num1;
        any_finite = true;
      }
    }
    if (!any_finite) {
      res.propagating = false;
      res.stuck_layer = static_cast<int>(dec.layers.size()) - 1;
      res.uncovered = uncovered;
      return res;
    }

    // all coordinates attaining the minimal first component enter the round
    std::vector<int> round;
    for (int j : uncovered)
      if (!val[j].is_inf && val[j].pair.num1 == m) round.push_back(j);
    res.layer_min.push_back(m);

    // splits are taken under the pre-update assignment
    for (int j : round) {
      const auto split = homogeneous_split(sys.drift.comp[j], dec.scalings);
      dec.limit.comp[j] = split.leading;
      if (mode == Mode::Lil) {
        for (const auto& mono : split.rest.terms) {
          const ScalingExt s = monomial_scaling(mono.e, dec.scalings);
          if (!s.is_inf && s.pair.num1 == val[j].pair.num1) {
            res.lil_tie[j] = true;
            break;
          }
        }
      }
    }
    for (int j : round) {
      // stored scaling: full order-minimum plus (1, 0); in distributional
      // mode the minimum is the pure power (m, 0), so both reduce to it
      const ScalingPair base =
          mode == Mode::Lil ? val[j].pair : ScalingPair{m, 0};
      dec.scalings[j] = ScalingExt{false, add(base, ScalingPair{2, 0})};
      covered.insert(j);
    }
    dec.layers.push_back(round);
  }

  res.propagating = true;
  res.dim = static_cast<int>(dec.layers.size()) - 1;
  return res;
}

}  // namespace detail

inline PropagationResult lil_scalings(const SdeSystem& sys) {
  return detail::propagate(sys, Mode::Lil);
}

inline PropagationResult dist_scalings(const SdeSystem& sys) {
  return detail::propagate(sys, Mode::Dist);
}

// --- remainder field ---------------------------------------------------------

// One term of a field whose coefficients carry explicit epsilon-exponents:
// contributes eps^{exponent} * m(x) to component `comp` of the drift.
struct EpsTerm {
  int comp = 0;
  ScalingPair exponent{};
  Monomial m;
};

struct EpsField {
  int n = 0;
  std::vector<EpsTerm> terms;
};

// Every remainder exponent must sit strictly above (0,0): either a positive
// first component, or a zero first component with a negative second one (a
// pure inverse log-log factor). Both evaluate to 0 as eps -> 0.
inline bool eps_exponent_vanishes(const ScalingPair& e) {
  return compare(ScalingPair{0, 0}, e) == Cmp::Less;
}

inline EpsField remainder(const SdeSystem& sys, const PropagationResult& res) {
  if (!res.propagating)
    throw std::invalid_argument("remainder: system must be noise propagating");
  const auto& dec = res.decomp;
  const ScalingPair one{2, 0};  // the pair (1, 0)
  const ScalingPair init =
      res.mode == Mode::Lil ? ScalingPair{1, 1} : ScalingPair{1, 0};

  EpsField out;
  out.n = sys.n;
  std::set<int> I0(dec.layers[0].begin(), dec.layers[0].end());
  for (int j = 0; j < sys.n; ++j) {
    const Polynomial rest =
        I0.count(j) ? sys.drift.comp[j] : sub(sys.drift.comp[j], dec.limit.comp[j]);
    const ScalingPair ref = I0.count(j) ? init : dec.scalings[j].pair;
    for (const auto& mono : rest.terms) {
      const ScalingExt ms = monomial_scaling(mono.e, dec.scalings);
      if (ms.is_inf) throw std::logic_error("remainder: infinite monomial scaling");
      const ScalingPair expo = sub(add(one, ms.pair), ref);
      if (!eps_exponent_vanishes(expo))
        throw std::logic_error("remainder: exponent does not vanish as eps -> 0");
      out.terms.push_back(EpsTerm{j, expo, mono});
    }
  }
  return out;
}

// Componentwise upper bound for sup_{|x|_inf <= C} |R_eps(x)|.
inline std::vector<double> eps_field_sup_bound(const EpsField& f, double eps, double C) {
  std::vector<double> out(static_cast<std::size_t>(f.n), 0.0);
  for (const auto& t : f.terms) {
    const double coeff = std::abs(to_double(t.m.c)) * eval_epsilon(t.exponent, eps);
    out[t.comp] += coeff * std::pow(C, total_degree(t.m.e));
  }
  return out;
}

// --- rescaled drift ----------------------------------------------------------

struct RescaledSde {
  int n = 0;
  Mode mode = Mode::Lil;
  double eps = 0.0;
  PolyVectorField limit;   // exact limit drift
  EpsField rem;            // epsilon-graded remainder
  double noise_mult = 1.0; // multiplies sigma in the rescaled equation
  std::vector<double> sigma;
};

// Drift of the rescaled equation at a fixed eps, compiled for integration:
// limit field plus remainder terms with their epsilon-coefficients.
inline CompiledField compile_drift(const RescaledSde& r) {
  CompiledField cf = compile(r.limit);
  for (const auto& t : r.rem.terms) {
    cf.comp[t.comp].coeff.push_back(to_double(t.m.c) * eval_epsilon(t.exponent, r.eps));
    cf.comp[t.comp].exps.push_back(t.m.e);
  }
  return cf;
}

inline RescaledSde rescaled_drift(const SdeSystem& sys, const PropagationResult& res,
                                  double eps) {
  if (!(eps > 0.0 && eps < std::exp(-1.0)))
    throw std::domain_error("rescaled_drift: eps must lie in (0, e^-1)");
  RescaledSde out;
  out.n = sys.n;
  out.mode = res.mode;
  out.eps = eps;
  out.limit = res.decomp.limit;
  out.rem = remainder(sys, res);
  out.sigma = sys.sigma;
  // pathwise mode divides the noise by (log log eps^-1)^{1/2}
  out.noise_mult =
      res.mode == Mode::Lil ? eval_epsilon(ScalingPair{0, -1}, eps) : 1.0;
  return out;
}

// --- reports -----------------------------------------------------------------

inline nlohmann::json classify_report(const SdeSystem& sys, const PropagationResult& res) {
  nlohmann::json j;
  j["mode"] = mode_name(res.mode);
  j["n"] = sys.n;
  j["propagating"] = res.propagating;
  if (res.propagating)
    j["dim"] = res.dim;
  else {
    j["stuck_layer"] = res.stuck_layer;
    j["uncovered"] = res.uncovered;
  }
  j["layers"] = res.decomp.layers;
  nlohmann::json sc = nlohmann::json::array();
  for (const auto& s : res.decomp.scalings) sc.push_back(s);
  j["scalings"] = sc;
  j["limit"] = field_to_json(res.decomp.limit);
  nlohmann::json mins = nlohmann::json::array();
  for (long long m : res.layer_min) mins.push_back(format_half(m));
  j["layer_min"] = mins;
  j["lil_tie"] = res.lil_tie;
  return j;
}

}  // namespace smalltime
