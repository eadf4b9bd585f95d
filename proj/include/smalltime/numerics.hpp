#pragma once

// Trajectory integration and Monte Carlo utilities.
//
// Two independent integration routes are kept side by side on purpose:
// `flow` is a generic segmented RK4 driver, while `flow_layered` integrates
// the triangular limit drifts exactly (coordinate by coordinate, each layer
// is a polynomial in time once the earlier layers are known). Agreement of
// the two routes is part of the test suite; neither is allowed to quietly
// replace the other.
//
// Everything that consumes randomness takes an RngStream so runs are
// reproducible from (seed, trial) alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "smalltime/poly.hpp"
#include "smalltime/propagation.hpp"
#include "smalltime/rng.hpp"
#include "smalltime/scaling.hpp"

namespace smalltime {

// --- paths ---------------------------------------------------------------

// A discrete trajectory. Exploding states (sup-norm beyond the guard, or a
// non-finite entry) are absorbing: the path is marked dead, the offending
// state is kept as its last entry, and integration stops. The death state is
// data, not an error.
struct Path {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  bool dead = false;

  const std::vector<double>& terminal() const {
    if (x.empty()) throw std::logic_error("terminal() on empty path");
    return x.back();
  }
};

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double c : v) m = std::max(m, std::abs(c));
  return m;
}

inline bool state_exploded(const std::vector<double>& v, double guard) {
  for (double c : v)
    if (!std::isfinite(c) || std::abs(c) > guard) return true;
  return false;
}

// --- statistics helpers ----------------------------------------------------

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

// --- piecewise linear controls ---------------------------------------------

// Cameron-Martin elements are represented as piecewise linear paths: knots
// with values, linear in between, so the derivative is piecewise constant.
struct PiecewiseLinearControl {
  std::vector<double> knots;                // strictly increasing, >= 2
  std::vector<std::vector<double>> values;  // one per knot, common dimension

  int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  double t_begin() const { return knots.front(); }
  double t_end() const { return knots.back(); }
  int segments() const { return static_cast<int>(knots.size()) - 1; }

  void validate() const {
    if (knots.size() < 2) throw std::invalid_argument("control needs at least two knots");
    if (values.size() != knots.size())
      throw std::invalid_argument("control values/knots length mismatch");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i] > knots[i - 1]))
        throw std::invalid_argument("control knots must be strictly increasing");
    for (const auto& v : values)
      if (v.size() != values.front().size())
        throw std::invalid_argument("control values must share a dimension");
  }

  int segment_index(double t) const {
    if (t <= knots.front()) return 0;
    if (t >= knots.back()) return segments() - 1;
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    return static_cast<int>(it - knots.begin()) - 1;
  }

  std::vector<double> slope(int seg) const {
    const double h = knots[seg + 1] - knots[seg];
    std::vector<double> s(values[seg].size());
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = (values[seg + 1][i] - values[seg][i]) / h;
    return s;
  }

  std::vector<double> value(double t) const {
    const int seg = segment_index(t);
    const double h = knots[seg + 1] - knots[seg];
    const double w = std::clamp((t - knots[seg]) / h, 0.0, 1.0);
    std::vector<double> out(values[seg].size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = (1.0 - w) * values[seg][i] + w * values[seg + 1][i];
    return out;
  }

  // squared Cameron-Martin norm: integral of |f'|^2
  double h1_norm_sq() const {
    double acc = 0.0;
    for (int s = 0; s < segments(); ++s) {
      const auto sl = slope(s);
      double n2 = 0.0;
      for (double c : sl) n2 += c * c;
      acc += n2 * (knots[s + 1] - knots[s]);
    }
    return acc;
  }

  PiecewiseLinearControl scaled(double c) const {
    PiecewiseLinearControl out = *this;
    for (auto& v : out.values)
      for (double& e : v) e *= c;
    return out;
  }

  static PiecewiseLinearControl zero(int dim, double t0, double t1) {
    PiecewiseLinearControl u;
    u.knots = {t0, t1};
    u.values.assign(2, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    return u;
  }

  // build from per-segment constant derivatives, starting at zero
  static PiecewiseLinearControl from_slopes(double t0, const std::vector<double>& seg_len,
                                            const std::vector<std::vector<double>>& slopes) {
    if (seg_len.empty() || seg_len.size() != slopes.size())
      throw std::invalid_argument("from_slopes: length mismatch");
    PiecewiseLinearControl u;
    u.knots.push_back(t0);
    u.values.push_back(std::vector<double>(slopes.front().size(), 0.0));
    for (std::size_t s = 0; s < seg_len.size(); ++s) {
      if (!(seg_len[s] > 0.0)) throw std::invalid_argument("from_slopes: segment length <= 0");
      u.knots.push_back(u.knots.back() + seg_len[s]);
      std::vector<double> next = u.values.back();
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += slopes[s][i] * seg_len[s];
      u.values.push_back(std::move(next));
    }
    return u;
  }
};

// --- deterministic flows -----------------------------------------------------

struct FlowOptions {
  int steps = 4096;          // RK4 steps distributed over [0, T]
  double explosion = 1e8;    // sup-norm guard
};

namespace detail {

// one classic RK4 step for x' = F(x) + c with constant c
template <class Drift>
inline void rk4_step(const Drift& f, const std::vector<double>& c, double h,
                     std::vector<double>& x, std::vector<double>& k1, std::vector<double>& k2,
                     std::vector<double>& k3, std::vector<double>& k4, std::vector<double>& tmp) {
  const std::size_t n = x.size();
  f(x.data(), k1.data());
  for (std::size_t i = 0; i < n; ++i) {
    k1[i] += c[i];
    tmp[i] = x[i] + 0.5 * h * k1[i];
  }
  f(tmp.data(), k2.data());
  for (std::size_t i = 0; i < n; ++i) {
    k2[i] += c[i];
    tmp[i] = x[i] + 0.5 * h * k2[i];
  }
  f(tmp.data(), k3.data());
  for (std::size_t i = 0; i < n; ++i) {
    k3[i] += c[i];
    tmp[i] = x[i] + h * k3[i];
  }
  f(tmp.data(), k4.data());
  for (std::size_t i = 0; i < n; ++i) {
    k4[i] += c[i];
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

// segment boundaries: {0, interior control knots, T}
inline std::vector<double> segment_grid(const PiecewiseLinearControl* u, double T) {
  std::vector<double> b{0.0};
  if (u != nullptr)
    for (double k : u->knots)
      if (k > 1e-14 && k < T - 1e-14) b.push_back(k);
  b.push_back(T);
  std::sort(b.begin(), b.end());
  return b;
}

}  // namespace detail

// Controlled ODE x' = F(x) + sigma .* u'(t). RK4 on a grid aligned with the
// control knots, so the integrand stays smooth inside every segment and the
// scheme keeps its full order.
template <class Drift>
Path flow(const Drift& field, const std::vector<double>& sigma,
          const PiecewiseLinearControl* u, const std::vector<double>& x0, double T,
          FlowOptions opt = {}) {
  if (!(T >= 0.0)) throw std::invalid_argument("flow: T must be nonnegative");
  if (u != nullptr) {
    u->validate();
    if (static_cast<std::size_t>(u->dim()) != x0.size())
      throw std::invalid_argument("flow: control dimension mismatch");
    if (u->t_begin() > 1e-12 || u->t_end() < T - 1e-12)
      throw std::invalid_argument("flow: control must span [0, T]");
  }
  if (sigma.size() != x0.size()) throw std::invalid_argument("flow: sigma dimension mismatch");

  Path p;
  p.t.push_back(0.0);
  p.x.push_back(x0);
  if (T == 0.0) return p;

  const std::size_t n = x0.size();
  std::vector<double> x = x0, k1(n), k2(n), k3(n), k4(n), tmp(n);
  const auto bounds = detail::segment_grid(u, T);
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    const double len = bounds[s + 1] - bounds[s];
    const int steps = std::max(1, static_cast<int>(std::ceil(opt.steps * len / T)));
    const double h = len / steps;
    std::vector<double> c(n, 0.0);
    if (u != nullptr) {
      const auto sl = u->slope(u->segment_index(0.5 * (bounds[s] + bounds[s + 1])));
      for (std::size_t i = 0; i < n; ++i) c[i] = sigma[i] * sl[i];
    }
    for (int k = 0; k < steps; ++k) {
      detail::rk4_step(field, c, h, x, k1, k2, k3, k4, tmp);
      p.t.push_back(bounds[s] + (k + 1) * h);
      p.x.push_back(x);
      if (state_exploded(x, opt.explosion)) {
        p.dead = true;
        return p;
      }
    }
  }
  return p;
}

// --- exact integration of triangular limit drifts ----------------------------

namespace detail {

inline std::vector<double> upoly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline std::vector<double> upoly_int(const std::vector<double>& a) {
  std::vector<double> out(a.size() + 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i + 1] = a[i] / static_cast<double>(i + 1);
  return out;
}

inline double upoly_eval(const std::vector<double>& a, double s) {
  double acc = 0.0;
  for (std::size_t i = a.size(); i-- > 0;) acc = acc * s + a[i];
  return acc;
}

}  // namespace detail

// Exact segment-wise integration of the layered limit equation
//   x_j' = sigma_j u_j'(t)            for coordinates in layer 0,
//   x_j' = L^j(x)                     for later layers,
// where L^j only involves coordinates from strictly earlier layers. Inside a
// control segment every coordinate is then a polynomial in time, computed in
// layer order; the only error is double rounding. Serves as the independent
// oracle for the RK4 route and as a fast probe integrator.
inline Path flow_layered(const LayerDecomposition& dec, const std::vector<double>& sigma,
                         const PiecewiseLinearControl* u, const std::vector<double>& x0,
                         double T, int grid_per_segment = 16, double explosion = 1e8) {
  const int n = dec.limit.n;
  if (static_cast<int>(x0.size()) != n || static_cast<int>(sigma.size()) != n)
    throw std::invalid_argument("flow_layered: dimension mismatch");
  if (!(T >= 0.0)) throw std::invalid_argument("flow_layered: T must be nonnegative");
  if (u != nullptr) {
    u->validate();
    if (u->dim() != n) throw std::invalid_argument("flow_layered: control dimension mismatch");
    if (u->t_begin() > 1e-12 || u->t_end() < T - 1e-12)
      throw std::invalid_argument("flow_layered: control must span [0, T]");
  }

  // layer index per coordinate; every coordinate must be covered
  std::vector<int> layer_of(static_cast<std::size_t>(n), -1);
  for (std::size_t l = 0; l < dec.layers.size(); ++l)
    for (int j : dec.layers[l]) layer_of[static_cast<std::size_t>(j)] = static_cast<int>(l);
  for (int j = 0; j < n; ++j)
    if (layer_of[static_cast<std::size_t>(j)] < 0)
      throw std::invalid_argument("flow_layered: needs a fully covered (propagating) limit");

  Path p;
  p.t.push_back(0.0);
  p.x.push_back(x0);
  if (T == 0.0) return p;

  std::vector<double> start = x0;
  const auto bounds = detail::segment_grid(u, T);
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    const double len = bounds[s + 1] - bounds[s];
    std::vector<double> sl(static_cast<std::size_t>(n), 0.0);
    if (u != nullptr)
      sl = u->slope(u->segment_index(0.5 * (bounds[s] + bounds[s + 1])));

    // build coordinate polynomials in the local time of this segment
    std::vector<std::vector<double>> poly(static_cast<std::size_t>(n));
    for (std::size_t l = 0; l < dec.layers.size(); ++l) {
      for (int j : dec.layers[l]) {
        const std::size_t ju = static_cast<std::size_t>(j);
        if (l == 0) {
          poly[ju] = {start[ju], sigma[ju] * sl[ju]};
          continue;
        }
        std::vector<double> integrand{0.0};
        for (const auto& mono : dec.limit.comp[ju].terms) {
          std::vector<double> term{to_double(mono.c)};
          for (int i = 0; i < n; ++i) {
            const int e = mono.e[static_cast<std::size_t>(i)];
            if (e == 0) continue;
            if (layer_of[static_cast<std::size_t>(i)] >= static_cast<int>(l))
              throw std::logic_error("flow_layered: limit drift is not layer-triangular");
            for (int rep = 0; rep < e; ++rep)
              term = detail::upoly_mul(term, poly[static_cast<std::size_t>(i)]);
          }
          if (integrand.size() < term.size()) integrand.resize(term.size(), 0.0);
          for (std::size_t k = 0; k < term.size(); ++k) integrand[k] += term[k];
        }
        poly[ju] = detail::upoly_int(integrand);
        poly[ju][0] = start[ju];
      }
    }

    const int grid = std::max(1, grid_per_segment);
    for (int g = 1; g <= grid; ++g) {
      const double sloc = len * g / grid;
      std::vector<double> x(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j)
        x[static_cast<std::size_t>(j)] = detail::upoly_eval(poly[static_cast<std::size_t>(j)], sloc);
      p.t.push_back(bounds[s] + sloc);
      p.x.push_back(x);
      if (state_exploded(x, explosion)) {
        p.dead = true;
        return p;
      }
    }
    start = p.x.back();
  }
  return p;
}

// --- stochastic integration ----------------------------------------------------

// Euler-Maruyama with additive noise: dx = F(x) dt + sigma dW. Full path.
template <class Drift>
Path euler_maruyama(const Drift& drift, const std::vector<double>& sigma,
                    const std::vector<double>& x0, double T, double dt, RngStream& rng,
                    double explosion = 1e8) {
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("euler_maruyama: T, dt must be > 0");
  if (sigma.size() != x0.size())
    throw std::invalid_argument("euler_maruyama: sigma dimension mismatch");
  const std::size_t n = x0.size();
  const int steps = static_cast<int>(std::llround(T / dt));
  const double h = T / steps;
  const double sq = std::sqrt(h);

  Path p;
  p.t.reserve(static_cast<std::size_t>(steps) + 1);
  p.x.reserve(static_cast<std::size_t>(steps) + 1);
  p.t.push_back(0.0);
  p.x.push_back(x0);
  std::vector<double> x = x0, f(n);
  for (int k = 0; k < steps; ++k) {
    drift(x.data(), f.data());
    for (std::size_t i = 0; i < n; ++i)
      x[i] += f[i] * h + sigma[i] * sq * rng.normal();
    p.t.push_back((k + 1) * h);
    p.x.push_back(x);
    if (state_exploded(x, explosion)) {
      p.dead = true;
      return p;
    }
  }
  return p;
}

// Terminal-only Euler-Maruyama; returns false if the path died. The stream is
// advanced by exactly n normals per step either way, keeping trials aligned.
template <class Drift>
bool em_terminal(const Drift& drift, const std::vector<double>& sigma,
                 const std::vector<double>& x0, double T, double dt, RngStream& rng,
                 std::vector<double>& out, double explosion = 1e8) {
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("em_terminal: T, dt must be > 0");
  const std::size_t n = x0.size();
  const int steps = static_cast<int>(std::llround(T / dt));
  const double h = T / steps;
  const double sq = std::sqrt(h);
  out = x0;
  std::vector<double> f(n);
  bool alive = true;
  for (int k = 0; k < steps; ++k) {
    if (alive) {
      drift(out.data(), f.data());
      for (std::size_t i = 0; i < n; ++i)
        out[i] += f[i] * h + sigma[i] * sq * rng.normal();
      if (state_exploded(out, explosion)) alive = false;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (sigma[i] != 0.0) (void)rng.normal();
    }
  }
  return alive;
}

// --- space rescaling ------------------------------------------------------------

// y_j = x_j / eps^{a_j}; requires every scaling finite
inline std::vector<double> scale_state(const std::vector<ScalingExt>& scal, double eps,
                                       const std::vector<double>& x) {
  if (scal.size() != x.size()) throw std::invalid_argument("scale_state: dimension mismatch");
  std::vector<double> y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (scal[j].is_inf) throw std::invalid_argument("scale_state: infinite scaling");
    y[j] = x[j] / eval_epsilon(scal[j].pair, eps);
  }
  return y;
}

inline std::vector<double> unscale_state(const std::vector<ScalingExt>& scal, double eps,
                                         const std::vector<double>& y) {
  if (scal.size() != y.size()) throw std::invalid_argument("unscale_state: dimension mismatch");
  std::vector<double> x(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (scal[j].is_inf) throw std::invalid_argument("unscale_state: infinite scaling");
    x[j] = y[j] * eval_epsilon(scal[j].pair, eps);
  }
  return x;
}

// --- two-sample energy statistics -------------------------------------------------

// E(A, B) = 2 E|a-b| - E|a-a'| - E|b-b'|, zero iff equal distributions
inline double energy_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("energy_distance: empty sample");
  auto dist = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
    return std::sqrt(s);
  };
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (const auto& u : a)
    for (const auto& v : b) ab += dist(u, v);
  for (const auto& u : a)
    for (const auto& v : a) aa += dist(u, v);
  for (const auto& u : b)
    for (const auto& v : b) bb += dist(u, v);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  return 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
}

struct EnergyTestResult {
  double distance = 0.0;
  double pvalue = 1.0;
};

// permutation test for equality of distributions, statistic = energy distance
inline EnergyTestResult energy_permutation_test(const std::vector<std::vector<double>>& a,
                                                const std::vector<std::vector<double>>& b,
                                                int permutations, RngStream& rng) {
  const std::size_t na = a.size(), nb = b.size(), N = na + nb;
  std::vector<std::vector<double>> pool;
  pool.reserve(N);
  for (const auto& u : a) pool.push_back(u);
  for (const auto& u : b) pool.push_back(u);
  std::vector<std::vector<double>> d(N, std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < pool[i].size(); ++k)
        s += (pool[i][k] - pool[j][k]) * (pool[i][k] - pool[j][k]);
      d[i][j] = d[j][i] = std::sqrt(s);
    }

  auto statistic = [&](const std::vector<std::size_t>& idx) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < na; ++j) aa += d[idx[i]][idx[j]];
    for (std::size_t i = na; i < N; ++i)
      for (std::size_t j = na; j < N; ++j) bb += d[idx[i]][idx[j]];
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = na; j < N; ++j) ab += d[idx[i]][idx[j]];
    const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
    return 2.0 * ab / (fa * fb) - aa / (fa * fa) - bb / (fb * fb);
  };

  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  EnergyTestResult res;
  res.distance = statistic(idx);
  int ge = 0;
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = N - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(i)));
      std::swap(idx[i], idx[j]);
    }
    if (statistic(idx) >= res.distance - 1e-15) ++ge;
  }
  res.pvalue = (1.0 + ge) / (1.0 + permutations);
  return res;
}

// --- distributional limit check ------------------------------------------------

// Numerical consistency check for the distributional small-time limit. Three
// probes per epsilon:
//  (a) coupled gap: drive the rescaled equation (limit + remainder) and the
//      bare limit with the same Brownian increments, record sup |z - y|;
//  (b) a discrete Gronwall bound on that gap: since both schemes share their
//      noise, sup |z - y| <= t * e^{C t} * sup |R_eps| with C a sampled
//      Lipschitz bound of the limit drift, valid step by step for the
//      difference recursion;
//  (c) marginal law: rescaled originals at time eps*t against limit paths at
//      time t, compared by an energy-distance permutation test.
struct DistCheckOptions {
  double t = 1.0;
  std::vector<double> eps = {1e-2, 1e-3, 1e-4};
  int coupled_trials = 48;
  int marginal_trials = 160;
  double dt = 1e-3;          // limit-time step; original paths use eps*dt
  int permutations = 200;
  std::uint64_t seed = 20240915;
  double explosion = 1e8;
};

struct DistCheckRow {
  double eps = 0.0;
  double sup_median = 0.0;
  double sup_q90 = 0.0;
  double gronwall_bound = 0.0;  // largest bound over live trials
  bool gronwall_ok = false;
  int dead_trials = 0;
  double energy = 0.0;
  double pvalue = 1.0;
};

struct DistCheckReport {
  std::vector<DistCheckRow> rows;
  bool sup_monotone = false;     // medians non-increasing in eps (5% slack)
  bool energy_monotone = false;  // energy distances non-increasing in eps
  bool gronwall_all = false;

  bool ok() const { return sup_monotone && energy_monotone && gronwall_all; }
};

inline DistCheckReport dist_limit_check(const SdeSystem& sys, const PropagationResult& res,
                                        DistCheckOptions opt = {}) {
  if (res.mode != Mode::Dist)
    throw std::invalid_argument("dist_limit_check: needs distributional scalings");
  if (!res.propagating)
    throw std::invalid_argument("dist_limit_check: system is noise defective");
  const int n = sys.n;
  const std::size_t nu = static_cast<std::size_t>(n);
  const auto& dec = res.decomp;
  const CompiledField limit_cf = compile(dec.limit);
  const CompiledField orig_cf = compile(sys.drift);
  const EpsField rem = remainder(sys, res);

  // compiled Jacobian of the limit drift, for the sampled Lipschitz bound
  const auto jac = jacobian(dec.limit);
  std::vector<std::vector<CompiledPoly>> jac_cf(nu);
  for (std::size_t r = 0; r < nu; ++r)
    for (std::size_t c = 0; c < nu; ++c) jac_cf[r].push_back(compile(jac[r][c]));
  auto lipschitz_at = [&](const std::vector<double>& x) {
    double best = 0.0;
    for (std::size_t r = 0; r < nu; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < nu; ++c) row += std::abs(jac_cf[r][c](x.data()));
      best = std::max(best, row);
    }
    return best;
  };

  const std::vector<double> zero(nu, 0.0);
  const int steps = static_cast<int>(std::llround(opt.t / opt.dt));
  const double h = opt.t / steps;
  const double sq = std::sqrt(h);

  DistCheckReport report;
  std::uint64_t stream = 0;
  for (double eps : opt.eps) {
    const RescaledSde resc = rescaled_drift(sys, res, eps);
    const CompiledField resc_cf = compile_drift(resc);

    DistCheckRow row;
    row.eps = eps;

    // (a)+(b): coupled trials
    std::vector<double> sups;
    double worst_ratio = 0.0;
    bool gron_ok = true;
    for (int trial = 0; trial < opt.coupled_trials; ++trial) {
      RngStream rng(opt.seed, stream++);
      std::vector<double> z = zero, y = zero, fz(nu), fy(nu), xi(nu);
      double sup = 0.0, radius = 0.0, lip = lipschitz_at(zero);
      bool dead = false;
      for (int k = 0; k < steps && !dead; ++k) {
        for (std::size_t i = 0; i < nu; ++i) xi[i] = rng.normal();
        resc_cf(z.data(), fz.data());
        limit_cf(y.data(), fy.data());
        for (std::size_t i = 0; i < nu; ++i) {
          z[i] += fz[i] * h + sys.sigma[i] * sq * xi[i];
          y[i] += fy[i] * h + sys.sigma[i] * sq * xi[i];
        }
        if (state_exploded(z, opt.explosion) || state_exploded(y, opt.explosion)) {
          dead = true;
          break;
        }
        double gap = 0.0;
        for (std::size_t i = 0; i < nu; ++i) gap = std::max(gap, std::abs(z[i] - y[i]));
        sup = std::max(sup, gap);
        radius = std::max({radius, sup_norm(z), sup_norm(y)});
        if (k % 20 == 0) lip = std::max({lip, lipschitz_at(z), lipschitz_at(y)});
      }
      if (dead) {
        ++row.dead_trials;
        continue;
      }
      sups.push_back(sup);
      const double ball = std::max(1.0, 1.05 * radius);
      const auto rb = eps_field_sup_bound(rem, eps, ball);
      double sup_r = 0.0;
      for (double v : rb) sup_r = std::max(sup_r, v);
      const double bound = opt.t * std::exp(lip * opt.t) * sup_r;
      row.gronwall_bound = std::max(row.gronwall_bound, bound);
      if (sup > 1.05 * bound + 1e-9) gron_ok = false;
      if (bound > 0.0) worst_ratio = std::max(worst_ratio, sup / bound);
    }
    row.gronwall_ok = gron_ok && !sups.empty();
    row.sup_median = sups.empty() ? std::numeric_limits<double>::quiet_NaN() : median(sups);
    row.sup_q90 = sups.empty() ? std::numeric_limits<double>::quiet_NaN() : quantile(sups, 0.9);
    (void)worst_ratio;

    // (c): marginal comparison, original on [0, eps*t] vs limit on [0, t]
    std::vector<std::vector<double>> sample_orig, sample_limit;
    for (int trial = 0; trial < opt.marginal_trials; ++trial) {
      RngStream rng(opt.seed ^ 0xABCDEF1234567ULL, stream++);
      std::vector<double> xe;
      if (em_terminal(orig_cf, sys.sigma, zero, eps * opt.t, eps * opt.dt, rng, xe,
                      opt.explosion))
        sample_orig.push_back(scale_state(dec.scalings, eps, xe));
    }
    for (int trial = 0; trial < opt.marginal_trials; ++trial) {
      RngStream rng(opt.seed ^ 0x13579BDF2468ULL, stream++);
      std::vector<double> yt;
      if (em_terminal(limit_cf, sys.sigma, zero, opt.t, opt.dt, rng, yt, opt.explosion))
        sample_limit.push_back(yt);
    }
    RngStream perm_rng(opt.seed ^ 0x5A5A5A5AULL, stream++);
    const auto et =
        energy_permutation_test(sample_orig, sample_limit, opt.permutations, perm_rng);
    row.energy = et.distance;
    row.pvalue = et.pvalue;

    report.rows.push_back(row);
  }

  report.sup_monotone = true;
  report.energy_monotone = true;
  report.gronwall_all = true;
  // a row that the permutation test cannot distinguish from zero at the 5%
  // level carries no order information; comparing two such rows is noise
  const auto stat_zero = [](const DistCheckRow& r) { return r.pvalue >= 0.05; };
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (!report.rows[i].gronwall_ok) report.gronwall_all = false;
    if (i == 0) continue;
    if (report.rows[i].sup_median > report.rows[i - 1].sup_median * 1.05 + 1e-12)
      report.sup_monotone = false;
    if (!(stat_zero(report.rows[i]) && stat_zero(report.rows[i - 1])) &&
        report.rows[i].energy > report.rows[i - 1].energy * 1.05 + 1e-12)
      report.energy_monotone = false;
  }
  return report;
}

}  // namespace smalltime
