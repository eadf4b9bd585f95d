// Acceptance gate: one printed pass/fail line per criterion, exit code equal
// to the number of failed criteria. Every tolerance is pinned here, next to
// the check it guards; nothing is read from the environment.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "smalltime/control.hpp"
#include "smalltime/corpus.hpp"
#include "smalltime/numerics.hpp"
#include "smalltime/poly.hpp"
#include "smalltime/propagation.hpp"
#include "smalltime/rational.hpp"
#include "smalltime/regular.hpp"
#include "smalltime/rng.hpp"
#include "smalltime/saturation.hpp"
#include "smalltime/scaling.hpp"

using namespace smalltime;

namespace {

// --- pinned tolerances and budgets -------------------------------------------------
constexpr double kTableBudgetSec = 1.0;    // all scaling tables, combined wall time
constexpr double kHomogRelTol = 1e-9;      // leading-part homogeneity identity
constexpr double kGramClosedTol = 1e-6;    // closed-form Gramian entries and det
constexpr double kGramExactTol = 1e-12;    // driftless Gramian vs t*I
constexpr double kEigSlack = 1e-12;        // smallest-eigenvalue monotonicity slack
constexpr double kCovSigmaBand = 3.0;      // covariance band in MC standard errors
constexpr double kCovBudgetSec = 60.0;     // covariance run wall time
constexpr int kCovPaths = 100000;

// Collects sub-check failures for one criterion and the headline detail text.
struct Tally {
  bool ok = true;
  std::ostringstream fails;
  std::ostringstream note;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (!ok) fails << "; ";
    fails << what;
    ok = false;
  }
  std::string detail() const {
    if (ok) return note.str();
    return "failed: " + fails.str();
  }
};

bool pair_is(const ScalingExt& s, long long n1, long long n2) {
  return !s.is_inf && s.pair.num1 == n1 && s.pair.num2 == n2;
}

double now_sec() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// --- 1: scaling tables ---------------------------------------------------------------
bool criterion1(Tally& t) {
  const double t0 = now_sec();

  {  // one oscillator: momentum rides at (1/2,1/2), position at (3/2,1/2)
    const auto res = lil_scalings(make_langevin(1));
    t.expect(res.propagating && res.dim == 1, "oscillator table dim");
    t.expect(pair_is(res.decomp.scalings[0], 3, 1), "oscillator position scaling");
    t.expect(pair_is(res.decomp.scalings[1], 1, 1), "oscillator momentum scaling");
  }
  {  // shifted two-oscillator chain: displaced position propagates at (1,0)
    const auto res = lil_scalings(corpus_systems().at("langevin_k2_shifted"));
    t.expect(res.propagating && res.dim == 2, "shifted chain dim");
    const long long want[4][2] = {{2, 0}, {3, 1}, {1, 1}, {1, 1}};
    for (int j = 0; j < 4; ++j)
      t.expect(pair_is(res.decomp.scalings[static_cast<std::size_t>(j)], want[j][0],
                       want[j][1]),
               "shifted chain scaling " + std::to_string(j));
  }
  {  // cyclic cascade, n = 4..8: two-back recursion, wrap-around final coordinate
    for (int n = 4; n <= 8; ++n) {
      const auto res = lil_scalings(make_lorenz96(n));
      t.expect(res.propagating && res.dim == n - 2,
               "cascade n=" + std::to_string(n) + " dim");
      std::vector<ScalingPair> want(static_cast<std::size_t>(n));
      want[0] = want[1] = ScalingPair{1, 1};
      for (int j = 2; j <= n - 2; ++j)
        want[static_cast<std::size_t>(j)] =
            add(add(want[static_cast<std::size_t>(j - 1)],
                    want[static_cast<std::size_t>(j - 2)]),
                ScalingPair{2, 0});
      want[static_cast<std::size_t>(n - 1)] =
          add(want[static_cast<std::size_t>(n - 2)], ScalingPair{3, 1});
      for (int j = 0; j < n; ++j)
        t.expect(pair_is(res.decomp.scalings[static_cast<std::size_t>(j)],
                         want[static_cast<std::size_t>(j)].num1,
                         want[static_cast<std::size_t>(j)].num2),
                 "cascade n=" + std::to_string(n) + " coord " + std::to_string(j));
    }
  }
  {  // tied quartic component: strict leading loss, pure-power floor (11/2, 0)
    const auto sys = make_rdr();
    const auto lil = lil_scalings(sys);
    const auto dist = dist_scalings(sys);
    const auto lead = poly_monomial(4, Rat(1), {5, 0, 1, 0});
    const auto full =
        add(poly_monomial(4, Rat(1), {1, 0, 2, 0}), poly_monomial(4, Rat(1), {5, 0, 1, 0}));
    t.expect(sub(lil.decomp.limit.comp[3], lead).is_zero(), "tied component leading part");
    t.expect(sub(dist.decomp.limit.comp[3], full).is_zero(), "tied component full part");
    t.expect(pair_is(dist.decomp.scalings[3], 11, 0), "tied component floor");
    t.expect(lil.lil_tie[3], "tie flag");
  }
  {  // integrator chains: coordinate i sits at ((2i+1)/2, 0) in the pure-power table
    for (int n : {3, 5, 8}) {
      const auto res = dist_scalings(make_ik(n));
      t.expect(res.propagating && res.dim == n - 1,
               "chain n=" + std::to_string(n) + " dim");
      for (int i = 0; i < n; ++i)
        t.expect(pair_is(res.decomp.scalings[static_cast<std::size_t>(i)], 2 * i + 1, 0),
                 "chain n=" + std::to_string(n) + " coord " + std::to_string(i));
    }
  }
  {  // duplicated forcing still propagates in a single round
    const auto res = lil_scalings(make_npnh());
    t.expect(res.propagating && res.dim == 1, "duplicated-forcing dim");
  }

  const double dt = now_sec() - t0;
  t.expect(dt < kTableBudgetSec, "wall time over budget");
  char buf[96];
  std::snprintf(buf, sizeof buf, "tables exact, %.3f s < %.0f s", dt, kTableBudgetSec);
  t.note << buf;
  return t.ok;
}

// --- 2: decomposition invariants on the whole corpus ------------------------------
bool criterion2(Tally& t) {
  int systems = 0, homog_checks = 0;
  for (const auto& [name, sys] : corpus_systems()) {
    ++systems;
    const auto lil = lil_scalings(sys);
    const auto dist = dist_scalings(sys);

    // the two tables agree on coverage, layers, and first components
    t.expect(lil.propagating == dist.propagating, name + ": coverage verdict differs");
    t.expect(lil.uncovered == dist.uncovered, name + ": uncovered sets differ");
    t.expect(lil.decomp.layers == dist.decomp.layers, name + ": layers differ");
    for (int j = 0; j < sys.n; ++j) {
      const auto& a = lil.decomp.scalings[static_cast<std::size_t>(j)];
      const auto& b = dist.decomp.scalings[static_cast<std::size_t>(j)];
      t.expect(a.is_inf == b.is_inf && (a.is_inf || a.pair.num1 == b.pair.num1),
               name + ": first components differ at " + std::to_string(j));
    }

    for (const auto* res : {&lil, &dist}) {
      // round minima strictly increase, and every round sits one unit above its minimum
      for (std::size_t l = 1; l < res->layer_min.size(); ++l)
        t.expect(res->layer_min[l] > res->layer_min[l - 1], name + ": minima not increasing");
      const auto& dec = res->decomp;
      for (std::size_t l = 1; l < dec.layers.size(); ++l)
        for (int j : dec.layers[l])
          t.expect(!dec.scalings[static_cast<std::size_t>(j)].is_inf &&
                       dec.scalings[static_cast<std::size_t>(j)].pair.num1 ==
                           res->layer_min[l - 1] + 2,
                   name + ": layer offset broken at " + std::to_string(j));
    }

    // pathwise leading parts embed in the pure-power ones, coefficient for coefficient
    for (int j = 0; j < sys.n; ++j) {
      const auto& small = lil.decomp.limit.comp[static_cast<std::size_t>(j)];
      const auto& big = dist.decomp.limit.comp[static_cast<std::size_t>(j)];
      for (const auto& mn : small.terms) {
        bool found = false;
        for (const auto& other : big.terms)
          if (other.e == mn.e && other.c == mn.c) {
            found = true;
            break;
          }
        t.expect(found, name + ": leading part not contained at " + std::to_string(j));
      }
    }

    // homogeneity identity of the leading parts (needs every scaling finite)
    if (!lil.propagating) continue;
    std::uint64_t stream = 0;
    for (const auto* res : {&lil, &dist}) {
      const auto& dec = res->decomp;
      RngStream rng(404, stream++);
      for (int j = 0; j < sys.n; ++j) {
        const auto& pj = dec.limit.comp[static_cast<std::size_t>(j)];
        if (pj.is_zero()) continue;
        const ScalingPair target =
            smalltime::sub(dec.scalings[static_cast<std::size_t>(j)].pair, ScalingPair{2, 0});
        for (int trial = 0; trial < 3; ++trial) {
          std::vector<double> x(static_cast<std::size_t>(sys.n));
          for (auto& xi : x) xi = rng.uniform(-1.5, 1.5);
          for (double eps : {0.3, 0.05}) {
            std::vector<double> y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
              y[i] = eval_epsilon(dec.scalings[i].pair, eps) * x[i];
            const double lhs = evaluate(pj, y);
            const double rhs = eval_epsilon(target, eps) * evaluate(pj, x);
            const double scale = std::max(std::abs(rhs), 1e-12);
            ++homog_checks;
            t.expect(std::abs(lhs - rhs) <= kHomogRelTol * scale,
                     name + ": homogeneity identity at " + std::to_string(j));
          }
        }
      }
    }
  }
  t.note << systems << " systems, " << homog_checks << " homogeneity evaluations, rel tol "
         << kHomogRelTol;
  return t.ok;
}

// --- 3: gramian ----------------------------------------------------------------------
bool criterion3(Tally& t) {
  {  // two-dim chain from the origin: closed form [[1,-1/2],[-1/2,1/3]], det 1/12
    const auto sys = make_kolmogorov2();
    const auto rep = gramian(sys.drift, sys.sigma, {0.0, 0.0});
    const double want[2][2] = {{1.0, -0.5}, {-0.5, 1.0 / 3.0}};
    double dev = 0.0;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        dev = std::max(dev, std::abs(rep.gram(r, c) - want[r][c]));
    t.expect(dev <= kGramClosedTol, "closed-form entries");
    t.expect(std::abs(rep.gram.determinant() - 1.0 / 12.0) <= kGramClosedTol,
             "closed-form determinant");
    t.expect(rep.invertible, "closed-form invertibility");
    t.expect(rep.inverse_check <= kGramClosedTol, "inverse-flow audit");
    char buf[64];
    std::snprintf(buf, sizeof buf, "closed form dev %.2e", dev);
    t.note << buf;
  }
  {  // driftless: G_t is exactly t * I
    for (const char* name : {"bm2", "bm3"}) {
      const auto sys = corpus_systems().at(name);
      for (double tt : {0.7, 1.0}) {
        GramianOptions opt;
        opt.t = tt;
        const auto rep =
            gramian(sys.drift, sys.sigma, std::vector<double>(sys.n, 0.0), opt);
        double dev = 0.0;
        for (int r = 0; r < sys.n; ++r)
          for (int c = 0; c < sys.n; ++c)
            dev = std::max(dev, std::abs(rep.gram(r, c) - (r == c ? tt : 0.0)));
        t.expect(dev <= kGramExactTol, std::string(name) + ": driftless deviation");
      }
    }
  }
  {  // smallest eigenvalue is nondecreasing along one trajectory
    GramianOptions opt;
    opt.t = 1.0;
    for (int k = 1; k <= 10; ++k) opt.snapshot_times.push_back(0.1 * k);
    const auto chain = make_kolmogorov2();
    const auto osc = make_langevin(1);
    const struct {
      const PolyVectorField* drift;
      const std::vector<double>* sigma;
      std::vector<double> x0;
      const char* label;
    } runs[] = {{&chain.drift, &chain.sigma, {0.0, 0.0}, "chain"},
                {&osc.drift, &osc.sigma, {0.3, -0.1}, "oscillator"}};
    for (const auto& run : runs) {
      const auto rep = gramian(*run.drift, *run.sigma, run.x0, opt);
      t.expect(rep.snapshots.size() == 10, std::string(run.label) + ": snapshot count");
      for (std::size_t i = 1; i < rep.snapshots.size(); ++i)
        t.expect(rep.snapshots[i].min_eig >= rep.snapshots[i - 1].min_eig - kEigSlack,
                 std::string(run.label) + ": min eig dipped at t=" +
                     std::to_string(rep.snapshots[i].t));
    }
  }
  t.note << ", driftless tol " << kGramExactTol;
  return t.ok;
}

// --- 4: bracket rank ------------------------------------------------------------------
bool criterion4(Tally& t) {
  {  // integrator chain spans in exactly n brackets
    const auto rep = hormander_rank(make_ik(3), {Rat(0), Rat(0), Rat(0)});
    t.expect(rep.full_rank && rep.rank == 3, "chain rank");
  }
  {  // duplicated forcing never exceeds rank 2, anywhere
    const auto sys = make_npnh();
    RngStream rng(81, 0);
    for (int k = 0; k < 10; ++k) {
      std::vector<Rat> x;
      for (int i = 0; i < 3; ++i)
        x.push_back(rat(rng.uniform_int(-64, 64), rng.uniform_int(1, 16)));
      const auto rep = hormander_rank(sys, x);
      t.expect(rep.rank == 2 && !rep.full_rank,
               "duplicated forcing rank at point " + std::to_string(k));
    }
  }
  {  // full forcing is elliptic: depth 1 suffices
    for (const char* name : {"bm2", "bm3"}) {
      const auto sys = corpus_systems().at(name);
      HormanderOptions opt;
      opt.depth = 1;
      const auto rep = hormander_rank(sys, std::vector<Rat>(sys.n, Rat(0)), opt);
      t.expect(rep.full_rank && rep.depth_used == 1, std::string(name) + ": depth-1 span");
    }
  }
  t.note << "chain 3/3, degenerate 2/3 at 10 points, elliptic depth 1";
  return t.ok;
}

// --- 5: saturation ---------------------------------------------------------------------
bool criterion5(Tally& t) {
  const auto certified_exact = [&](const SdeSystem& sys, const std::string& label) {
    const auto rep = saturate(sys);
    t.expect(rep.exact_controllable, label + ": not exact");
    t.expect(rep.reached_fixed_point, label + ": no stable family");
    t.expect(static_cast<int>(rep.basis.size()) == sys.n, label + ": basis size");
    std::vector<std::vector<Rat>> probe;
    for (int idx : rep.basis_index) {
      const auto& el = rep.elements[static_cast<std::size_t>(idx)];
      t.expect(el.is_ray && el.symmetric, label + ": certificate element not a ray");
      echelon_insert(probe, el.ray);
    }
    t.expect(static_cast<int>(probe.size()) == sys.n, label + ": certificate rank");
  };
  for (int n = 3; n <= 8; ++n) certified_exact(make_ik(n), "chain n=" + std::to_string(n));
  for (int n : {4, 5, 6}) certified_exact(make_lorenz96(n), "cascade n=" + std::to_string(n));

  {  // quadratic with a one-sided first coordinate: cone ray present, span absent
    const auto rep = saturate(make_quadratic_planar(Rat(1), Rat(0)));
    t.expect(!rep.exact_controllable, "cone: falsely exact");
    bool one_sided = false, span = false;
    for (const auto& el : rep.elements) {
      if (!el.is_ray || el.ray[1] != Rat(0) || el.ray[0] == Rat(0)) continue;
      if (el.symmetric)
        span = true;
      else if (el.ray[0] < Rat(0))
        one_sided = true;
    }
    t.expect(one_sided, "cone: negative ray missing");
    t.expect(!span, "cone: spurious two-sided ray");
  }
  {  // ray realization: lambda * error stays in a narrow band and errors decrease
    const auto osc = ray_realization(make_langevin(1), 1, 1.0, 0.5, {0.3, -0.2});
    t.expect(osc.stable && osc.decreasing, "oscillator ray realization");
    const auto casc =
        ray_realization(make_lorenz96(4), 0, 1.0, 0.5, std::vector<double>(4, 0.1));
    t.expect(casc.stable && casc.decreasing, "cascade ray realization");
    if (osc.scaled.size() == 3) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "lambda*err %.3g/%.3g/%.3g", osc.scaled[0],
                    osc.scaled[1], osc.scaled[2]);
      t.note << buf;
    }
  }
  return t.ok;
}

// --- 6: limit statistics at desk scale ---------------------------------------------
bool criterion6(Tally& t) {
  {  // rescaled two-dim chain: terminal covariance vs [[1,1/2],[1/2,1/3]]
    const double t0 = now_sec();
    const auto sys = make_kolmogorov2();
    const auto res = dist_scalings(sys);
    const auto resc = rescaled_drift(sys, res, 1e-2);
    const auto cf = compile_drift(resc);
    std::vector<double> sigma = resc.sigma;
    for (auto& s : sigma) s *= resc.noise_mult;

    double s0 = 0, s1 = 0, s00 = 0, s01 = 0, s11 = 0;
    int dead = 0;
    std::vector<double> out;
    for (int k = 0; k < kCovPaths; ++k) {
      RngStream rng(42424242, static_cast<std::uint64_t>(k));
      if (!em_terminal(cf, sigma, {0.0, 0.0}, 1.0, 1e-3, rng, out)) {
        ++dead;
        continue;
      }
      s0 += out[0];
      s1 += out[1];
      s00 += out[0] * out[0];
      s01 += out[0] * out[1];
      s11 += out[1] * out[1];
    }
    const double live = kCovPaths - dead;
    t.expect(dead == 0, "dead covariance paths");
    const double m0 = s0 / live, m1 = s1 / live;
    const double c00 = (s00 - live * m0 * m0) / (live - 1);
    const double c01 = (s01 - live * m0 * m1) / (live - 1);
    const double c11 = (s11 - live * m1 * m1) / (live - 1);
    // gaussian standard errors of sample covariances: var = (C_ii C_jj + C_ij^2) / N
    const double want00 = 1.0, want01 = 0.5, want11 = 1.0 / 3.0;
    const double se00 = std::sqrt((want00 * want00 + want00 * want00) / live);
    const double se01 = std::sqrt((want00 * want11 + want01 * want01) / live);
    const double se11 = std::sqrt((want11 * want11 + want11 * want11) / live);
    double worst = 0.0;
    worst = std::max(worst, std::abs(c00 - want00) / se00);
    worst = std::max(worst, std::abs(c01 - want01) / se01);
    worst = std::max(worst, std::abs(c11 - want11) / se11);
    t.expect(worst <= kCovSigmaBand, "covariance outside the band");
    const double dt = now_sec() - t0;
    t.expect(dt < kCovBudgetSec, "covariance run over budget");
    char buf[96];
    std::snprintf(buf, sizeof buf, "cov dev %.2f se (band %.0f), %.1f s; ", worst,
                  kCovSigmaBand, dt);
    t.note << buf;
  }
  {  // coupled gap to the limit flow shrinks with eps
    const auto sys = make_langevin(1);
    DistCheckOptions opt;
    opt.coupled_trials = 32;
    opt.marginal_trials = 40;
    opt.permutations = 100;
    const auto rep = dist_limit_check(sys, dist_scalings(sys), opt);
    t.expect(rep.sup_monotone, "coupled sup medians not decreasing");
    t.expect(rep.gronwall_all, "coupled gap above its bound");
    t.expect(rep.rows.size() == 3 &&
                 rep.rows.back().sup_median < rep.rows.front().sup_median,
             "no overall decrease");
    if (rep.rows.size() == 3) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "sup medians %.2e/%.2e/%.2e; ",
                    rep.rows[0].sup_median, rep.rows[1].sup_median,
                    rep.rows[2].sup_median);
      t.note << buf;
    }
  }
  {  // certified dilation exponents and sign-direction certificates on the cascade
    const auto sys = make_lorenz96(5);
    const auto dec = dist_scalings(sys).decomp;
    const auto hom = component_homogeneity(dec, sys.sigma);
    t.expect(hom.certified, "exponents not certified");
    const double want[5] = {1, 1, 2, 3, 4};
    for (int j = 0; j < 5; ++j)
      t.expect(std::abs(hom.alpha[static_cast<std::size_t>(j)] - want[j]) <= 1e-12,
               "exponent " + std::to_string(j));
    for (int j : {2, 4})
      for (double sgn : {1.0, -1.0}) {
        std::vector<double> v(5, 0.0);
        v[static_cast<std::size_t>(j)] = sgn;
        const auto cert = direction_certificate(dec, sys.sigma, v);
        t.expect(cert.found, "direction not certified");
        t.expect(cert.homogeneity_checked && cert.homogeneity_ok,
                 "shrink violated the certified exponents");
      }
    t.note << "4 direction certificates under certified exponents";
  }
  return t.ok;
}

// --- 7: regular points ------------------------------------------------------------------
bool criterion7(Tally& t) {
  {  // driftless block above a cone graph
    std::vector<SignomialTerm> terms;
    for (int i = 0; i < 2; ++i) {
      SignomialTerm tm;
      tm.c = rat(3, 4);
      tm.r.assign(3, Rat(0));
      tm.r[static_cast<std::size_t>(i)] = Rat(1);
      terms.push_back(std::move(tm));
    }
    const auto rep = check_regular(make_bm(3), std::vector<Rat>(3, Rat(0)),
                                   DomainSpec::graph(3, 2, std::move(terms)));
    t.expect(rep.regular && rep.failing_stage.empty(), "cone graph not regular");
  }
  {  // integrator chain over the root-exponent graph
    std::vector<SignomialTerm> terms;
    for (int i = 1; i < 3; ++i) {
      SignomialTerm tm;
      tm.c = rat(1);
      tm.r.assign(3, Rat(0));
      tm.r[static_cast<std::size_t>(i)] = Rat(1, 2 * i + 1);
      terms.push_back(std::move(tm));
    }
    const auto rep = check_regular(make_ik(3), std::vector<Rat>(3, Rat(0)),
                                   DomainSpec::graph(3, 0, std::move(terms)));
    t.expect(rep.regular, "chain graph not regular");
    t.expect(rep.reach_evidence == "saturation", "chain graph evidence");
  }
  {  // oscillator energy level set, moving and turning boundary points
    const auto sys = make_langevin(1);
    const auto H =
        add(poly_monomial(2, rat(1, 2), {0, 2}), poly_monomial(2, rat(1, 4), {4, 0}));
    const std::vector<Rat> moving{rat(1, 2), rat(1)};
    const std::vector<Rat> turning{rat(1, 2), rat(0)};
    const auto rep_m = check_regular(sys, moving, level_set_domain(H, moving));
    t.expect(rep_m.regular, "moving point not regular");
    t.expect(rep_m.reach_evidence == "probe", "moving point evidence");
    const auto rep_t = check_regular(sys, turning, level_set_domain(H, turning));
    t.expect(rep_t.regular, "turning point not regular");
    t.expect(rep_t.reach_evidence == "saturation", "turning point evidence");

    // same seeds, same verdict and witness: the probe stage is reproducible
    const auto rep_m2 = check_regular(sys, moving, level_set_domain(H, moving));
    t.expect(rep_m2.regular == rep_m.regular &&
                 rep_m2.reach_evidence == rep_m.reach_evidence &&
                 rep_m2.probe.witness == rep_m.probe.witness,
             "probe stage not reproducible");
  }
  {  // stalled propagation is reported as inconclusive, not decided
    SignomialTerm tm;
    tm.c = rat(1);
    tm.r.assign(5, Rat(0));
    tm.r[0] = Rat(1);
    const auto rep =
        check_regular(corpus_systems().at("lorenz96_n5_defective"),
                      std::vector<Rat>(5, Rat(0)), DomainSpec::graph(5, 4, {tm}));
    t.expect(!rep.regular && rep.failing_stage == "propagation",
             "stalled system not flagged");
  }
  t.note << "4 verdicts exact, probe stage seeded and reproducible";
  return t.ok;
}

// --- 8: malliavin frequency ---------------------------------------------------------
bool criterion8(Tally& t) {
  MalliavinOptions opt;
  opt.trials = 200;
  opt.cross_check_all = true;

  const auto chain = malliavin_mc(make_kolmogorov2(), opt);
  t.expect(chain.event_trials > 0, "chain: no event trials");
  t.expect(chain.invertible_trials == chain.event_trials && chain.freq == 1.0,
           "chain: frequency below one");
  t.expect(chain.cross_checked == chain.invertible_trials, "chain: cross-check skipped trials");
  t.expect(chain.cross_check_failures == 0, "chain: cross-check disagreement");

  const auto dup = malliavin_mc(make_npnh(), opt);
  t.expect(dup.event_trials > 0, "degenerate: no event trials");
  t.expect(dup.invertible_trials == 0 && dup.freq == 0.0, "degenerate: frequency above zero");
  t.expect(dup.cross_check_failures == 0, "degenerate: cross-check disagreement");

  t.note << "freq 1.0 over " << chain.event_trials << " events ("
         << chain.cross_checked << " cross-checked), degenerate freq 0.0 over "
         << dup.event_trials << " events";
  return t.ok;
}

}  // namespace

int main() {
  const struct {
    int id;
    const char* label;
    bool (*fn)(Tally&);
  } rows[] = {
      {1, "scaling tables", criterion1},
      {2, "decomposition invariants", criterion2},
      {3, "gramian", criterion3},
      {4, "bracket rank", criterion4},
      {5, "saturation", criterion5},
      {6, "limit statistics", criterion6},
      {7, "regular points", criterion7},
      {8, "malliavin frequency", criterion8},
  };

  int failures = 0;
  for (const auto& row : rows) {
    Tally t;
    bool ok;
    try {
      ok = row.fn(t);
    } catch (const std::exception& e) {
      ok = false;
      t.ok = false;
      t.fails << "exception: " << e.what();
    }
    std::printf("criterion %d (%s): %s — %s\n", row.id, row.label, ok ? "PASS" : "FAIL",
                t.detail().c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
