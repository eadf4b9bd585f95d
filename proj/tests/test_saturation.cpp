#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "smalltime/corpus.hpp"
#include "smalltime/saturation.hpp"

using namespace smalltime;

namespace {

bool has_symmetric_ray_on_axis(const SaturationReport& rep, int axis, int n) {
  for (const auto& el : rep.elements) {
    if (!el.is_ray || !el.symmetric) continue;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      const bool nz = el.ray[static_cast<std::size_t>(i)] != Rat(0);
      if ((i == axis) != nz) ok = false;
    }
    if (ok) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("integrator chains saturate to full span", "[saturation]") {
  for (int n = 3; n <= 8; ++n) {
    const auto rep = saturate(make_ik(n));
    INFO("n = " << n);
    REQUIRE(rep.exact_controllable);
    REQUIRE(rep.reached_fixed_point);
    REQUIRE(static_cast<int>(rep.basis.size()) == n);
  }
}

TEST_CASE("driftless noise needs no brackets at all", "[saturation]") {
  const auto rep = saturate(make_bm(2));
  REQUIRE(rep.exact_controllable);
  REQUIRE(rep.reached_fixed_point);
  REQUIRE(rep.steps_used == 1);
  REQUIRE(rep.elements.size() == 2);
}

TEST_CASE("cyclic cascades saturate with certificates", "[saturation]") {
  for (int n : {4, 5, 6}) {
    const auto sys = make_lorenz96(n);
    const auto rep = saturate(sys);
    INFO("n = " << n);
    REQUIRE(rep.exact_controllable);
    REQUIRE(rep.reached_fixed_point);
    REQUIRE(static_cast<int>(rep.basis.size()) == n);
    REQUIRE(rep.basis_index.size() == rep.basis.size());
    // the certificate really is a rational basis: re-echelonize from scratch
    std::vector<std::vector<Rat>> check;
    for (int idx : rep.basis_index) {
      const auto& el = rep.elements[static_cast<std::size_t>(idx)];
      REQUIRE(el.is_ray);
      REQUIRE(el.symmetric);
      REQUIRE(echelon_insert(check, el.ray));
    }
    REQUIRE(static_cast<int>(check.size()) == n);
  }
}

TEST_CASE("first cascade bracket matches the hand computation", "[saturation]") {
  const auto sys = make_lorenz96(5);
  const auto rep = saturate(sys);

  // br(e0, drift) = (-1, x2 - x4, -x1, 0, x3)
  PolyVectorField want = field_zero(5);
  want.comp[0] = poly_const(5, rat(-1));
  want.comp[1] = sub(poly_var(5, 2), poly_var(5, 4));
  want.comp[2] = scalar_mul(rat(-1), poly_var(5, 1));
  want.comp[4] = poly_var(5, 3);

  bool found = false;
  for (const auto& el : rep.elements)
    if (!el.is_ray && field_is_zero(field_sub(el.field, want))) {
      found = true;
      REQUIRE(el.symmetric);  // relative degree 1 is odd
    }
  REQUIRE(found);
  // bracketing that flow with the second noise direction frees coordinate 2
  REQUIRE(has_symmetric_ray_on_axis(rep, 2, 5));
}

TEST_CASE("even-degree brackets of the drift stay one-sided", "[saturation]") {
  const auto rep = saturate(corpus_systems().at("quadratic_cone"));
  REQUIRE_FALSE(rep.exact_controllable);
  REQUIRE(rep.reached_fixed_point);
  REQUIRE(rep.basis.size() == 1);

  bool cone_found = false;
  for (const auto& el : rep.elements) {
    if (!el.is_ray || el.symmetric) continue;
    if (el.ray[0] < Rat(0) && el.ray[1] == Rat(0)) cone_found = true;
  }
  REQUIRE(cone_found);
  REQUIRE_FALSE(has_symmetric_ray_on_axis(rep, 0, 2));
}

TEST_CASE("odd-degree brackets of the drift are two-sided", "[saturation]") {
  const auto rep = saturate(corpus_systems().at("quadratic_span"));
  REQUIRE(rep.exact_controllable);
  REQUIRE(has_symmetric_ray_on_axis(rep, 0, 2));
}

TEST_CASE("a duplicated-row system saturates short of full rank", "[saturation]") {
  const auto rep = saturate(make_npnh());
  REQUIRE_FALSE(rep.exact_controllable);
  REQUIRE(rep.reached_fixed_point);
  REQUIRE(rep.basis.size() == 2);  // e0 and the diagonal (0, 1, 1)
  bool diag = false;
  for (const auto& el : rep.elements)
    if (el.is_ray && el.symmetric && el.ray[0] == Rat(0) && el.ray[1] == el.ray[2] &&
        el.ray[1] != Rat(0))
      diag = true;
  REQUIRE(diag);
}

TEST_CASE("seeded rays are realized at rate 1/lambda with stable constant", "[saturation]") {
  {
    const auto sys = make_langevin(1);
    const auto chk = ray_realization(sys, 1, 1.0, 0.5, {0.3, -0.2});
    REQUIRE(chk.stable);
    REQUIRE(chk.decreasing);
  }
  {
    const auto sys = make_lorenz96(4);
    const auto chk = ray_realization(sys, 0, 1.0, 0.5, {0.1, 0.1, 0.1, 0.1});
    REQUIRE(chk.stable);
    REQUIRE(chk.decreasing);
  }
  REQUIRE_THROWS_AS(ray_realization(make_langevin(1), 0, 1.0, 0.5, {0.0, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("derived flows are realized by the conjugated construction", "[saturation]") {
  {
    const auto sys = make_lorenz96(4);
    std::vector<Rat> v{rat(1), rat(0), rat(0), rat(0)};
    const auto chk = flow_realization(sys.drift, v, 1.0, 0.5, {0.2, -0.1, 0.3, 0.0});
    REQUIRE(chk.decreasing);
    REQUIRE(chk.errors.back() < chk.errors.front() / 5.0);
  }
  {
    const auto sys = corpus_systems().at("quadratic_cone");
    std::vector<Rat> v{rat(0), rat(1)};
    REQUIRE(relative_degree(sys.drift, v) == 2);
    const auto chk = flow_realization(sys.drift, v, 1.0, 0.5, {0.1, 0.2});
    REQUIRE(chk.decreasing);
    REQUIRE(chk.errors.back() < chk.errors.front() / 5.0);
  }
}

TEST_CASE("random controls hit reachable targets and miss forbidden ones", "[saturation]") {
  ProbeOptions opt;
  opt.steps = 512;

  // endpoint of the unit-slope control: (1, 1/2, 1/6)
  const auto ik = make_ik(3);
  const auto hit = reachability_probe(ik, {1.0, 0.5, 1.0 / 6.0}, 0.4, opt);
  REQUIRE(hit.reached);
  REQUIRE_FALSE(hit.witness.empty());

  // x' = x^2 - y^2 keeps x nonpositive from the origin: the right half-plane
  // beyond the origin is untouchable
  ProbeOptions neg = opt;
  neg.attempts = 100;
  const auto miss =
      reachability_probe(corpus_systems().at("quadratic_cone"), {0.8, 0.0}, 0.2, neg);
  REQUIRE_FALSE(miss.reached);
  REQUIRE(miss.best_distance > 0.5);
}

TEST_CASE("calibrated random ball targets are all reached", "[saturation]") {
  const std::vector<SdeSystem> systems{make_ik(3), make_lorenz96(4)};
  for (std::size_t s = 0; s < systems.size(); ++s) {
    const auto& sys = systems[s];
    RngStream targets(31, s);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> c(static_cast<std::size_t>(sys.n));
      double norm = 0.0;
      for (auto& ci : c) {
        ci = 0.5 * targets.normal();
        norm += ci * ci;
      }
      const double radius = 0.35 + 0.7 * std::sqrt(norm);
      ProbeOptions opt;
      opt.steps = 512;
      opt.seed = 1000 + static_cast<std::uint64_t>(k);
      const auto res = reachability_probe(sys, c, radius, opt);
      INFO("system " << s << " target " << k << " best " << res.best_distance
                     << " radius " << radius);
      REQUIRE(res.reached);
    }
  }
}
