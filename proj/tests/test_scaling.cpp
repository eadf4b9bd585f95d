#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "smalltime/scaling.hpp"

using namespace smalltime;

namespace {
ScalingExt fin(long long n1, long long n2) { return ScalingExt::finite(n1, n2); }
}  // namespace

TEST_CASE("order: larger log-log power is smaller on first-component ties", "[scaling]") {
  // values (9/2, 7/2) vs (9/2, 5/2)
  CHECK(compare(fin(9, 7), fin(9, 5)) == Cmp::Less);
  CHECK(compare(fin(9, 5), fin(9, 7)) == Cmp::Greater);
  // values (1, 1) vs (3/2, 1/2): first components decide
  CHECK(compare(fin(2, 2), fin(3, 1)) == Cmp::Less);
  // values (0, 0) vs (0, -1/2): zero is below anything with negative second part
  CHECK(compare(fin(0, 0), fin(0, -1)) == Cmp::Less);
  CHECK(compare(fin(4, -3), fin(4, -3)) == Cmp::Equal);
}

TEST_CASE("order: infinity is the top element and equals itself", "[scaling]") {
  CHECK(compare(fin(100, -50), ScalingExt::infinity()) == Cmp::Less);
  CHECK(compare(ScalingExt::infinity(), fin(0, 0)) == Cmp::Greater);
  CHECK(compare(ScalingExt::infinity(), ScalingExt::infinity()) == Cmp::Equal);
}

TEST_CASE("order: total and transitive on a random sample", "[scaling]") {
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<long long> d(-6, 8);
  std::vector<ScalingExt> xs;
  for (int i = 0; i < 40; ++i) xs.push_back(fin(std::abs(d(rng)), d(rng)));
  xs.push_back(ScalingExt::infinity());
  xs.push_back(ScalingExt::infinity());

  for (const auto& a : xs)
    for (const auto& b : xs) {
      Cmp ab = compare(a, b), ba = compare(b, a);
      if (ab == Cmp::Less) CHECK(ba == Cmp::Greater);
      if (ab == Cmp::Equal) CHECK(ba == Cmp::Equal);
      for (const auto& c : xs) {
        if (compare(a, b) != Cmp::Greater && compare(b, c) != Cmp::Greater)
          CHECK(compare(a, c) != Cmp::Greater);
      }
    }
}

TEST_CASE("sum is componentwise with absorbing infinity", "[scaling]") {
  CHECK(add(fin(1, 1), fin(1, 1)) == fin(2, 2));            // (1/2,1/2)+(1/2,1/2)=(1,1)
  CHECK(add(fin(3, -1), fin(0, 2)) == fin(3, 1));           // (3/2,-1/2)+(0,1)=(3/2,1/2)
  CHECK(add(fin(6, 0), ScalingExt::infinity()) == ScalingExt::infinity());
  CHECK(add(ScalingExt::infinity(), ScalingExt::infinity()) == ScalingExt::infinity());
}

TEST_CASE("scalar multiples; zero times infinity is the zero pair", "[scaling]") {
  CHECK(scalar_mul(0, ScalingExt::infinity()) == fin(0, 0));
  CHECK(scalar_mul(0, fin(5, 3)) == fin(0, 0));
  CHECK(scalar_mul(2, fin(1, 1)) == fin(2, 2));
  CHECK(scalar_mul(5, fin(1, 1)) == fin(5, 5));
  CHECK(scalar_mul(3, ScalingExt::infinity()) == ScalingExt::infinity());
  CHECK_THROWS(scalar_mul(-1, fin(1, 0)));
}

TEST_CASE("evaluation against eps", "[scaling]") {
  // At eps = e^-e the log-log factor is exactly 1.
  const double eps0 = std::exp(-std::exp(1.0));
  CHECK(eval_epsilon(fin(1, 1).pair, eps0) ==
        Catch::Approx(std::exp(-std::exp(1.0) / 2.0)).epsilon(1e-12));
  CHECK(eval_epsilon(fin(0, -7).pair, eps0) == Catch::Approx(1.0).epsilon(1e-12));

  // Independent arithmetic for a generic point.
  const double eps = 1e-8;
  const double ll = std::log(std::log(1.0 / eps));
  CHECK(eval_epsilon(fin(0, -2).pair, eps) == Catch::Approx(1.0 / ll).epsilon(1e-12));
  CHECK(eval_epsilon(fin(3, 1).pair, eps) ==
        Catch::Approx(std::pow(eps, 1.5) * std::sqrt(ll)).epsilon(1e-12));

  CHECK(eval_epsilon(ScalingExt::infinity(), eps) == 0.0);
  CHECK_THROWS_AS(eval_epsilon(fin(1, 0).pair, 0.5), std::domain_error);
  CHECK_THROWS_AS(eval_epsilon(fin(1, 0).pair, 0.0), std::domain_error);
  CHECK_THROWS_AS(eval_epsilon(fin(1, 0).pair, -1e-3), std::domain_error);
}

TEST_CASE("order is consistent with evaluation for small eps", "[scaling]") {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<long long> d1(0, 8), d2(-6, 6);
  std::vector<ScalingExt> xs;
  for (int i = 0; i < 30; ++i) xs.push_back(fin(d1(rng), d2(rng)));

  const double eps_hi = 1e-6, eps_lo = 1e-16;
  for (const auto& a : xs)
    for (const auto& b : xs) {
      if (compare(a, b) != Cmp::Less) continue;
      const double ra = eval_epsilon(a, eps_lo), rb = eval_epsilon(b, eps_lo);
      CHECK(ra > rb);  // strictly larger at the small end of the grid
      // and the gap widens as eps shrinks
      const double ratio_hi = eval_epsilon(b, eps_hi) / eval_epsilon(a, eps_hi);
      const double ratio_lo = rb / ra;
      CHECK(ratio_lo < ratio_hi * (1.0 + 1e-9));
    }
}

TEST_CASE("json serialization round-trips and matches the schema", "[scaling]") {
  nlohmann::json j = fin(3, 1);
  CHECK(j.dump() == R"({"num1":3,"num2":1})");
  CHECK(j.get<ScalingExt>() == fin(3, 1));

  nlohmann::json ji = ScalingExt::infinity();
  CHECK(ji.dump() == R"({"inf":true})");
  CHECK(ji.get<ScalingExt>() == ScalingExt::infinity());

  CHECK(nlohmann::json::parse(R"({"num1":-4,"num2":0})").get<ScalingExt>() == fin(-4, 0));
  CHECK_THROWS(nlohmann::json::parse(R"({"inf":false})").get<ScalingExt>());
}

TEST_CASE("human-readable formatting uses fractions over 2", "[scaling]") {
  CHECK(format(fin(3, 1)) == "(3/2, 1/2)");
  CHECK(format(fin(4, -1)) == "(2, -1/2)");
  CHECK(format(fin(0, -2)) == "(0, -1)");
  CHECK(format(ScalingExt::infinity()) == "inf");
}
