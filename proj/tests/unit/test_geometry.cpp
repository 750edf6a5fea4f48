#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "causalfield/error.hpp"
#include "helpers.hpp"

using namespace causalfield;
using namespace cftest;

TEST_CASE("light speed of the admissibility class") {
  for (double eps : {1.0, 0.5, 0.25}) {
    const double expected = (std::numbers::sqrt2 + 1.0) / (eps * eps);
    CHECK(AdmissibilityClass::light_speed(eps) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(AdmissibilityClass::from_epsilon(eps).c == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("pointwise epsilon of simple symbols") {
  CHECK(pointwise_epsilon(SymbolCoefficients{}, 2) == 1.0);
  CHECK(pointwise_epsilon(coeffs(1.0, 0.0, 0.0, 0.0), 2) == doctest::Approx(0.5));
  CHECK(pointwise_epsilon(coeffs(0.0, 4.0, 0.0, 0.0), 2) == doctest::Approx(0.25));
  CHECK(pointwise_epsilon(coeffs(-1.0, 0.0, 0.0, 0.0), 2) == 0.0);
  CHECK(pointwise_epsilon(coeffs(0.0, 0.0, 1.0, 0.0), 2) == 0.0);
}

TEST_CASE("singular principal symbol is rejected") {
  CHECK_THROWS_AS(point_metric(coeffs(-1.0, 0.0, 0.0, 0.0), 2), Error);
  const LatticeSpec s = spec2(16, 16, 0.1, 0.05);
  const auto rep = check_admissible(bump(s, 8, 8, 4, 4, coeffs(-2.0, 0.0, 0.0, 0.0)));
  CHECK_FALSE(rep.pass);
}

TEST_CASE("block inverse agrees with dense inversion") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int i = 0; i < 200; ++i) {
    SymbolCoefficients c;
    c.p00 = u(rng);
    c.p0i = {u(rng), u(rng)};
    c.pij = {u(rng), 0.5 * u(rng), u(rng)};
    if (pointwise_epsilon(c, 3) <= 0.0) continue;
    const SmallMatrix g = point_metric(c, 3).metric();
    const PointMetric m = PointMetric::from_metric(g);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(g).inverse();
    CHECK((Eigen::MatrixXd(m.inverse()) - dense).norm() <= 1e-12 * dense.norm());
  }
}

TEST_CASE("flat metric has unit light speed") {
  CHECK(point_light_speed(point_metric(SymbolCoefficients{}, 2)) == doctest::Approx(1.0));
  CHECK(point_light_speed(point_metric(SymbolCoefficients{}, 3)) == doctest::Approx(1.0));
}

TEST_CASE("light speed of class members is dominated by c(epsilon)") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int i = 0; i < 500; ++i) {
    const auto c = coeffs(u(rng), u(rng), u(rng), 0.0);
    const double eps = pointwise_epsilon(c, 2);
    if (eps <= 0.0) continue;
    CHECK(point_light_speed(point_metric(c, 2)) <= AdmissibilityClass::light_speed(eps) * (1 + 1e-12));
  }
}

TEST_CASE("region algebra") {
  const LatticeSpec s = spec2(8, 8, 0.1, 0.05);
  Region a(s), b(s);
  a.insert(s.index(2, 3));
  b.insert(s.index(2, 3));
  b.insert(s.index(4, 4));
  CHECK(a.subset_of(b));
  CHECK_FALSE(b.subset_of(a));
  CHECK((a | b) == b);
  CHECK((a & b) == a);
  CHECK((~b).count() == s.size() - 2);
  CHECK(a.dilated(1).count() == 9);
  CHECK(a.intersects(b));
}

TEST_CASE("flat cones bracket the exact light cone") {
  const LatticeSpec s = spec2(20, 40, 0.1, 0.05);
  Region seed(s);
  seed.insert(s.index(2, 20));
  const auto speeds = flat_speed(s, 1.0);
  const Region over = causal_cone(seed, speeds, ConeDirection::Future, ConeMode::Over);
  const Region under = causal_cone(seed, speeds, ConeDirection::Future, ConeMode::Under);
  CHECK(under.subset_of(over));
  for (int t = 0; t < s.nt; ++t)
    for (int x = 0; x < s.nx(); ++x) {
      const double reach = (t - 2) * s.dt / s.dx;
      const bool inside = t >= 2 && std::abs(x - 20) <= reach;
      if (inside) CHECK(over.contains(s.index(t, x)));
      if (under.contains(s.index(t, x))) CHECK(inside);
      if (t < 2) CHECK_FALSE(over.contains(s.index(t, x)));
    }
}

TEST_CASE("non-periodic cone reaching the edge overflows") {
  const LatticeSpec s = spec2(40, 12, 0.1, 0.05, 1.9, false);
  Region seed(s);
  seed.insert(s.index(1, 6));
  CHECK_THROWS_AS(causal_cone(seed, flat_speed(s, 1.0), ConeDirection::Future, ConeMode::Over), Error);
}

TEST_CASE("causal relation of separated regions") {
  const LatticeSpec s = spec2(40, 60, 0.1, 0.05);
  Region early(s), late(s), side(s);
  early.insert(s.index(2, 30));
  late.insert(s.index(36, 30));
  side.insert(s.index(2, 5));
  const auto speeds = flat_speed(s, 1.0);
  CHECK(relation(late, early, speeds) == Relation::Succeeds);
  CHECK(relation(early, late, speeds) == Relation::Preceded);
  CHECK(relation(side, early, speeds) == Relation::Spacelike);
  CHECK(succeeds(late, early, speeds));
  CHECK(spacelike(side, early, speeds));
}

TEST_CASE("perturbed cones stay inside the c(epsilon) cone") {
  const LatticeSpec s = spec2(40, 120, 0.1, 0.04, 2.0);
  const auto p = bump(s, 20, 60, 10, 10, coeffs(0.2, 0.1, -0.2, 0.0));
  const auto adm = check_admissible(p);
  REQUIRE(adm.pass);
  Region seed(s);
  seed.insert(s.index(2, 60));
  const Region cone = causal_cone(seed, metric_from_perturbation(p), ConeDirection::Future, ConeMode::Over);
  const Region flat = causal_cone(seed, flat_speed(s, AdmissibilityClass::light_speed(adm.epsilon)),
                                  ConeDirection::Future, ConeMode::Over);
  CHECK(cone.subset_of(flat));
}

TEST_CASE("spec validation") {
  CHECK_NOTHROW(spec2(16, 16, 0.1, 0.05).validate());
  CHECK_THROWS_AS(spec2(16, 16, 0.1, 0.2).validate(), Error);
  CHECK_THROWS_AS(spec2(4, 16, 0.1, 0.05).validate(), Error);
}
