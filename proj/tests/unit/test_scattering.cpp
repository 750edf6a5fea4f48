#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "causalfield/error.hpp"
#include "causalfield/scattering.hpp"
#include "helpers.hpp"

using namespace causalfield;
using namespace cftest;

namespace {

LatticeSpec scatter_spec() { return spec2(80, 60, 0.1, 0.05, 1.9); }

}  // namespace

TEST_CASE("T of the zero perturbation is the identity") {
  const LatticeSpec s = scatter_spec();
  const ScatteringMap t(KineticPerturbation{s});
  CHECK(t.trivial());
  for (const auto& f : probe_basis(s, 4, 1, 40, 4.0)) {
    const LatticeField g = t.apply(f);
    CHECK(relative_difference(g, f) == 0.0);
  }
}

TEST_CASE("T inverse undoes T") {
  const LatticeSpec s = scatter_spec();
  const ScatteringMap t(bump(s, 40, 30, 10, 10, coeffs(0.2, 0.1, 0.2, 1.0)));
  for (const auto& f : probe_basis(s, 4, 2, 40, 4.0))
    CHECK(relative_difference(t.apply_inverse(t.apply(f)), f) < 1e-9);
}

TEST_CASE("T preserves the symplectic form") {
  const LatticeSpec s = scatter_spec();
  const ScatteringMap t(bump(s, 40, 30, 10, 10, coeffs(0.2, 0.1, 0.2, 1.0)));
  const auto probes = probe_basis(s, 6, 3, 40, 4.0);
  for (std::size_t i = 0; i < probes.size(); ++i)
    for (std::size_t j = i + 1; j < probes.size(); ++j) CHECK(symplectic_defect(t, probes[i], probes[j]) < 1e-6);
}

TEST_CASE("Minkowski factorization for ordered supports") {
  const LatticeSpec s = scatter_spec();
  const auto late = bump(s, 62, 30, 8, 8, coeffs(0.2, 0.0, 0.2, 1.0));
  const auto early = bump(s, 18, 30, 8, 8, coeffs(0.2, 0.0, 0.2, 1.0));
  REQUIRE(certified_order(late, early, nullptr));
  CHECK_FALSE(certified_order(early, late, nullptr));
  const auto probes = probe_basis(s, 4, 4, 40, 4.0);
  CHECK(factorization_defect(late, early, nullptr, probes).defect < 1e-8);
  CHECK_THROWS_AS(factorization_defect(early, late, nullptr, probes), Error);
  CHECK(factorization_defect(early, late, nullptr, probes, false).defect > 1e-4);
}

TEST_CASE("perturbations with spacelike supports commute") {
  const LatticeSpec s = spec2(40, 120, 0.1, 0.05, 1.9);
  const ScatteringMap a(bump(s, 20, 25, 6, 6, coeffs(0.2, 0.0, 0.2, 1.0)));
  const ScatteringMap b(bump(s, 20, 95, 6, 6, coeffs(0.2, 0.0, 0.2, 1.0)));
  for (const auto& f : probe_basis(s, 3, 5, 20, 4.0)) CHECK(commutation_defect(a, b, f) < 1e-10);
}

TEST_CASE("content hash identifies perturbations") {
  const LatticeSpec s = scatter_spec();
  const auto p = bump(s, 40, 30, 10, 10, coeffs(0.2, 0.1, 0.2, 1.0));
  const auto q = bump(s, 40, 30, 10, 10, coeffs(0.2, 0.1, 0.2, 1.0));
  const auto r = bump(s, 40, 31, 10, 10, coeffs(0.2, 0.1, 0.2, 1.0));
  CHECK(content_hash(p) == content_hash(q));
  CHECK(content_hash(p) != content_hash(r));
  SolverCache cache;
  CHECK(cache.get(p) == cache.get(q));
  CHECK(cache.size() == 1);
}

TEST_CASE("causal split reconstructs the source") {
  const LatticeSpec s = scatter_spec();
  const auto q = bump(s, 20, 30, 8, 8, coeffs(0.2, 0.0, 0.2, 1.0));
  const auto split = causal_split(probe_basis(s, 1, 6, 40, 4.0).front(), q);
  CHECK(split.certified);
  CHECK(split.reconstruction_residual < 1e-9);
}
