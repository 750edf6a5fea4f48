#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "causalfield/error.hpp"
#include "causalfield/lattice.hpp"
#include "helpers.hpp"

using namespace causalfield;
using namespace cftest;

namespace {

LatticeField random_field(const LatticeSpec& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  LatticeField f(s);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = g(rng);
  return f;
}

LatticeField dense_apply(const Eigen::MatrixXd& m, const LatticeField& f) {
  Eigen::Map<const Eigen::VectorXd> v(f.data().data(), static_cast<Eigen::Index>(f.size()));
  const Eigen::VectorXd r = m * v;
  return LatticeField(f.spec(), std::vector<double>(r.data(), r.data() + r.size()));
}

}  // namespace

TEST_CASE("matrix-free operator matches its element assembly") {
  const LatticeSpec s = spec2(12, 10, 0.1, 0.05);
  for (const auto& c : {coeffs(0.0, 0.0, 0.0, 0.0), coeffs(0.2, 0.0, 0.1, 0.5), coeffs(0.2, 0.15, 0.1, 0.5)}) {
    const WaveOperator op(bump(s, 6, 5, 4, 4, c));
    const LatticeField f = random_field(s, 1);
    CHECK(relative_difference(op.apply(f), dense_apply(op.dense(), f)) < 1e-13);
  }
}

TEST_CASE("operator is symmetric for the spacetime quadrature") {
  const LatticeSpec s = spec2(12, 10, 0.1, 0.05);
  const WaveOperator op(bump(s, 6, 5, 4, 4, coeffs(0.2, 0.15, 0.1, 0.5)));
  const LatticeField u = random_field(s, 2), v = random_field(s, 3);
  CHECK(inner(u, op.apply(v)) == doctest::Approx(inner(op.apply(u), v)).epsilon(1e-12));
}

TEST_CASE("leapfrog Green operators agree with the dense oracle") {
  const LatticeSpec s = spec2(16, 12, 0.1, 0.05);
  for (const auto& c : {coeffs(0.0, 0.0, 0.0, 0.0), coeffs(0.2, 0.0, 0.1, 0.5), coeffs(0.2, 0.15, 0.1, 0.5)}) {
    const auto p = bump(s, 8, 6, 5, 4, c);
    const GreenSolver g(p);
    const DenseGreenOracle oracle(g.op());
    const LatticeField f = source(s, 6, 6, 2.5);
    for (GreenKind k : {GreenKind::Retarded, GreenKind::Advanced, GreenKind::Commutator})
      CHECK(relative_difference(g.apply(k, f), oracle.apply(k, f)) < 1e-10);
  }
}

TEST_CASE("retarded solution vanishes before the source") {
  const LatticeSpec s = spec2(30, 40, 0.1, 0.05);
  const GreenSolver g(bump(s, 15, 20, 6, 6, coeffs(0.1, 0.05, 0.1, 0.3)));
  const LatticeField f = source(s, 14, 20, 3);
  const LatticeField u = g.retarded(f);
  for (int t = 0; t < 11; ++t)
    for (int x = 0; x < s.nx(); ++x) CHECK(u.at(t, x) == 0.0);
  CHECK(g.residual(GreenKind::Retarded, u, f) < 1e-10);
  const LatticeField a = g.advanced(f);
  for (int t = 18; t < s.nt; ++t)
    for (int x = 0; x < s.nx(); ++x) CHECK(a.at(t, x) == 0.0);
}

TEST_CASE("resolvent identity") {
  const LatticeSpec s = spec2(40, 40, 0.1, 0.05);
  const auto p = bump(s, 20, 20, 8, 8, coeffs(0.2, 0.1, 0.2, 0.5));
  const LatticeField f = source(s, 12, 18, 3);
  CHECK(resolvent_defect(p, GreenKind::Retarded, f) < 1e-10);
  CHECK(resolvent_defect(p, GreenKind::Advanced, f) < 1e-10);
}

TEST_CASE("zero perturbation reproduces the free solver exactly") {
  const LatticeSpec s = spec2(24, 24, 0.1, 0.05);
  const LatticeField f = source(s, 8, 12, 3);
  CHECK(relative_difference(GreenSolver(s).retarded(f), GreenSolver(KineticPerturbation(s)).retarded(f)) == 0.0);
}

TEST_CASE("free action variation decomposes in closed form") {
  const LatticeSpec s = spec2(12, 10, 0.1, 0.05);
  const WaveOperator k(s);
  const LatticeField phi = random_field(s, 4), phi0 = random_field(s, 5);
  const double numeric = action_variation(k, phi, phi0);
  const double closed = evaluate(free_action_variation(phi0), phi);
  CHECK(numeric == doctest::Approx(closed).epsilon(1e-10));
}

TEST_CASE("functional shift") {
  const LatticeSpec s = spec2(12, 10, 0.1, 0.05);
  const GreenSolver g(bump(s, 6, 5, 4, 4, coeffs(0.1, 0.0, 0.1, 0.2)));
  const GeneralFunctional F = weyl_functional(g, source(s, 6, 5, 2));
  const LatticeField phi = random_field(s, 6), phi0 = random_field(s, 7);
  CHECK(evaluate(functional_shift(F, phi0), phi) == doctest::Approx(evaluate(F, phi + phi0)).epsilon(1e-12));
}

TEST_CASE("CFL violation is reported") {
  const LatticeSpec s = spec2(16, 16, 0.1, 0.09, 1.9);
  CHECK_THROWS_AS(GreenSolver{s}, Error);
}
