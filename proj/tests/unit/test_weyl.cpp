#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "causalfield/error.hpp"
#include "causalfield/weyl.hpp"
#include "helpers.hpp"

using namespace causalfield;
using namespace cftest;

namespace {

LatticeSpec small_spec() {
  LatticeSpec s = spec2(40, 8, 0.5, 0.1, 2.0);
  s.mass = 1.0;
  return s;
}

std::size_t binomial(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<std::size_t>(std::llround(r));
}

}  // namespace

TEST_CASE("Fock space dimension and ranking") {
  const FockSpace fock(5, 3);
  CHECK(fock.dim() == binomial(8, 3));
  CHECK(fock.rank(std::vector<int>(5, 0)) == 0);
  for (std::size_t i = 0; i < fock.dim(); ++i) CHECK(fock.rank(fock.occupations(i)) == i);
  CHECK(fock.top_shell_weight(fock.vacuum()) == 0.0);
}

TEST_CASE("quadratic operator is Hermitian") {
  const FockSpace fock(3, 4);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Random(3, 3), g = Eigen::MatrixXcd::Random(3, 3);
  h = (h + h.adjoint()).eval();
  g = (g + g.transpose()).eval();
  const Eigen::MatrixXcd m = fock.dense_quadratic(h, g);
  Eigen::VectorXcd v = Eigen::VectorXcd::Random(static_cast<Eigen::Index>(fock.dim())), out;
  fock.apply_quadratic(h, g, v, out);
  CHECK((m * v - out).norm() < 1e-12);
  CHECK((m - m.adjoint()).norm() < 1e-12 * (1.0 + m.norm()));
}

TEST_CASE("scalar product and symplectic form") {
  const LatticeSpec s = small_spec();
  const GreenSolver free(s);
  const OneParticleSpace space(s);
  const auto probes = probe_basis(s, 4, 1, 20, 3.0);
  for (std::size_t i = 0; i < probes.size(); ++i)
    for (std::size_t j = 0; j < probes.size(); ++j) {
      const auto a = SolutionClass::of(free, probes[i]), b = SolutionClass::of(free, probes[j]);
      const double pairing = inner(probes[i], free.apply(GreenKind::Commutator, probes[j]));
      CHECK(symplectic_form(a, b) == doctest::Approx(pairing).epsilon(1e-9).scale(1e-3));
      CHECK(space.scalar_product(a, b).imag() == doctest::Approx(pairing).epsilon(1e-9).scale(1e-3));
    }
}

TEST_CASE("amplitudes round trip") {
  const LatticeSpec s = small_spec();
  const GreenSolver free(s);
  const OneParticleSpace space(s);
  const auto u = SolutionClass::of(free, probe_basis(s, 1, 2, 20, 3.0).front());
  const auto back = space.from_amplitudes(space.amplitudes(u));
  double d = 0.0;
  for (std::size_t k = 0; k < u.u0.size(); ++k) d = std::max({d, std::abs(u.u0[k] - back.u0[k]), std::abs(u.u1[k] - back.u1[k])});
  CHECK(d < 1e-12 * u.max_abs());
}

TEST_CASE("Weyl relations") {
  const LatticeSpec s = small_spec();
  const GreenSolver free(s);
  const auto probes = probe_basis(s, 3, 3, 20, 3.0);
  const auto a = weyl_element(free, probes[0]), b = weyl_element(free, probes[1]), c = weyl_element(free, probes[2]);
  const auto left = weyl_product(weyl_product(a, b), c), right = weyl_product(a, weyl_product(b, c));
  CHECK(std::remainder(left.angle - right.angle, 2 * M_PI) == doctest::Approx(0.0).scale(1e-12));
  const auto one = weyl_product(a, weyl_inverse(a));
  CHECK(one.cls.max_abs() < 1e-14);
  const double pairing = inner(probes[0], free.apply(GreenKind::Commutator, probes[1]));
  CHECK(weyl_product(a, b).angle == doctest::Approx(-0.5 * pairing).scale(1e-6));
}

TEST_CASE("identity map has trivial Bogoliubov blocks and implementer") {
  const LatticeSpec s = small_spec();
  const OneParticleSpace space(s);
  const ScatteringMap t(KineticPerturbation{s});
  const Bogoliubov b = mode_matrix(t, space);
  CHECK(b.hs_norm() < 1e-12);
  CHECK(b.symplectic_defect() < 1e-12);
  ImplementerOptions opt;
  opt.n_max = 3;
  const auto impl = build_implementer(t, opt);
  const auto v = impl.fock().vacuum();
  CHECK((impl.apply(v) - v).norm() < 1e-12);
}

TEST_CASE("implementer of a small perturbation") {
  const LatticeSpec s = small_spec();
  ImplementerOptions opt;
  opt.n_max = 4;
  const auto impl = build_implementer(bump(s, 20, 4, 4, 2, coeffs(0.05, 0.0, 0.05, 0.15)), opt);
  CHECK(impl.bogoliubov().symplectic_defect() < 1e-8);
  CHECK(impl.bogoliubov().symmetry_defect() < 1e-8);
  CHECK(impl.bogoliubov().hs_norm() > 0.0);
  CHECK(impl.unitarity_defect(probe_states(impl.fock(), 1, 4)) < 1e-10);
  const cplx overlap = impl.fock().vacuum().dot(impl.apply(impl.fock().vacuum()));
  CHECK(overlap.imag() == doctest::Approx(0.0).scale(1e-12));
  CHECK(overlap.real() > 0.0);
}

TEST_CASE("implementer cache is single flight and persists mode matrices") {
  const LatticeSpec s = small_spec();
  const auto p = bump(s, 20, 4, 4, 2, coeffs(0.05, 0.0, 0.05, 0.15));
  const auto dir = std::filesystem::temp_directory_path() / "causalfield-unit-cache";
  std::filesystem::remove_all(dir);
  ImplementerOptions opt;
  opt.n_max = 4;
  ImplementerCache first(dir.string());
  const auto a = first.get(p, opt);
  CHECK(first.get(p, opt) == a);
  ImplementerCache second(dir.string());
  const auto b = second.get(p, opt);
  CHECK(second.disk_hits() == 1);
  CHECK((a->bogoliubov().real - b->bogoliubov().real).norm() == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("measured alpha of spacelike perturbations is symmetric") {
  LatticeSpec s = spec2(80, 12, 0.5, 0.1, 2.0);
  s.mass = 1.0;
  ImplementerCache cache;
  auto b = [&](double t, double x) { return bump(s, t, x, 2, 1.5, coeffs(0.03, 0.0, 0.03, 0.1)); };
  AlphaOptions opt;
  opt.n_max = 6;
  opt.probes = 1;
  const KineticPerturbation zero(s);
  const auto pq = measure_alpha(b(20, 9), b(20, 3), zero, cache, opt);
  const auto qp = measure_alpha(b(20, 3), b(20, 9), zero, cache, opt);
  CHECK(std::abs(pq.alpha) == doctest::Approx(1.0));
  CHECK(std::abs(pq.angle() - qp.angle()) <= 3 * (pq.truncation_error + qp.truncation_error) + 1e-12);
  CHECK_THROWS_AS(measure_alpha(b(20, 3), b(60, 3), zero, cache, opt), Error);
}

TEST_CASE("dynamical identity") {
  const LatticeSpec s = spec2(40, 16, 0.25, 0.1, 2.0);
  const auto p = bump(s, 20, 8, 6, 4, coeffs(0.2, 0.0, 0.15, 0.5));
  const auto rep = dynamical_check(p, source(s, 10, 8, 3), 1, 20, false);
  CHECK(rep.functional_defect < 1e-8);
}
