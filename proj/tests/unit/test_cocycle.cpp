#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <thread>

#include "causalfield/cocycle.hpp"
#include "causalfield/error.hpp"

using namespace causalfield;

namespace {

std::shared_ptr<const CellGeometry> geometry(int nt = 8, int nx = 8, double c = 1.0) {
  Universe u;
  u.nt = nt;
  u.nx = nx;
  u.c = c;
  return std::make_shared<const CellGeometry>(u);
}

Region box(const Universe& u, int t0, int t1, int x0, int x1) {
  Region r(u.cell_spec());
  for (int t = t0; t <= t1; ++t)
    for (int x = x0; x <= x1; ++x) r.insert(u.node(u.cell(t, x)));
  return r;
}

}  // namespace

TEST_CASE("phase arithmetic is exact") {
  const Phase q = Phase::from_radians(std::numbers::pi / 2);
  CHECK((q * q * q * q).is_one());
  CHECK((q * q.inverse()).is_one());
  CHECK(q.radians() == doctest::Approx(std::numbers::pi / 2));
  CHECK(angular_distance(Phase::from_radians(3.0), Phase::from_radians(-3.0)) ==
        doctest::Approx(2 * std::numbers::pi - 6.0));
}

TEST_CASE("site functional splits are exact") {
  Universe u;
  std::mt19937_64 rng(1);
  const auto geo = geometry();
  const auto f = random_functional(u, box(u, 0, 3, 0, 3), rng, 1000);
  std::vector<double> chi(u.cells(), 0.3);
  const auto [a, b] = f.split(u, chi);
  CHECK(a + b == f);
  CHECK(f.admissible(u));
  CHECK(f.support(u).subset_of(box(u, 0, 3, 0, 3)));
}

TEST_CASE("coboundaries of every kind satisfy the identities exactly") {
  const auto geo = geometry();
  const Universe& u = geo->universe();
  for (const auto& beta : {Coboundary::trivial(), Coboundary::additive(u, 1), Coboundary::bilinear(u, 2),
                           Coboundary::generic(3)}) {
    const auto ord = coboundary_oracle(geo, beta, OracleDomain::Ordered);
    const auto triples = random_ordered_triples(*geo, 4, 15);
    CHECK(check_splitting(ord, triples, 5).max_defect == 0.0);
    CHECK(check_chain(ord, 6, 15).max_defect == 0.0);
  }
  const auto add = coboundary_oracle(geo, Coboundary::additive(u, 1), OracleDomain::Disjoint);
  for (const auto& t : random_disjoint_triples(*geo, 7, 15)) CHECK(add(t.n, t.p, t.q).is_one());
}

TEST_CASE("bilinear coboundary has the closed-form delta") {
  const auto geo = geometry();
  const Universe& u = geo->universe();
  const Coboundary b = Coboundary::bilinear(u, 9);
  for (const auto& t : random_disjoint_triples(*geo, 8, 15))
    CHECK(delta_beta(b, u, t.n, t.p, t.q) == bilinear_delta(u, 9, t.p, t.q));
}

TEST_CASE("corrupted values are flagged") {
  const auto geo = geometry();
  const auto ord = coboundary_oracle(geo, Coboundary::generic(1), OracleDomain::Ordered);
  const auto triples = random_ordered_triples(*geo, 2, 5);
  const auto bad = corrupted(ord, triples.front(), 0.1);
  const auto rep = check_splitting(bad, {triples.front()}, 3);
  CHECK(rep.flagged);
  CHECK(rep.max_defect == doctest::Approx(0.1));
}

TEST_CASE("restricted oracles refuse unordered triples") {
  const auto geo = geometry();
  const auto ord = coboundary_oracle(geo, Coboundary::generic(1), OracleDomain::Ordered);
  const auto t = random_ordered_triples(*geo, 2, 1).front();
  CHECK_FALSE(ord.in_domain(t.n, t.q, t.p));
  CHECK_THROWS_AS(ord(t.n, t.q, t.p), Error);
  const SiteFunctional zero(geo->universe());
  CHECK(ord(t.n, zero, t.q).is_one());
}

TEST_CASE("extension of a coboundary is the coboundary") {
  const auto geo = geometry();
  const Universe& u = geo->universe();
  const Coboundary star = Coboundary::generic(4) * Coboundary::bilinear(u, 5);
  const auto ext = extend_phase(coboundary_oracle(geo, star, OracleDomain::Ordered));
  const auto full = coboundary_oracle(geo, star, OracleDomain::Disjoint);
  const auto triples = random_disjoint_triples(*geo, 6, 15);
  for (const auto& t : triples) CHECK(ext(t.n, t.p, t.q) == full(t.n, t.p, t.q));
  CHECK(check_symmetry(ext, triples).max_defect == 0.0);
  CHECK(check_split_exchange(ext, triples, 7).max_defect == 0.0);
}

TEST_CASE("extension of a corrupted oracle is not extendable") {
  const auto geo = geometry();
  const auto ord = coboundary_oracle(geo, Coboundary::generic(1), OracleDomain::Ordered);
  const auto triples = random_ordered_triples(*geo, 2, 20);
  const auto ext = extend_phase(corrupted(ord, triples.front(), 0.1));
  bool raised = false;
  try {
    for (const auto& t : triples)
      if (geo->separable(t.p, t.q)) ext(t.n, t.p, t.q);
  } catch (const Error& e) {
    raised = e.code() == ErrorCode::NotExtendable;
  }
  CHECK(raised);
}

TEST_CASE("trivialization recovers the coboundary up to a local functional") {
  const auto geo = geometry();
  const Universe& u = geo->universe();
  const Coboundary star = Coboundary::generic(4) * Coboundary::bilinear(u, 5);
  const auto ext = extend_phase(coboundary_oracle(geo, star, OracleDomain::Ordered));
  const std::vector<RegionPair> pairs{{box(u, 5, 6, 0, 1), box(u, 1, 2, 4, 5)},
                                      {box(u, 3, 3, 0, 2), box(u, 3, 3, 5, 7)}};
  TrivializeOptions opt;
  opt.sweeps = 2;
  const auto triv = trivialize(ext, pairs, opt);
  for (const auto& r : triv.residuals) CHECK(r.max_angle == 0.0);
  CHECK(gamma_check(triv.beta, star, *geo, pairs, 3, 50).max_defect == 0.0);
}

TEST_CASE("oracle memo is safe under concurrent evaluation") {
  const auto geo = geometry();
  const auto ord = coboundary_oracle(geo, Coboundary::generic(2), OracleDomain::Ordered);
  const auto triples = random_ordered_triples(*geo, 3, 20);
  std::vector<std::vector<std::uint64_t>> seen(4);
  std::vector<std::thread> pool;
  for (int k = 0; k < 4; ++k)
    pool.emplace_back([&, k] {
      for (const auto& t : triples) seen[k].push_back(ord(t.n, t.p, t.q).turns);
    });
  for (auto& t : pool) t.join();
  for (int k = 1; k < 4; ++k) CHECK(seen[k] == seen[0]);
}

TEST_CASE("cell cones follow the universe speed") {
  const auto slow = geometry(8, 8, 1.0), fast = geometry(8, 8, 2.0);
  auto reached = [](const CellGeometry& g, int t, int x) {
    const Universe& u = g.universe();
    return g.future(box(u, 1, 1, 2, 2)).contains(u.node(u.cell(t, x)));
  };
  CHECK(reached(*slow, 3, 4));
  CHECK_FALSE(reached(*slow, 2, 5));
  CHECK(reached(*fast, 2, 4));
  CHECK_FALSE(reached(*slow, 0, 2));
  for (int t = 0; t < 8; ++t)
    for (int x = 0; x < 8; ++x)
      if (reached(*slow, t, x)) CHECK(reached(*fast, t, x));
}
