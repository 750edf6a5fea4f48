#include <benchmark/benchmark.h>

#include "causalfield/cocycle.hpp"
#include "causalfield/lattice.hpp"
#include "causalfield/scattering.hpp"
#include "causalfield/weyl.hpp"

using namespace causalfield;

namespace {

LatticeSpec square(int n) {
  LatticeSpec s;
  s.d = 2;
  s.nt = n;
  s.ns = {n, 1};
  s.dx = 3.2 / n;
  s.dt = s.dx / 2;
  s.c_max = 1.9;
  s.periodic = true;
  return s;
}

KineticPerturbation centered(const LatticeSpec& s, bool mixed) {
  SymbolCoefficients c;
  c.p00 = 0.2;
  c.p0i = {mixed ? 0.1 : 0.0, 0.0};
  c.pij = {0.2, 0.0, 0.0};
  c.q = 0.5;
  BumpTemplate b;
  b.center = {s.nt / 2.0, s.nx() / 2.0, 0.0};
  b.radius = {s.nt / 4.0, s.nx() / 4.0, 1.0};
  b.sharpness = 1.0;
  KineticPerturbation p(s);
  p.add_bump(c, b);
  return p;
}

LatticeField point_source(const LatticeSpec& s) {
  LatticeField f(s);
  f.at(s.nt / 8, s.nx() / 2) = 1.0;
  return f;
}

void BM_Retarded(benchmark::State& st) {
  const LatticeSpec s = square(static_cast<int>(st.range(0)));
  const GreenSolver g(centered(s, st.range(1) != 0));
  const LatticeField f = point_source(s);
  for (auto _ : st) benchmark::DoNotOptimize(g.retarded(f));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(s.size()));
}
BENCHMARK(BM_Retarded)->ArgsProduct({{64, 128, 256}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_SolverSetup(benchmark::State& st) {
  const LatticeSpec s = square(static_cast<int>(st.range(0)));
  const KineticPerturbation p = centered(s, true);
  for (auto _ : st) benchmark::DoNotOptimize(GreenSolver(p));
}
BENCHMARK(BM_SolverSetup)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_CausalCone(benchmark::State& st) {
  const LatticeSpec s = square(static_cast<int>(st.range(0)));
  const MetricBlocks m = metric_from_perturbation(centered(s, true));
  Region seed(s);
  seed.insert(s.index(2, s.nx() / 2));
  for (auto _ : st) benchmark::DoNotOptimize(causal_cone(seed, m, ConeDirection::Future, ConeMode::Over));
}
BENCHMARK(BM_CausalCone)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ScatteringApply(benchmark::State& st) {
  const LatticeSpec s = square(128);
  const ScatteringMap t(centered(s, false));
  const LatticeField f = point_source(s);
  for (auto _ : st) benchmark::DoNotOptimize(t.apply(f));
}
BENCHMARK(BM_ScatteringApply)->Unit(benchmark::kMillisecond);

void BM_FockQuadratic(benchmark::State& st) {
  const FockSpace fock(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  const int m = fock.modes();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Random(m, m), g = Eigen::MatrixXcd::Random(m, m);
  h = (h + h.adjoint()).eval();
  g = (g + g.transpose()).eval();
  const Eigen::VectorXcd v = Eigen::VectorXcd::Random(static_cast<Eigen::Index>(fock.dim()));
  Eigen::VectorXcd out;
  for (auto _ : st) {
    fock.apply_quadratic(h, g, v, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.counters["dim"] = static_cast<double>(fock.dim());
}
BENCHMARK(BM_FockQuadratic)->Args({8, 4})->Args({16, 4})->Args({16, 6})->Unit(benchmark::kMillisecond);

void BM_ImplementerBuild(benchmark::State& st) {
  LatticeSpec s;
  s.nt = 40;
  s.ns = {static_cast<int>(st.range(0)), 1};
  s.dx = 0.5;
  s.dt = 0.1;
  s.c_max = 2.0;
  SymbolCoefficients c;
  c.p00 = 0.05;
  c.pij = {0.05, 0.0, 0.0};
  c.q = 0.15;
  BumpTemplate b;
  b.center = {20.0, s.nx() / 2.0, 0.0};
  b.radius = {4.0, 2.0, 1.0};
  b.sharpness = 1.0;
  KineticPerturbation p(s);
  p.add_bump(c, b);
  ImplementerOptions opt;
  opt.n_max = 4;
  for (auto _ : st) benchmark::DoNotOptimize(build_implementer(p, opt));
}
BENCHMARK(BM_ImplementerBuild)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_OracleMemo(benchmark::State& st) {
  Universe u;
  auto geo = std::make_shared<const CellGeometry>(u);
  const auto oracle = coboundary_oracle(geo, Coboundary::generic(1), OracleDomain::Ordered);
  const auto triples = random_ordered_triples(*geo, 2, 64);
  for (const auto& t : triples) oracle(t.n, t.p, t.q);
  std::size_t i = 0;
  for (auto _ : st) {
    const auto& t = triples[i++ % triples.size()];
    benchmark::DoNotOptimize(oracle(t.n, t.p, t.q));
  }
}
BENCHMARK(BM_OracleMemo);

void BM_Extension(benchmark::State& st) {
  Universe u;
  auto geo = std::make_shared<const CellGeometry>(u);
  const Coboundary beta = Coboundary::generic(1) * Coboundary::bilinear(u, 2);
  const auto triples = random_disjoint_triples(*geo, 3, 16);
  for (auto _ : st) {
    const auto ext = extend_phase(coboundary_oracle(geo, beta, OracleDomain::Ordered));
    for (const auto& t : triples) benchmark::DoNotOptimize(ext(t.n, t.p, t.q));
  }
}
BENCHMARK(BM_Extension)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
