#pragma once

#include "causalfield/geometry.hpp"
#include "causalfield/grid.hpp"

namespace cftest {

using namespace causalfield;

inline LatticeSpec spec2(int nt, int nx, double dx, double dt, double c_max = 1.9, bool periodic = true) {
  LatticeSpec s;
  s.d = 2;
  s.nt = nt;
  s.ns = {nx, 1};
  s.dx = dx;
  s.dt = dt;
  s.c_max = c_max;
  s.periodic = periodic;
  return s;
}

inline SymbolCoefficients coeffs(double p00, double p0x, double pxx, double q) {
  SymbolCoefficients c;
  c.p00 = p00;
  c.p0i = {p0x, 0.0};
  c.pij = {pxx, 0.0, 0.0};
  c.q = q;
  return c;
}

inline BumpTemplate bump_at(double t, double x, double rt, double rx) {
  BumpTemplate b;
  b.center = {t, x, 0.0};
  b.radius = {rt, rx, 1.0};
  b.sharpness = 1.0;
  return b;
}

inline KineticPerturbation bump(const LatticeSpec& spec, double t, double x, double rt, double rx,
                                const SymbolCoefficients& c) {
  KineticPerturbation p(spec);
  p.add_bump(c, bump_at(t, x, rt, rx));
  return p;
}

inline LatticeField source(const LatticeSpec& spec, double t, double x, double r) {
  LatticeField f(spec);
  const BumpTemplate b = bump_at(t, x, r, r);
  const Box box = b.node_box(spec);
  for (int a = box.lo[0]; a < box.hi[0]; ++a)
    for (int y = box.lo[2]; y < box.hi[2]; ++y)
      for (int c = box.lo[1]; c < box.hi[1]; ++c) {
        const int w = spec.wrap_x(c);
        if (w >= 0) f.at(a, w, y) += b(a, c, y);
      }
  return f;
}

}  // namespace cftest
