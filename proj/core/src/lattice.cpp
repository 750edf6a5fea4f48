#include "causalfield/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "causalfield/error.hpp"

namespace causalfield {

namespace {

double axis_spacing(const LatticeSpec& spec, int axis) { return axis == 0 ? spec.dt : spec.dx; }

}  // namespace

WaveOperator::WaveOperator(const LatticeSpec& spec) : spec_(spec) { build(nullptr, Part::Full); }

WaveOperator::WaveOperator(const KineticPerturbation& pert, Part part) : spec_(pert.spec()) {
  build(&pert, part);
}

std::ptrdiff_t WaveOperator::step(std::size_t n, int axis, int delta) const {
  auto c = spec_.coords(n);
  if (axis == 0) {
    c[0] += delta;
    if (c[0] < 0 || c[0] >= spec_.nt) return -1;
  } else if (axis == 1) {
    c[1] = spec_.wrap_x(c[1] + delta);
    if (c[1] < 0) return -1;
  } else {
    if (spec_.d != 3) return -1;
    c[2] = spec_.wrap_y(c[2] + delta);
    if (c[2] < 0) return -1;
  }
  return static_cast<std::ptrdiff_t>(spec_.index(c[0], c[1], c[2]));
}

void WaveOperator::build(const KineticPerturbation* pert, Part part) {
  const std::size_t n = spec_.size();
  const double flat = part == Part::Full ? 1.0 : 0.0;
  const double m2 = part == Part::Full ? spec_.mass * spec_.mass : 0.0;
  a_.assign(n, 0.0);
  bx_.assign(n, 0.0);
  by_.assign(spec_.d == 3 ? n : 0, 0.0);
  mq_.assign(n, -m2);
  auto avg = [&](const std::vector<double>* v, std::size_t i, std::ptrdiff_t j) {
    return v ? 0.5 * ((*v)[i] + (*v)[static_cast<std::size_t>(j)]) : 0.0;
  };
  const std::vector<double>* p00 = pert ? &pert->component(0, 0) : nullptr;
  const std::vector<double>* p11 = pert ? &pert->component(1, 1) : nullptr;
  const std::vector<double>* p22 = (pert && spec_.d == 3) ? &pert->component(2, 2) : nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    if (auto j = step(i, 0, 1); j >= 0) a_[i] = flat + avg(p00, i, j);
    if (auto j = step(i, 1, 1); j >= 0) bx_[i] = flat - avg(p11, i, j);
    if (spec_.d == 3)
      if (auto j = step(i, 2, 1); j >= 0) by_[i] = flat - avg(p22, i, j);
    if (pert) mq_[i] -= pert->q(i);
  }

  families_.clear();
  std::vector<std::pair<int, int>> planes{{0, 1}};
  if (spec_.d == 3) planes = {{0, 1}, {0, 2}, {1, 2}};
  strip_mixed_.assign(static_cast<std::size_t>(spec_.nt), 0);
  mixed_time_ = false;
  for (auto [a, b] : planes) {
    Family fam;
    fam.a = a;
    fam.b = b;
    fam.c.assign(n, 0.0);
    if (pert) {
      const auto& p = pert->component(a, b);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ia = step(i, a, 1);
        const auto ib = step(i, b, 1);
        if (ia < 0 || ib < 0) continue;
        const auto iab = step(static_cast<std::size_t>(ia), b, 1);
        if (iab < 0) continue;
        const double c = 0.25 * (p[i] + p[ia] + p[ib] + p[iab]);
        if (c == 0.0) continue;
        fam.c[i] = c;
        fam.active = true;
        if (a == 0) {
          strip_mixed_[static_cast<std::size_t>(spec_.coords(i)[0])] = 1;
          mixed_time_ = true;
        }
      }
    }
    families_.push_back(std::move(fam));
  }
}

template <class Visit>
void WaveOperator::for_each_element(Visit&& visit) const {
  const std::size_t n = spec_.size();
  const double dt2 = spec_.dt * spec_.dt;
  const double dx2 = spec_.dx * spec_.dx;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t nodes[4];
    double e[16];
    auto link = [&](int axis, double w) {
      const auto j = step(i, axis, 1);
      if (j < 0 || w == 0.0) return;
      nodes[0] = i;
      nodes[1] = static_cast<std::size_t>(j);
      e[0] = e[3] = w;
      e[1] = e[2] = -w;
      visit(nodes, 2, e);
    };
    link(0, a_[i] / dt2);
    link(1, -bx_[i] / dx2);
    if (spec_.d == 3) link(2, -by_[i] / dx2);
    if (mq_[i] != 0.0) {
      nodes[0] = i;
      e[0] = mq_[i];
      visit(nodes, 1, e);
    }
    for (const auto& fam : families_) {
      if (!fam.active || fam.c[i] == 0.0) continue;
      const double ha = axis_spacing(spec_, fam.a);
      const double hb = axis_spacing(spec_, fam.b);
      for (int k = 0; k < 4; ++k) {
        const int oa = k & 1;
        const int ob = k >> 1;
        std::size_t node = i;
        if (oa) node = static_cast<std::size_t>(step(node, fam.a, 1));
        if (ob) node = static_cast<std::size_t>(step(node, fam.b, 1));
        nodes[k] = node;
      }
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          const double dak = ((k & 1) ? 0.5 : -0.5) / ha;
          const double dbk = ((k >> 1) ? 0.5 : -0.5) / hb;
          const double dal = ((l & 1) ? 0.5 : -0.5) / ha;
          const double dbl = ((l >> 1) ? 0.5 : -0.5) / hb;
          e[4 * k + l] = fam.c[i] * (dak * dbl + dbk * dal);
        }
      visit(nodes, 4, e);
    }
  }
}

void WaveOperator::apply_row(const LatticeField& v, int t, std::span<double> out) const {
  const std::size_t ns = spec_.slice_size();
  const double dt2 = spec_.dt * spec_.dt;
  const double dx2 = spec_.dx * spec_.dx;
  const auto& x = v.data();
  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t n = static_cast<std::size_t>(t) * ns + s;
    double r = mq_[n] * x[n];
    if (t + 1 < spec_.nt) r += a_[n] / dt2 * (x[n] - x[n + ns]);
    if (t >= 1) r += a_[n - ns] / dt2 * (x[n] - x[n - ns]);
    if (auto j = step(n, 1, 1); j >= 0) r -= bx_[n] / dx2 * (x[n] - x[j]);
    if (auto j = step(n, 1, -1); j >= 0) r -= bx_[j] / dx2 * (x[n] - x[j]);
    if (spec_.d == 3) {
      if (auto j = step(n, 2, 1); j >= 0) r -= by_[n] / dx2 * (x[n] - x[j]);
      if (auto j = step(n, 2, -1); j >= 0) r -= by_[j] / dx2 * (x[n] - x[j]);
    }
    for (const auto& fam : families_) {
      if (!fam.active) continue;
      const double ha = axis_spacing(spec_, fam.a);
      const double hb = axis_spacing(spec_, fam.b);
      for (int k = 0; k < 4; ++k) {
        const int oa = k & 1;
        const int ob = k >> 1;
        std::ptrdiff_t ll = static_cast<std::ptrdiff_t>(n);
        if (oa) ll = step(static_cast<std::size_t>(ll), fam.a, -1);
        if (ll < 0) continue;
        if (ob) ll = step(static_cast<std::size_t>(ll), fam.b, -1);
        if (ll < 0) continue;
        const double c = fam.c[static_cast<std::size_t>(ll)];
        if (c == 0.0) continue;
        const double dak = (oa ? 0.5 : -0.5) / ha;
        const double dbk = (ob ? 0.5 : -0.5) / hb;
        for (int l = 0; l < 4; ++l) {
          std::size_t m = static_cast<std::size_t>(ll);
          if (l & 1) m = static_cast<std::size_t>(step(m, fam.a, 1));
          if (l >> 1) m = static_cast<std::size_t>(step(m, fam.b, 1));
          const double dal = ((l & 1) ? 0.5 : -0.5) / ha;
          const double dbl = ((l >> 1) ? 0.5 : -0.5) / hb;
          r += c * (dak * dbl + dbk * dal) * x[m];
        }
      }
    }
    out[s] = r;
  }
}

LatticeField WaveOperator::apply(const LatticeField& v) const {
  LatticeField out(spec_);
  for (int t = 0; t < spec_.nt; ++t) apply_row(v, t, out.slice(t));
  return out;
}

double WaveOperator::action(const LatticeField& v) const {
  double s = 0.0;
  const auto& x = v.data();
  for_each_element([&](const std::size_t* nodes, int k, const double* e) {
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) s += x[nodes[i]] * e[k * i + j] * x[nodes[j]];
  });
  return 0.5 * s * spec_.cell_volume();
}

double WaveOperator::action_difference(const LatticeField& phi, const LatticeField& phi0) const {
  double s = 0.0;
  const auto& u = phi.data();
  const auto& z = phi0.data();
  for_each_element([&](const std::size_t* nodes, int k, const double* e) {
    bool touched = false;
    for (int i = 0; i < k; ++i) touched = touched || z[nodes[i]] != 0.0;
    if (!touched) return;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const double wi = u[nodes[i]] + z[nodes[i]];
        const double wj = u[nodes[j]] + z[nodes[j]];
        s += e[k * i + j] * (wi * wj - u[nodes[i]] * u[nodes[j]]);
      }
  });
  return 0.5 * s * spec_.cell_volume();
}

bool WaveOperator::block_is_diagonal(int t) const { return !strip_mixed_[static_cast<std::size_t>(t)]; }

std::vector<double> WaveOperator::forward_diagonal(int t) const {
  const std::size_t ns = spec_.slice_size();
  std::vector<double> d(ns);
  const double dt2 = spec_.dt * spec_.dt;
  for (std::size_t s = 0; s < ns; ++s) d[s] = -a_[static_cast<std::size_t>(t) * ns + s] / dt2;
  return d;
}

std::vector<Eigen::Triplet<double>> WaveOperator::forward_block(int t) const {
  const std::size_t ns = spec_.slice_size();
  std::vector<Eigen::Triplet<double>> trip;
  const auto diag = forward_diagonal(t);
  for (std::size_t s = 0; s < ns; ++s)
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), diag[s]);
  for (const auto& fam : families_) {
    if (!fam.active || fam.a != 0) continue;
    const double ha = axis_spacing(spec_, fam.a);
    const double hb = axis_spacing(spec_, fam.b);
    for (std::size_t s = 0; s < ns; ++s) {
      const std::size_t ll = static_cast<std::size_t>(t) * ns + s;
      const double c = fam.c[ll];
      if (c == 0.0) continue;
      std::size_t corner[4];
      for (int k = 0; k < 4; ++k) {
        std::size_t m = ll;
        if (k & 1) m = static_cast<std::size_t>(step(m, fam.a, 1));
        if (k >> 1) m = static_cast<std::size_t>(step(m, fam.b, 1));
        corner[k] = m % ns;
      }
      for (int k : {0, 2})
        for (int l : {1, 3}) {
          const double dak = -0.5 / ha;
          const double dbk = ((k >> 1) ? 0.5 : -0.5) / hb;
          const double dal = 0.5 / ha;
          const double dbl = ((l >> 1) ? 0.5 : -0.5) / hb;
          trip.emplace_back(static_cast<int>(corner[k]), static_cast<int>(corner[l]),
                            c * (dak * dbl + dbk * dal));
        }
    }
  }
  return trip;
}

Eigen::MatrixXd WaveOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(spec_.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for_each_element([&](const std::size_t* nodes, int m, const double* e) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        k(static_cast<Eigen::Index>(nodes[i]), static_cast<Eigen::Index>(nodes[j])) += e[m * i + j];
  });
  return k;
}

const char* to_string(GreenKind k) {
  switch (k) {
    case GreenKind::Retarded: return "retarded";
    case GreenKind::Advanced: return "advanced";
    case GreenKind::Commutator: return "commutator";
    case GreenKind::Dirac: return "dirac";
  }
  return "retarded";
}

struct GreenSolver::Strip {
  std::vector<double> diag;
  bool implicit = false;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> fwd;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> bwd;
};

GreenSolver::GreenSolver(const LatticeSpec& spec) : op_(spec) { init(); }

GreenSolver::GreenSolver(const KineticPerturbation& pert) : op_(pert) {
  if (!pert.is_zero()) {
    const auto speeds = light_speed_bound(metric_from_perturbation(pert));
    double cmax = 0.0;
    for (double v : speeds.data()) cmax = std::max(cmax, v);
    if (cmax > pert.spec().c_max * (1.0 + 1e-9))
      throw Error(ErrorCode::CFLViolation, "perturbed light speed " + std::to_string(cmax) +
                                               " exceeds c_max " + std::to_string(pert.spec().c_max));
  }
  init();
}

void GreenSolver::init() {
  const auto& spec = op_.spec();
  spec.validate();
  const int ns = static_cast<int>(spec.slice_size());
  strips_.resize(static_cast<std::size_t>(spec.nt - 1));
  for (int t = 0; t + 1 < spec.nt; ++t) {
    auto s = std::make_shared<Strip>();
    s->diag = op_.forward_diagonal(t);
    if (!op_.block_is_diagonal(t)) {
      s->implicit = true;
      const auto trip = op_.forward_block(t);
      Eigen::SparseMatrix<double> m(ns, ns);
      m.setFromTriplets(trip.begin(), trip.end());
      m.makeCompressed();
      s->fwd.compute(m);
      Eigen::SparseMatrix<double> mt = m.transpose();
      mt.makeCompressed();
      s->bwd.compute(mt);
      if (s->fwd.info() != Eigen::Success || s->bwd.info() != Eigen::Success)
        throw Error(ErrorCode::SingularPrincipalSymbol, "implicit strip is singular");
    }
    strips_[static_cast<std::size_t>(t)] = std::move(s);
  }
}

void GreenSolver::check_source(const LatticeField& f) const {
  const auto& spec = op_.spec();
  for (int t : {0, spec.nt - 1})
    for (double v : f.slice(t))
      if (v != 0.0) throw Error(ErrorCode::MarginViolation, "source touches a time edge of the window");
  if (!spec.periodic) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] == 0.0) continue;
      const auto c = spec.coords(i);
      if (c[1] == 0 || c[1] == spec.nx() - 1 || (spec.d == 3 && (c[2] == 0 || c[2] == spec.ny() - 1)))
        throw Error(ErrorCode::MarginViolation, "source touches a spatial edge of the window");
    }
  }
}

void GreenSolver::check_window(const LatticeField& u) const {
  const auto& spec = op_.spec();
  if (spec.periodic) return;
  double umax = 0.0;
  double edge = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    umax = std::max(umax, a);
    const auto c = spec.coords(i);
    if (c[1] == 0 || c[1] == spec.nx() - 1 || (spec.d == 3 && (c[2] == 0 || c[2] == spec.ny() - 1)))
      edge = std::max(edge, a);
  }
  if (edge > 1e-13 * umax) throw Error(ErrorCode::WindowOverflow, "solution reaches the spatial edge");
}

LatticeField GreenSolver::retarded(const LatticeField& f) const {
  check_source(f);
  const auto& spec = op_.spec();
  const std::size_t ns = spec.slice_size();
  LatticeField u(spec);
  int t0 = -1;
  for (int t = 0; t < spec.nt && t0 < 0; ++t)
    for (double v : f.slice(t))
      if (v != 0.0) {
        t0 = t;
        break;
      }
  if (t0 < 0) return u;
  std::vector<double> r(ns);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(ns));
  for (int t = t0; t + 1 < spec.nt; ++t) {
    op_.apply_row(u, t, r);
    const auto ft = f.slice(t);
    auto next = u.slice(t + 1);
    const Strip& s = *strips_[static_cast<std::size_t>(t)];
    if (!s.implicit) {
      for (std::size_t i = 0; i < ns; ++i) next[i] = (ft[i] - r[i]) / s.diag[i];
    } else {
      for (std::size_t i = 0; i < ns; ++i) rhs[static_cast<Eigen::Index>(i)] = ft[i] - r[i];
      const Eigen::VectorXd x = s.fwd.solve(rhs);
      for (std::size_t i = 0; i < ns; ++i) next[i] = x[static_cast<Eigen::Index>(i)];
    }
  }
  check_window(u);
  return u;
}

LatticeField GreenSolver::advanced(const LatticeField& f) const {
  check_source(f);
  const auto& spec = op_.spec();
  const std::size_t ns = spec.slice_size();
  LatticeField u(spec);
  int t1 = -1;
  for (int t = spec.nt - 1; t >= 0 && t1 < 0; --t)
    for (double v : f.slice(t))
      if (v != 0.0) {
        t1 = t;
        break;
      }
  if (t1 < 0) return u;
  std::vector<double> r(ns);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(ns));
  for (int t = t1; t >= 1; --t) {
    op_.apply_row(u, t, r);
    const auto ft = f.slice(t);
    auto prev = u.slice(t - 1);
    const Strip& s = *strips_[static_cast<std::size_t>(t - 1)];
    if (!s.implicit) {
      for (std::size_t i = 0; i < ns; ++i) prev[i] = (ft[i] - r[i]) / s.diag[i];
    } else {
      for (std::size_t i = 0; i < ns; ++i) rhs[static_cast<Eigen::Index>(i)] = ft[i] - r[i];
      const Eigen::VectorXd x = s.bwd.solve(rhs);
      for (std::size_t i = 0; i < ns; ++i) prev[i] = x[static_cast<Eigen::Index>(i)];
    }
  }
  check_window(u);
  return u;
}

LatticeField GreenSolver::apply(GreenKind kind, const LatticeField& f) const {
  switch (kind) {
    case GreenKind::Retarded: return retarded(f);
    case GreenKind::Advanced: return advanced(f);
    case GreenKind::Commutator: return retarded(f) - advanced(f);
    case GreenKind::Dirac: return 0.5 * (retarded(f) + advanced(f));
  }
  return retarded(f);
}

double GreenSolver::residual(GreenKind kind, const LatticeField& u, const LatticeField& f) const {
  const auto& spec = op_.spec();
  LatticeField r = op_.apply(u);
  if (kind != GreenKind::Commutator) r -= f;
  const bool skip_first = kind != GreenKind::Retarded;
  const bool skip_last = kind != GreenKind::Advanced;
  if (skip_first)
    for (double& v : r.slice(0)) v = 0.0;
  if (skip_last)
    for (double& v : r.slice(spec.nt - 1)) v = 0.0;
  return norm(r) / std::max(norm(f), 1e-300);
}

LatticeField apply_wave_operator(const WaveOperator& op, const LatticeField& f) {
  const auto& spec = op.spec();
  for (int t : {0, spec.nt - 1})
    for (double v : f.slice(t))
      if (v != 0.0) throw Error(ErrorCode::MarginViolation, "field touches a time edge of the window");
  return op.apply(f);
}

LatticeField green_apply(const GreenOperator& g, const LatticeField& f) { return g(f); }

DenseGreenOracle::DenseGreenOracle(const WaveOperator& op) : spec_(op.spec()), k_(op.dense()) {
  const auto n = static_cast<Eigen::Index>(spec_.size());
  const auto ns = static_cast<Eigen::Index>(spec_.slice_size());
  ret_.compute(k_.block(0, ns, n - ns, n - ns));
  adv_.compute(k_.block(ns, 0, n - ns, n - ns));
}

LatticeField DenseGreenOracle::apply(GreenKind kind, const LatticeField& f) const {
  const auto n = static_cast<Eigen::Index>(spec_.size());
  const auto ns = static_cast<Eigen::Index>(spec_.slice_size());
  Eigen::Map<const Eigen::VectorXd> fv(f.data().data(), n);
  auto solve = [&](bool retarded) {
    LatticeField u(spec_);
    Eigen::Map<Eigen::VectorXd> uv(u.data().data(), n);
    if (retarded)
      uv.tail(n - ns) = ret_.solve(fv.head(n - ns));
    else
      uv.head(n - ns) = adv_.solve(fv.tail(n - ns));
    return u;
  };
  switch (kind) {
    case GreenKind::Retarded: return solve(true);
    case GreenKind::Advanced: return solve(false);
    case GreenKind::Commutator: return solve(true) - solve(false);
    case GreenKind::Dirac: return 0.5 * (solve(true) + solve(false));
  }
  return solve(true);
}

double resolvent_defect(const GreenSolver& perturbed, const GreenSolver& free,
                        const WaveOperator& p_part, GreenKind kind, const LatticeField& f) {
  const LatticeField dp = perturbed.apply(kind, f);
  const LatticeField d0 = free.apply(kind, f);
  const LatticeField diff = dp - d0;
  const double scale = std::max(norm(d0), 1e-300);
  const LatticeField e1 = diff + perturbed.apply(kind, p_part.apply(d0));
  const LatticeField e2 = diff + free.apply(kind, p_part.apply(dp));
  return std::max(norm(e1), norm(e2)) / scale;
}

double resolvent_defect(const KineticPerturbation& p, GreenKind kind, const LatticeField& f) {
  if (p.is_zero()) return 0.0;
  const GreenSolver perturbed(p);
  const GreenSolver free(p.spec());
  const WaveOperator part(p, WaveOperator::Part::Perturbation);
  return resolvent_defect(perturbed, free, part, kind, f);
}

double evaluate(const GeneralFunctional& F, const LatticeField& phi) {
  double v = F.c;
  if (F.f.size() != 0) v += inner(F.f, phi);
  if (F.quad.components() != 0 && !F.quad.is_zero()) {
    const WaveOperator p(F.quad, WaveOperator::Part::Perturbation);
    v += 0.5 * inner(phi, p.apply(phi));
  }
  return v;
}

GeneralFunctional operator+(const GeneralFunctional& a, const GeneralFunctional& b) {
  GeneralFunctional r = a;
  r.c += b.c;
  if (b.f.size() != 0) r.f += b.f;
  if (b.quad.components() != 0) r.quad += b.quad;
  return r;
}

GeneralFunctional free_action_variation(const LatticeField& phi0) {
  const WaveOperator k(phi0.spec());
  GeneralFunctional F;
  F.f = k.apply(phi0);
  F.c = 0.5 * inner(phi0, F.f);
  return F;
}

double action_variation(const WaveOperator& op, const LatticeField& phi, const LatticeField& phi0) {
  return op.action_difference(phi, phi0);
}

GeneralFunctional functional_shift(const GeneralFunctional& F, const LatticeField& phi0) {
  GeneralFunctional r = F;
  if (F.f.size() != 0) r.c += inner(F.f, phi0);
  if (F.quad.components() != 0 && !F.quad.is_zero()) {
    const WaveOperator p(F.quad, WaveOperator::Part::Perturbation);
    const LatticeField pz = p.apply(phi0);
    r.c += 0.5 * inner(phi0, pz);
    if (r.f.size() == 0)
      r.f = pz;
    else
      r.f += pz;
  }
  return r;
}

GeneralFunctional weyl_functional(const GreenSolver& g, const LatticeField& f) {
  GeneralFunctional F;
  F.f = f;
  F.c = 0.5 * inner(f, g.apply(GreenKind::Dirac, f));
  return F;
}

SolverConfig load_solver_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  SolverConfig c;
  c.dx = j.value("dx", c.dx);
  c.dt = j.value("dt", c.dt);
  c.tol = j.value("tol", c.tol);
  if (j.contains("window")) {
    const auto& w = j.at("window");
    for (std::size_t i = 0; i < w.size() && i < 3; ++i) c.window[i] = w.at(i).get<int>();
  }
  c.refinement_levels = j.value("refinement_levels", c.refinement_levels);
  return c;
}

void save_solver_config(const SolverConfig& c, const std::string& path) {
  nlohmann::json j{{"dx", c.dx},
                   {"dt", c.dt},
                   {"tol", c.tol},
                   {"window", c.window},
                   {"refinement_levels", c.refinement_levels}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace causalfield
