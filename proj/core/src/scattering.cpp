#include "causalfield/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "causalfield/error.hpp"

namespace causalfield {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= kFnvPrime;
  }
}

template <class T>
void mix_value(std::uint64_t& h, const T& v) {
  mix(h, &v, sizeof(T));
}

}  // namespace

std::uint64_t content_hash(const KineticPerturbation& p) {
  std::uint64_t h = kFnvOffset;
  const auto& s = p.spec();
  mix_value(h, s.d);
  mix_value(h, s.nt);
  mix_value(h, s.ns);
  mix_value(h, s.dx);
  mix_value(h, s.dt);
  mix_value(h, s.mass);
  mix_value(h, s.c_max);
  mix_value(h, s.periodic);
  for (int mu = 0; mu < s.d; ++mu)
    for (int nu = mu; nu < s.d; ++nu) {
      const auto& c = p.component(mu, nu);
      mix(h, c.data(), c.size() * sizeof(double));
    }
  mix(h, p.potential().data(), p.potential().size() * sizeof(double));
  return h;
}

std::shared_ptr<const GreenSolver> SolverCache::get(const KineticPerturbation& p) {
  const std::uint64_t key = content_hash(p);
  {
    std::lock_guard lock(mu_);
    for (const auto& [k, s] : solvers_)
      if (k == key) return s;
  }
  auto solver = std::make_shared<const GreenSolver>(p);
  std::lock_guard lock(mu_);
  solvers_.emplace_back(key, solver);
  return solver;
}

std::shared_ptr<const GreenSolver> SolverCache::free(const LatticeSpec& spec) {
  return get(KineticPerturbation(spec));
}

std::size_t SolverCache::size() const {
  std::lock_guard lock(mu_);
  return solvers_.size();
}

namespace {

std::shared_ptr<const GreenSolver> make_solver(const KineticPerturbation& p, SolverCache* cache) {
  if (cache) return cache->get(p);
  if (p.is_zero()) return std::make_shared<const GreenSolver>(p.spec());
  return std::make_shared<const GreenSolver>(p);
}

}  // namespace

ScatteringMap::ScatteringMap(const KineticPerturbation& p, SolverCache* cache)
    : p_(p), trivial_(p.is_zero()), p_part_(p, WaveOperator::Part::Perturbation) {
  free_ = make_solver(KineticPerturbation(p.spec()), cache);
  base_ = free_;
  full_ = trivial_ ? free_ : make_solver(p, cache);
}

ScatteringMap::ScatteringMap(const KineticPerturbation& p, const KineticPerturbation& n,
                             SolverCache* cache)
    : ScatteringMap(p, cache) {
  if (n.is_zero()) return;
  n_ = n;
  relative_ = true;
  n_part_ = WaveOperator(n, WaveOperator::Part::Perturbation);
  base_ = make_solver(n, cache);
  full_ = trivial_ ? base_ : make_solver(n + p, cache);
}

LatticeField ScatteringMap::core(const LatticeField& h, bool inverse) const {
  const LatticeField g =
      h + p_part_.apply(inverse ? base_->retarded(h) : base_->advanced(h));
  return g - p_part_.apply(inverse ? full_->advanced(g) : full_->retarded(g));
}

LatticeField ScatteringMap::apply(const LatticeField& f) const {
  if (trivial_) return f;
  if (!relative_) return core(f, false);
  const LatticeField h = f + n_part_.apply(free_->advanced(f));
  const LatticeField k = core(h, false);
  return k - n_part_.apply(base_->advanced(k));
}

LatticeField ScatteringMap::apply_inverse(const LatticeField& f) const {
  if (trivial_) return f;
  if (!relative_) return core(f, true);
  const LatticeField h = f + n_part_.apply(free_->advanced(f));
  const LatticeField k = core(h, true);
  return k - n_part_.apply(base_->advanced(k));
}

LatticeField apply_T(const ScatteringMap& map, const LatticeField& f) { return map.apply(f); }

double symplectic_defect(const ScatteringMap& map, const LatticeField& f, const LatticeField& g,
                         double scale) {
  if (map.trivial()) return 0.0;
  const auto& d = map.free_solver();
  const double before = inner(f, d.apply(GreenKind::Commutator, g));
  const LatticeField tg = map.apply(g);
  const double after = inner(map.apply(f), d.apply(GreenKind::Commutator, tg));
  return std::abs(after - before) / std::max(std::abs(before), scale);
}

double perturbed_pairing_defect(const KineticPerturbation& p, const LatticeField& f,
                                const LatticeField& g) {
  const GreenSolver free(p.spec());
  const GreenSolver pert(p);
  const WaveOperator part(p, WaveOperator::Part::Perturbation);
  const LatticeField u = f - part.apply(pert.advanced(f));
  const LatticeField v = g - part.apply(pert.advanced(g));
  const double lhs = inner(u, free.apply(GreenKind::Commutator, v));
  const double rhs = inner(f, pert.apply(GreenKind::Commutator, g));
  return std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-12);
}

LatticeField causal_cutoff(const KineticPerturbation& q, int inner, int width) {
  const auto& spec = q.spec();
  Region past;
  try {
    past = causal_cone(Region::operator_support_of(q), flat_speed(spec, 1.0), ConeDirection::Past,
                       ConeMode::Over);
  } catch (const Error& e) {
    throw Error(ErrorCode::NoCutoffRoom, e.what());
  }
  LatticeField chi(spec, std::vector<double>(spec.size(), 1.0));
  Region layer = past.dilated(inner);
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (layer.contains(i)) chi[i] = 0.0;
  for (int k = 1; k <= width; ++k) {
    const Region next = layer.dilated(1);
    const double s = static_cast<double>(k) / (width + 1);
    const double v = s * s * (3.0 - 2.0 * s);
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (next.contains(i) && !layer.contains(i)) chi[i] = v;
    layer = next;
  }
  if (!spec.periodic) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (!layer.contains(i)) continue;
      const auto c = spec.coords(i);
      if (c[1] == 0 || c[1] == spec.nx() - 1 || (spec.d == 3 && (c[2] == 0 || c[2] == spec.ny() - 1)))
        throw Error(ErrorCode::NoCutoffRoom, "cutoff band reaches the spatial edge of the window");
    }
  }
  return chi;
}

CausalSplit causal_split(const LatticeField& g, const KineticPerturbation& q, int inner, int width) {
  const auto& spec = q.spec();
  CausalSplit s;
  s.g = g;
  s.chi = causal_cutoff(q, inner, width);
  const GreenSolver solver = q.is_zero() ? GreenSolver(spec) : GreenSolver(q);
  const LatticeField u = solver.retarded(g);
  LatticeField chi_u(spec);
  s.h_q = LatticeField(spec);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    chi_u[i] = s.chi[i] * u[i];
    s.h_q[i] = u[i] - chi_u[i];
  }
  s.g_q = solver.op().apply(chi_u);
  for (double& v : s.g_q.slice(spec.nt - 1)) v = 0.0;
  const LatticeField recon = s.g_q + solver.op().apply(s.h_q);
  s.reconstruction_residual = norm(recon - g) / std::max(norm(g), 1e-300);
  const Region past = causal_cone(Region::operator_support_of(q), flat_speed(spec, 1.0),
                                  ConeDirection::Past, ConeMode::Over);
  s.certified = !Region::support_of(s.g_q).intersects(past);
  return s;
}

std::vector<LatticeField> probe_basis(const LatticeSpec& spec, int count, std::uint64_t seed,
                                      int slab_t, double radius_nodes, int margin) {
  std::mt19937_64 rng(seed);
  const double lo_t = margin + radius_nodes;
  const double hi_t = spec.nt - 1 - margin - radius_nodes;
  auto space_range = [&](int n) {
    return spec.periodic ? std::pair<double, double>{0.0, n - 1.0}
                         : std::pair<double, double>{margin + radius_nodes, n - 1 - margin - radius_nodes};
  };
  const auto [lo_x, hi_x] = space_range(spec.nx());
  const auto [lo_y, hi_y] = space_range(spec.ny());
  std::uniform_real_distribution<double> ut(lo_t, std::max(lo_t, hi_t));
  std::uniform_real_distribution<double> ux(lo_x, std::max(lo_x, hi_x));
  std::uniform_real_distribution<double> uy(lo_y, std::max(lo_y, hi_y));
  std::normal_distribution<double> amp(0.0, 1.0);
  std::vector<LatticeField> out;
  for (int k = 0; k < count; ++k) {
    BumpTemplate b;
    const double tc = (k % 2 == 0) ? std::clamp<double>(slab_t, lo_t, std::max(lo_t, hi_t)) : ut(rng);
    b.center = {tc, ux(rng), spec.d == 3 ? uy(rng) : 0.0};
    b.radius = {radius_nodes, radius_nodes, spec.d == 3 ? radius_nodes : 0.0};
    b.sharpness = 1.0;
    const double a = amp(rng);
    LatticeField f(spec);
    const Box box = b.node_box(spec);
    for (int t = box.lo[0]; t < box.hi[0]; ++t)
      for (int y = 0; y < spec.ny(); ++y)
        for (int x = 0; x < spec.nx(); ++x) {
          double dx = x - b.center[1];
          double dy = y - b.center[2];
          if (spec.periodic) {
            dx -= spec.nx() * std::round(dx / spec.nx());
            if (spec.d == 3) dy -= spec.ny() * std::round(dy / spec.ny());
          }
          f.at(t, x, y) = a * b(t, b.center[1] + dx, b.center[2] + dy);
        }
    out.push_back(std::move(f));
  }
  return out;
}

bool certified_order(const KineticPerturbation& p, const KineticPerturbation& q,
                     const KineticPerturbation* n) {
  const auto& spec = p.spec();
  const ConeSpeeds speeds = (n && !n->is_zero()) ? cone_speeds(*n) : flat_speed(spec, 1.0);
  return succeeds(Region::operator_support_of(p), Region::operator_support_of(q), speeds);
}

FactorizationResult factorization_defect(const KineticPerturbation& p, const KineticPerturbation& q,
                                         const KineticPerturbation* n,
                                         const std::vector<LatticeField>& probes,
                                         bool require_order, SolverCache* cache) {
  const KineticPerturbation zero(p.spec());
  const KineticPerturbation& nn = n ? *n : zero;
  const KineticPerturbation pn = p + nn;
  const KineticPerturbation qn = q + nn;
  const KineticPerturbation pqn = p + q + nn;
  for (const auto* s : {&nn, &pn, &qn, &pqn}) {
    const auto rep = check_admissible(*s);
    if (!rep.pass)
      throw Error(ErrorCode::InadmissibleSum, "partial sum of the triple is not admissible (epsilon " +
                                                  std::to_string(rep.epsilon) + ")");
  }

  if (require_order && !certified_order(p, q, n))
    throw Error(ErrorCode::NotCausallyOrdered, "no certificate for P succeeding Q");
  SolverCache local;
  SolverCache* c = cache ? cache : &local;
  const ScatteringMap t_pn(pn, c);
  const ScatteringMap t_n(nn, c);
  const ScatteringMap t_qn(qn, c);
  const ScatteringMap t_pqn(pqn, c);
  FactorizationResult r;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const LatticeField& f = probes[k];
    const LatticeField lhs = t_pn.apply(t_n.apply_inverse(t_qn.apply(f)));
    const LatticeField rhs = t_pqn.apply(f);
    const double d = norm(lhs - rhs) / std::max(norm(f), 1e-300);
    if (d > r.defect) {
      r.defect = d;
      r.worst_probe = k;
    }
  }
  return r;
}

double locality_leak(const ScatteringMap& map, const LatticeField& f, const Region& envelope) {
  const LatticeField d = map.apply(f) - f;
  double total = 0.0;
  double outside = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double m = d[i] * d[i];
    total += m;
    if (!envelope.contains(i)) outside += m;
  }
  return total > 0.0 ? outside / total : 0.0;
}

double commutation_defect(const ScatteringMap& tp, const ScatteringMap& tq, const LatticeField& f) {
  const LatticeField a = tp.apply(tq.apply(f));
  const LatticeField b = tq.apply(tp.apply(f));
  return norm(a - b) / std::max(norm(f), 1e-300);
}

}  // namespace causalfield
