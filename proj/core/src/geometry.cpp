#include "causalfield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "causalfield/error.hpp"

namespace causalfield {

SymbolCoefficients SymbolCoefficients::operator*(double s) const {
  SymbolCoefficients r = *this;
  r.p00 *= s;
  for (double& v : r.p0i) v *= s;
  for (double& v : r.pij) v *= s;
  r.q *= s;
  return r;
}

SymbolCoefficients SymbolCoefficients::operator+(const SymbolCoefficients& o) const {
  SymbolCoefficients r = *this;
  r.p00 += o.p00;
  for (int i = 0; i < 2; ++i) r.p0i[i] += o.p0i[i];
  for (int i = 0; i < 3; ++i) r.pij[i] += o.pij[i];
  r.q += o.q;
  return r;
}

namespace {

double mollifier(double r, double sharpness) {
  if (r >= 1.0) return 0.0;
  const double r2 = r * r;
  return std::exp(-sharpness * r2 / (1.0 - r2));
}

}  // namespace

double BumpTemplate::operator()(double t, double x, double y) const {
  const std::array<double, 3> p{t, x, y};
  double v = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (radius[k] <= 0.0) continue;
    v *= mollifier(std::abs(p[k] - center[k]) / radius[k], sharpness);
    if (v == 0.0) return 0.0;
  }
  return v;
}

Box BumpTemplate::node_box(const LatticeSpec& spec) const {
  const std::array<int, 3> ext{spec.nt, spec.nx(), spec.ny()};
  Box b;
  for (int k = 0; k < 3; ++k) {
    if (k == 2 && spec.d == 2) {
      b.lo[k] = 0;
      b.hi[k] = 1;
      continue;
    }
    b.lo[k] = std::max(0, static_cast<int>(std::floor(center[k] - radius[k])) + 1);
    b.hi[k] = std::min(ext[k], static_cast<int>(std::ceil(center[k] + radius[k])));
  }
  return b;
}

KineticPerturbation::KineticPerturbation(const LatticeSpec& spec)
    : spec_(spec),
      p_(static_cast<std::size_t>(spec.d * (spec.d + 1) / 2), std::vector<double>(spec.size(), 0.0)),
      q_(spec.size(), 0.0) {}

int KineticPerturbation::slot(int d, int mu, int nu) {
  if (mu > nu) std::swap(mu, nu);
  return mu * d - mu * (mu - 1) / 2 + (nu - mu);
}

SymbolCoefficients KineticPerturbation::at(std::size_t node) const {
  SymbolCoefficients c;
  const int d = spec_.d;
  c.p00 = p(0, 0, node);
  for (int i = 1; i < d; ++i) c.p0i[i - 1] = p(0, i, node);
  c.pij[0] = p(1, 1, node);
  if (d == 3) {
    c.pij[1] = p(1, 2, node);
    c.pij[2] = p(2, 2, node);
  }
  c.q = q_[node];
  return c;
}

void KineticPerturbation::set(std::size_t node, const SymbolCoefficients& c) {
  const int d = spec_.d;
  component(0, 0)[node] = c.p00;
  for (int i = 1; i < d; ++i) component(0, i)[node] = c.p0i[i - 1];
  component(1, 1)[node] = c.pij[0];
  if (d == 3) {
    component(1, 2)[node] = c.pij[1];
    component(2, 2)[node] = c.pij[2];
  }
  q_[node] = c.q;
}

KineticPerturbation& KineticPerturbation::add_bump(const SymbolCoefficients& coeffs,
                                                   const BumpTemplate& bump) {
  const Box b = bump.node_box(spec_);
  for (int t = b.lo[0]; t < b.hi[0]; ++t)
    for (int y = b.lo[2]; y < b.hi[2]; ++y)
      for (int x = b.lo[1]; x < b.hi[1]; ++x) {
        const double w = bump(t, x, y);
        if (w == 0.0) continue;
        const std::size_t n = spec_.index(t, x, y);
        set(n, at(n) + coeffs * w);
      }
  return *this;
}

bool KineticPerturbation::is_zero() const {
  for (const auto& comp : p_)
    for (double v : comp)
      if (v != 0.0) return false;
  return std::all_of(q_.begin(), q_.end(), [](double v) { return v == 0.0; });
}

bool KineticPerturbation::has_mixed_terms() const {
  for (int i = 1; i < spec_.d; ++i)
    for (double v : component(0, i))
      if (v != 0.0) return true;
  return false;
}

std::vector<std::uint8_t> KineticPerturbation::support_mask() const {
  std::vector<std::uint8_t> m(spec_.size(), 0);
  for (const auto& comp : p_)
    for (std::size_t i = 0; i < comp.size(); ++i)
      if (comp[i] != 0.0) m[i] = 1;
  for (std::size_t i = 0; i < q_.size(); ++i)
    if (q_[i] != 0.0) m[i] = 1;
  return m;
}

Box KineticPerturbation::support() const {
  return Region(spec_, support_mask()).bounding_box();
}

double KineticPerturbation::max_gradient_step() const {
  double g = 0.0;
  auto scan = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto c = spec_.coords(i);
      if (c[0] + 1 < spec_.nt) g = std::max(g, std::abs(v[spec_.index(c[0] + 1, c[1], c[2])] - v[i]));
      const int xn = spec_.wrap_x(c[1] + 1);
      if (xn >= 0) g = std::max(g, std::abs(v[spec_.index(c[0], xn, c[2])] - v[i]));
      if (spec_.d == 3) {
        const int yn = spec_.wrap_y(c[2] + 1);
        if (yn >= 0) g = std::max(g, std::abs(v[spec_.index(c[0], c[1], yn)] - v[i]));
      }
    }
  };
  for (const auto& comp : p_) scan(comp);
  return g;
}

KineticPerturbation& KineticPerturbation::operator+=(const KineticPerturbation& o) {
  if (p_.empty()) return *this = o;
  if (o.p_.empty()) return *this;
  for (std::size_t k = 0; k < p_.size(); ++k)
    for (std::size_t i = 0; i < p_[k].size(); ++i) p_[k][i] += o.p_[k][i];
  for (std::size_t i = 0; i < q_.size(); ++i) q_[i] += o.q_[i];
  return *this;
}

KineticPerturbation& KineticPerturbation::operator*=(double s) {
  for (auto& comp : p_)
    for (double& v : comp) v *= s;
  for (double& v : q_) v *= s;
  return *this;
}

KineticPerturbation KineticPerturbation::weighted(const std::vector<double>& chi) const {
  KineticPerturbation r = *this;
  for (auto& comp : r.p_)
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] *= chi[i];
  for (std::size_t i = 0; i < r.q_.size(); ++i) r.q_[i] *= chi[i];
  return r;
}

PointMetric PointMetric::from_metric(const SmallMatrix& g) {
  const int n = static_cast<int>(g.rows()) - 1;
  PointMetric m;
  m.g00 = g(0, 0);
  m.gvec = g.block(1, 0, n, 1);
  m.G = -g.block(1, 1, n, n);
  Eigen::LLT<SmallMatrix> llt(m.G);
  if (llt.info() != Eigen::Success || !(m.g00 > 0.0))
    throw Error(ErrorCode::SingularPrincipalSymbol, "metric blocks violate g00 > 0 or G > 0");
  const SmallMatrix Ginv = llt.solve(SmallMatrix::Identity(n, n));
  const SmallVector Gg = Ginv * m.gvec;
  m.g00inv = 1.0 / (m.g00 + m.gvec.dot(Gg));
  m.h = m.g00inv * Gg;
  m.H = Ginv - m.g00inv * Gg * Gg.transpose();
  return m;
}

SmallMatrix PointMetric::metric() const {
  const int n = static_cast<int>(G.rows());
  SmallMatrix g(n + 1, n + 1);
  g(0, 0) = g00;
  g.block(1, 0, n, 1) = gvec;
  g.block(0, 1, 1, n) = gvec.transpose();
  g.block(1, 1, n, n) = -G;
  return g;
}

SmallMatrix PointMetric::inverse() const {
  const int n = static_cast<int>(H.rows());
  SmallMatrix g(n + 1, n + 1);
  g(0, 0) = g00inv;
  g.block(1, 0, n, 1) = h;
  g.block(0, 1, 1, n) = h.transpose();
  g.block(1, 1, n, n) = -H;
  return g;
}

AdmissibilityClass AdmissibilityClass::from_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw Error(ErrorCode::ConfigError, "epsilon must lie in (0,1]");
  return {epsilon, light_speed(epsilon)};
}

double AdmissibilityClass::light_speed(double epsilon) {
  return (std::numbers::sqrt2 + 1.0) / (epsilon * epsilon);
}

bool AdmissibilityClass::contains(const SymbolCoefficients& c, int d) const {
  return pointwise_epsilon(c, d) >= epsilon;
}

SmallMatrix principal_symbol(const SymbolCoefficients& c, int d) {
  SmallMatrix s = SmallMatrix::Zero(d, d);
  s(0, 0) = 1.0 + c.p00;
  for (int i = 1; i < d; ++i) s(0, i) = s(i, 0) = c.p0i[i - 1];
  s(1, 1) = -1.0 + c.pij[0];
  if (d == 3) {
    s(1, 2) = s(2, 1) = c.pij[1];
    s(2, 2) = -1.0 + c.pij[2];
  }
  return s;
}

double pointwise_epsilon(const SymbolCoefficients& c, int d) {
  const double a = 1.0 + c.p00;
  const int n = d - 1;
  SmallMatrix Q = -principal_symbol(c, d).block(1, 1, n, n);
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(Q, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  const double lmax = es.eigenvalues()(n - 1);
  if (!(a > 0.0) || !(lmin > 0.0)) return 0.0;
  double p = 0.0;
  for (int i = 0; i < n; ++i) p += c.p0i[i] * c.p0i[i];
  p = std::sqrt(p);
  double eps = std::min({1.0, a, 1.0 / a, lmin, 1.0 / lmax});
  if (p > 0.0) eps = std::min(eps, 1.0 / p);
  return eps;
}

AdmissibilityReport check_admissible(const KineticPerturbation& pert) {
  AdmissibilityReport r;
  r.epsilon = 1.0;
  const auto& spec = pert.spec();
  const auto mask = pert.support_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double e = pointwise_epsilon(pert.at(i), spec.d);
    if (e < r.epsilon) {
      r.epsilon = e;
      r.worst_node = i;
    }
  }
  r.pass = r.epsilon > 0.0;
  return r;
}

PointMetric point_metric(const SymbolCoefficients& c, int d) {
  const SmallMatrix s = principal_symbol(c, d);
  Eigen::FullPivLU<SmallMatrix> lu(s);
  if (!lu.isInvertible())
    throw Error(ErrorCode::SingularPrincipalSymbol, "principal symbol is not invertible");
  SmallMatrix g = lu.inverse();
  if (d > 2) g *= std::pow(std::abs(lu.determinant()), 1.0 / (d - 2));
  return PointMetric::from_metric(g);
}

MetricBlocks metric_from_perturbation(const KineticPerturbation& pert) {
  MetricBlocks b;
  b.spec = pert.spec();
  b.conformal_only = b.spec.d == 2;
  const PointMetric flat = point_metric(SymbolCoefficients{}, b.spec.d);
  b.points.assign(b.spec.size(), flat);
  const auto mask = pert.support_mask();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) b.points[i] = point_metric(pert.at(i), b.spec.d);
  return b;
}

double point_light_speed(const PointMetric& m) {
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(m.G, Eigen::EigenvaluesOnly);
  const double ginv = 1.0 / es.eigenvalues()(0);
  const double gn = m.gvec.norm();
  return (std::sqrt(m.g00 / ginv + gn * gn) + gn) * ginv;
}

double null_speed_along(const PointMetric& m, const SmallVector& direction) {
  const double a = direction.dot(m.G * direction);
  const double b = m.gvec.dot(direction);
  return (b + std::sqrt(b * b + m.g00 * a)) / a;
}

double point_min_null_speed(const PointMetric& m) {
  const int n = static_cast<int>(m.G.rows());
  if (n == 1) {
    SmallVector e(1);
    e(0) = 1.0;
    const double s1 = null_speed_along(m, e);
    e(0) = -1.0;
    return std::min(s1, null_speed_along(m, e));
  }
  constexpr int samples = 720;
  double s = std::numeric_limits<double>::infinity();
  SmallVector e(2);
  for (int k = 0; k < samples; ++k) {
    const double th = 2.0 * std::numbers::pi * k / samples;
    e << std::cos(th), std::sin(th);
    s = std::min(s, null_speed_along(m, e));
  }
  return s * (1.0 - 1e-4);
}

LatticeField light_speed_bound(const MetricBlocks& blocks) {
  LatticeField c(blocks.spec);
  for (std::size_t i = 0; i < blocks.points.size(); ++i) c[i] = point_light_speed(blocks.points[i]);
  return c;
}

Region::Region(const LatticeSpec& spec, std::vector<std::uint8_t> mask)
    : spec_(spec), mask_(std::move(mask)) {
  if (mask_.size() != spec_.size()) throw Error(ErrorCode::FormatError, "mask size mismatch");
}

Region Region::from_box(const LatticeSpec& spec, const Box& box) {
  Region r(spec);
  for (int t = box.lo[0]; t < box.hi[0]; ++t)
    for (int y = box.lo[2]; y < box.hi[2]; ++y)
      for (int x = box.lo[1]; x < box.hi[1]; ++x) r.mask_[spec.index(t, x, y)] = 1;
  return r;
}

Region Region::support_of(const LatticeField& f) {
  Region r(f.spec());
  for (std::size_t i = 0; i < f.size(); ++i) r.mask_[i] = f[i] != 0.0;
  return r;
}

Region Region::support_of(const KineticPerturbation& p) {
  return Region(p.spec(), p.support_mask());
}

Region Region::operator_support_of(const KineticPerturbation& p) {
  return support_of(p).dilated(1);
}

std::size_t Region::count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
}

Box Region::bounding_box() const {
  Box b{{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
         std::numeric_limits<int>::max()},
        {0, 0, 0}};
  bool any = false;
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (!mask_[i]) continue;
    any = true;
    const auto c = spec_.coords(i);
    for (int k = 0; k < 3; ++k) {
      b.lo[k] = std::min(b.lo[k], c[k]);
      b.hi[k] = std::max(b.hi[k], c[k] + 1);
    }
  }
  return any ? b : Box{};
}

Region Region::dilated(int r) const {
  Region out(spec_);
  const int ry = spec_.d == 3 ? r : 0;
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (!mask_[i]) continue;
    const auto c = spec_.coords(i);
    for (int dt = -r; dt <= r; ++dt) {
      const int t = c[0] + dt;
      if (t < 0 || t >= spec_.nt) continue;
      for (int dy = -ry; dy <= ry; ++dy) {
        const int y = spec_.wrap_y(c[2] + dy);
        if (y < 0) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int x = spec_.wrap_x(c[1] + dx);
          if (x >= 0) out.mask_[spec_.index(t, x, y)] = 1;
        }
      }
    }
  }
  return out;
}

Region Region::operator|(const Region& o) const {
  Region r = *this;
  for (std::size_t i = 0; i < mask_.size(); ++i) r.mask_[i] = mask_[i] | o.mask_[i];
  return r;
}

Region Region::operator&(const Region& o) const {
  Region r = *this;
  for (std::size_t i = 0; i < mask_.size(); ++i) r.mask_[i] = mask_[i] & o.mask_[i];
  return r;
}

Region Region::operator~() const {
  Region r = *this;
  for (auto& v : r.mask_) v = !v;
  return r;
}

bool Region::intersects(const Region& o) const {
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i] && o.mask_[i]) return true;
  return false;
}

bool Region::subset_of(const Region& o) const {
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i] && !o.mask_[i]) return false;
  return true;
}

ConeSpeeds flat_speed(const LatticeSpec& spec, double c) {
  LatticeField f(spec, std::vector<double>(spec.size(), c));
  return {f, f};
}

ConeSpeeds cone_speeds(const MetricBlocks& blocks) {
  ConeSpeeds s{LatticeField(blocks.spec), LatticeField(blocks.spec)};
  for (std::size_t i = 0; i < blocks.points.size(); ++i) {
    s.upper[i] = point_light_speed(blocks.points[i]);
    s.lower[i] = point_min_null_speed(blocks.points[i]);
  }
  return s;
}

ConeSpeeds cone_speeds(const KineticPerturbation& n) {
  return cone_speeds(metric_from_perturbation(n));
}

namespace {

constexpr double kUnreached = -1e300;

/// In-place max-plus distance transform on one slice: c(y) <- max_x c(x) - dist(x,y)
/// with chessboard (diagonals allowed) or taxicab unit steps.
void distance_transform(std::vector<double>& c, const LatticeSpec& spec, bool chessboard) {
  const int nx = spec.nx();
  const int ny = spec.ny();
  auto at = [&](int x, int y) -> double {
    x = spec.wrap_x(x);
    y = spec.wrap_y(y);
    if (x < 0 || y < 0) return kUnreached;
    return c[static_cast<std::size_t>(y) * nx + x];
  };
  const int rounds = spec.periodic ? 4 : 1;
  for (int round = 0; round < rounds; ++round) {
    bool changed = false;
    auto relax = [&](int x, int y, int sx, int sy) {
      double& v = c[static_cast<std::size_t>(y) * nx + x];
      double best = std::max(v, at(x - sx, y) - 1.0);
      if (ny > 1) {
        best = std::max(best, at(x, y - sy) - 1.0);
        if (chessboard) {
          best = std::max(best, at(x - sx, y - sy) - 1.0);
          best = std::max(best, at(x + sx, y - sy) - 1.0);
        }
      }
      if (best > v) {
        v = best;
        changed = true;
      }
    };
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) relax(x, y, 1, 1);
    for (int y = ny - 1; y >= 0; --y)
      for (int x = nx - 1; x >= 0; --x) relax(x, y, -1, -1);
    if (!changed) break;
  }
}

/// Spatial max (or min) filter of radius r, combined over two time slices.
std::vector<double> local_extreme(const LatticeField& f, int t0, int t1, int r, bool take_max) {
  const auto& spec = f.spec();
  const int nx = spec.nx();
  const int ny = spec.ny();
  const int ry = spec.d == 3 ? r : 0;
  std::vector<double> out(spec.slice_size(), take_max ? 0.0 : std::numeric_limits<double>::infinity());
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double v = out[static_cast<std::size_t>(y) * nx + x];
      for (int t : {t0, t1}) {
        if (t < 0 || t >= spec.nt) continue;
        for (int dy = -ry; dy <= ry; ++dy) {
          const int yy = spec.wrap_y(y + dy);
          if (yy < 0) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = spec.wrap_x(x + dx);
            if (xx < 0) continue;
            const double s = f.at(t, xx, yy);
            v = take_max ? std::max(v, s) : std::min(v, s);
          }
        }
      }
      out[static_cast<std::size_t>(y) * nx + x] = v;
    }
  return out;
}

}  // namespace

Region causal_cone(const Region& region, const ConeSpeeds& speeds, ConeDirection dir,
                   ConeMode mode) {
  const auto& spec = region.spec();
  const bool over = mode == ConeMode::Over;
  const LatticeField& speed = over ? speeds.upper : speeds.lower;
  const double ratio = spec.dt / spec.dx;
  double smax = 0.0;
  for (double v : speed.data()) smax = std::max(smax, v);
  const int radius = static_cast<int>(std::ceil(smax * ratio)) + 1;
  const double slack = over ? 1.0 : 0.0;

  Region out(spec);
  const std::size_t ns = spec.slice_size();
  std::vector<double> credit(ns, kUnreached);
  const bool future = dir == ConeDirection::Future;
  for (int k = 0; k < spec.nt; ++k) {
    const int t = future ? k : spec.nt - 1 - k;
    if (k > 0) {
      const int tp = future ? t - 1 : t + 1;
      const auto s = local_extreme(speed, tp, t, over ? radius : 0, over);
      for (std::size_t i = 0; i < ns; ++i)
        if (credit[i] > kUnreached) credit[i] += s[i] * ratio;
    }
    for (std::size_t i = 0; i < ns; ++i)
      if (region.contains(static_cast<std::size_t>(t) * ns + i)) credit[i] = std::max(credit[i], slack);
    distance_transform(credit, spec, over);
    for (std::size_t i = 0; i < ns; ++i) {
      if (credit[i] < 0.0) continue;
      const std::size_t node = static_cast<std::size_t>(t) * ns + i;
      out.insert(node);
      if (!spec.periodic) {
        const auto c = spec.coords(node);
        if (c[1] == 0 || c[1] == spec.nx() - 1 ||
            (spec.d == 3 && (c[2] == 0 || c[2] == spec.ny() - 1)))
          throw Error(ErrorCode::WindowOverflow, "cone reaches the spatial edge of the window");
      }
    }
  }
  return out;
}

Region causal_cone(const Region& region, const MetricBlocks& blocks, ConeDirection dir,
                   ConeMode mode) {
  return causal_cone(region, cone_speeds(blocks), dir, mode);
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Succeeds: return "succeeds";
    case Relation::Preceded: return "preceded";
    case Relation::Spacelike: return "spacelike";
    case Relation::Entangled: return "entangled";
  }
  return "entangled";
}

bool succeeds(const Region& p, const Region& q, const ConeSpeeds& speeds) {
  return !p.intersects(causal_cone(q, speeds, ConeDirection::Past, ConeMode::Over));
}

bool spacelike(const Region& p, const Region& q, const ConeSpeeds& speeds) {
  return succeeds(p, q, speeds) &&
         !p.intersects(causal_cone(q, speeds, ConeDirection::Future, ConeMode::Over));
}

Relation relation(const Region& p, const Region& q, const ConeSpeeds& speeds) {
  const bool after = succeeds(p, q, speeds);
  const bool before = !p.intersects(causal_cone(q, speeds, ConeDirection::Future, ConeMode::Over));
  if (after && before) return Relation::Spacelike;
  if (after) return Relation::Succeeds;
  if (before) return Relation::Preceded;
  return Relation::Entangled;
}

Relation relation(const Region& p, const Region& q, const MetricBlocks& n_blocks) {
  return relation(p, q, cone_speeds(n_blocks));
}

}  // namespace causalfield
