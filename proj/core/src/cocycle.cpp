#include "causalfield/cocycle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <sstream>

#include <json.hpp>

#include "causalfield/error.hpp"

namespace causalfield {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_with(const SiteFunctional& s, std::uint64_t seed) {
  std::uint64_t h = splitmix(seed);
  const auto& c = s.coefficients();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] != 0) h = splitmix(h ^ splitmix(i * 0x100000001b3ULL ^ static_cast<std::uint64_t>(c[i])));
  return splitmix(h ^ c.size());
}

std::string describe(const Universe& u, const SiteFunctional& s) {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (std::size_t cell = 0; cell < u.cells(); ++cell) {
    bool any = false;
    for (int k = 0; k < u.components; ++k) any |= s.at(cell, k, u.components) != 0;
    if (!any) continue;
    if (!first) os << ",";
    first = false;
    os << "(" << cell / u.nx << "," << cell % u.nx << "):[";
    for (int k = 0; k < u.components; ++k) os << (k ? " " : "") << s.at(cell, k, u.components);
    os << "]";
  }
  os << "}";
  return os.str();
}

std::string describe(const Universe& u, const Triple& t) {
  return "N=" + describe(u, t.n) + " P=" + describe(u, t.p) + " Q=" + describe(u, t.q);
}

Region single_cell(const Universe& u, std::size_t cell) {
  Region r(u.cell_spec());
  r.insert(u.node(cell));
  return r;
}

std::vector<std::size_t> cells_of(const Universe& u, const SiteFunctional& s) {
  std::vector<std::size_t> out;
  for (std::size_t cell = 0; cell < u.cells(); ++cell)
    for (int k = 0; k < u.components; ++k)
      if (s.at(cell, k, u.components) != 0) {
        out.push_back(cell);
        break;
      }
  return out;
}

SiteFunctional cell_part(const Universe& u, const SiteFunctional& s, std::size_t cell) {
  SiteFunctional out(u);
  for (int k = 0; k < u.components; ++k) out.at(cell, k, u.components) = s.at(cell, k, u.components);
  return out;
}

void require_admissible(const Universe& u, const SiteFunctional& s, const char* what) {
  if (s.coefficients().size() != u.size())
    throw Error(ErrorCode::DomainViolation, std::string(what) + " does not live on the universe");
  if (!s.admissible(u))
    throw Error(ErrorCode::InadmissibleSum, std::string(what) + " leaves the admissible box");
}

struct Check {
  IdentityReport report;
  double tol;

  void add(const Phase& lhs, const Phase& rhs, const std::string& what) {
    const double d = angular_distance(lhs, rhs);
    const double err = lhs.error + rhs.error;
    ++report.checked;
    if (d > tol + 3.0 * err) report.flagged = true;
    if (d >= report.max_defect) {
      report.max_defect = d;
      report.max_error = err;
      report.worst = what;
    }
  }
};

std::vector<double> random_weights(const Universe& u, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> chi(u.cells());
  for (auto& v : chi) {
    const double r = unit(rng);
    v = r < 0.25 ? 0.0 : r < 0.5 ? 1.0 : unit(rng);
  }
  return chi;
}

}  // namespace

Phase Phase::from_radians(double angle, double error) {
  long double frac = static_cast<long double>(angle) / static_cast<long double>(kTwoPi);
  frac -= std::floor(frac);
  long double scaled = std::ldexp(frac, 64);
  if (scaled >= std::ldexp(1.0L, 64)) scaled = 0.0L;
  return {static_cast<std::uint64_t>(scaled), error};
}

double Phase::radians() const {
  return static_cast<double>(static_cast<std::int64_t>(turns)) * (kTwoPi / 18446744073709551616.0);
}

double angular_distance(const Phase& a, const Phase& b) {
  return std::abs((a * b.inverse()).radians());
}

int Universe::pad() const { return periodic ? 0 : static_cast<int>(std::ceil(c * nt)) + 3; }

LatticeSpec Universe::cell_spec() const {
  LatticeSpec s;
  s.d = 2;
  s.nt = nt;
  s.ns = {nx + 2 * pad(), 1};
  s.dx = 1.0;
  s.dt = 1.0;
  s.c_max = std::max(1.0, c);
  s.periodic = periodic;
  return s;
}

std::size_t Universe::node(std::size_t cell) const {
  const auto t = cell / nx;
  const auto x = cell % nx;
  return t * static_cast<std::size_t>(nx + 2 * pad()) + x + pad();
}

bool SiteFunctional::is_zero() const {
  return std::all_of(coeff_.begin(), coeff_.end(), [](std::int64_t v) { return v == 0; });
}

bool SiteFunctional::admissible(const Universe& u) const {
  return std::all_of(coeff_.begin(), coeff_.end(),
                     [&](std::int64_t v) { return v <= u.bound && v >= -u.bound; });
}

Region SiteFunctional::support(const Universe& u) const {
  Region r(u.cell_spec());
  for (std::size_t cell : cells_of(u, *this)) r.insert(u.node(cell));
  return r;
}

SiteFunctional SiteFunctional::restricted(const Universe& u, const Region& cells) const {
  SiteFunctional out(u);
  for (std::size_t cell = 0; cell < u.cells(); ++cell)
    if (cells.contains(u.node(cell)))
      for (int k = 0; k < u.components; ++k) out.at(cell, k, u.components) = at(cell, k, u.components);
  return out;
}

std::pair<SiteFunctional, SiteFunctional> SiteFunctional::split(const Universe& u,
                                                                const std::vector<double>& chi) const {
  SiteFunctional a(u), b(u);
  for (std::size_t cell = 0; cell < u.cells(); ++cell)
    for (int k = 0; k < u.components; ++k) {
      const std::int64_t v = at(cell, k, u.components);
      const auto part = static_cast<std::int64_t>(std::floor(chi[cell] * static_cast<double>(v)));
      a.at(cell, k, u.components) = part;
      b.at(cell, k, u.components) = v - part;
    }
  return {a, b};
}

std::uint64_t SiteFunctional::hash() const { return hash_with(*this, 0); }

SiteFunctional& SiteFunctional::operator+=(const SiteFunctional& o) {
  if (coeff_.empty()) coeff_.assign(o.coeff_.size(), 0);
  for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] += o.coeff_[i];
  return *this;
}

SiteFunctional& SiteFunctional::operator-=(const SiteFunctional& o) {
  if (coeff_.empty()) coeff_.assign(o.coeff_.size(), 0);
  for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] -= o.coeff_[i];
  return *this;
}

CellGeometry::CellGeometry(const Universe& u) : u_(u), speeds_(flat_speed(u.cell_spec(), u.c)) {}

Region CellGeometry::past(const Region& r) const {
  return causal_cone(r, speeds_, ConeDirection::Past, ConeMode::Over);
}

Region CellGeometry::future(const Region& r) const {
  return causal_cone(r, speeds_, ConeDirection::Future, ConeMode::Over);
}

bool CellGeometry::succeeds(const SiteFunctional& p, const SiteFunctional& q) const {
  const Region pr = p.support(u_), qr = q.support(u_);
  if (pr.empty() || qr.empty()) return true;
  return !pr.intersects(past(qr));
}

bool CellGeometry::spacelike(const SiteFunctional& p, const SiteFunctional& q) const {
  const Region pr = p.support(u_), qr = q.support(u_);
  if (pr.empty() || qr.empty()) return true;
  return !pr.intersects(past(qr)) && !pr.intersects(future(qr));
}

bool CellGeometry::disjoint(const SiteFunctional& p, const SiteFunctional& q) const {
  return !p.support(u_).intersects(q.support(u_));
}

bool CellGeometry::separable(const SiteFunctional& p, const SiteFunctional& q) const {
  const Region pr = p.support(u_);
  for (std::size_t cell : cells_of(u_, q)) {
    const Region c = single_cell(u_, cell);
    if ((past(c) & future(c)).intersects(pr)) return false;
  }
  return true;
}

const char* to_string(OracleDomain d) {
  return d == OracleDomain::Ordered ? "ordered" : "disjoint";
}

struct PhaseOracle::Memo {
  std::shared_mutex mu;
  std::map<std::array<std::uint64_t, 2>, Phase> values;
  std::atomic<std::size_t> evaluations{0};
};

PhaseOracle::PhaseOracle(std::shared_ptr<const CellGeometry> geo, OracleDomain domain, Fn fn,
                         std::string name)
    : geo_(std::move(geo)), domain_(domain), fn_(std::move(fn)), name_(std::move(name)),
      memo_(std::make_shared<Memo>()) {}

bool PhaseOracle::in_domain(const SiteFunctional& n, const SiteFunctional& p,
                            const SiteFunctional& q) const {
  (void)n;
  return domain_ == OracleDomain::Ordered ? geo_->succeeds(p, q) : geo_->disjoint(p, q);
}

Phase PhaseOracle::operator()(const SiteFunctional& n, const SiteFunctional& p,
                              const SiteFunctional& q) const {
  const auto& u = geo_->universe();
  require_admissible(u, n, "N");
  require_admissible(u, p, "P");
  require_admissible(u, q, "Q");
  require_admissible(u, p + n, "P+N");
  require_admissible(u, q + n, "Q+N");
  require_admissible(u, p + q + n, "P+Q+N");
  if (p.is_zero() || q.is_zero()) return Phase{};
  const std::array<std::uint64_t, 2> key{
      splitmix(hash_with(n, 1) ^ splitmix(hash_with(p, 2) ^ splitmix(hash_with(q, 3)))),
      splitmix(hash_with(n, 4) ^ splitmix(hash_with(p, 5) ^ splitmix(hash_with(q, 6))))};
  {
    std::shared_lock lock(memo_->mu);
    auto it = memo_->values.find(key);
    if (it != memo_->values.end()) return it->second;
  }
  if (!in_domain(n, p, q))
    throw Error(ErrorCode::DomainViolation, name_ + " is defined on " + to_string(domain_) +
                                                " triples only: " + describe(u, Triple{n, p, q}));
  const Phase v = fn_(n, p, q);
  ++memo_->evaluations;
  std::unique_lock lock(memo_->mu);
  memo_->values.emplace(key, v);
  return v;
}

std::size_t PhaseOracle::evaluations() const { return memo_->evaluations.load(); }

Coboundary Coboundary::additive(const Universe& u, std::uint64_t seed) {
  std::vector<std::uint64_t> w(u.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = splitmix(seed * 0x2545f4914f6cdd1dULL + i);
  return Coboundary(
      [w](const SiteFunctional& r) {
        std::uint64_t t = 0;
        const auto& c = r.coefficients();
        for (std::size_t i = 0; i < c.size(); ++i) t += w[i] * static_cast<std::uint64_t>(c[i]);
        return Phase{t, 0.0};
      },
      "additive");
}

namespace {

std::uint64_t bilinear_weight(std::uint64_t seed, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return splitmix(splitmix(seed ^ 0x51ed27ULL) ^ (static_cast<std::uint64_t>(i) << 32 | j));
}

std::uint64_t bilinear_form(std::uint64_t seed, const SiteFunctional& a, const SiteFunctional& b) {
  std::vector<std::size_t> ia, ib;
  for (std::size_t i = 0; i < a.coefficients().size(); ++i)
    if (a.coefficients()[i] != 0) ia.push_back(i);
  for (std::size_t j = 0; j < b.coefficients().size(); ++j)
    if (b.coefficients()[j] != 0) ib.push_back(j);
  std::uint64_t t = 0;
  for (std::size_t i : ia)
    for (std::size_t j : ib)
      t += bilinear_weight(seed, i, j) * static_cast<std::uint64_t>(a.coefficients()[i]) *
           static_cast<std::uint64_t>(b.coefficients()[j]);
  return t;
}

}  // namespace

Coboundary Coboundary::bilinear(const Universe& u, std::uint64_t seed) {
  (void)u;
  return Coboundary([seed](const SiteFunctional& r) { return Phase{bilinear_form(seed, r, r), 0.0}; },
                    "bilinear");
}

Phase bilinear_delta(const Universe& u, std::uint64_t seed, const SiteFunctional& p,
                     const SiteFunctional& q) {
  (void)u;
  return Phase{2 * bilinear_form(seed, p, q), 0.0};
}

Coboundary Coboundary::generic(std::uint64_t seed) {
  return Coboundary([seed](const SiteFunctional& r) { return Phase{hash_with(r, seed ^ 0xfeedULL), 0.0}; },
                    "generic");
}

Coboundary Coboundary::operator*(const Coboundary& o) const {
  auto a = fn_;
  auto b = o.fn_;
  return Coboundary([a, b](const SiteFunctional& r) { return a(r) * b(r); }, name_ + "*" + o.name_);
}

Coboundary Coboundary::inverse() const {
  auto a = fn_;
  return Coboundary([a](const SiteFunctional& r) { return a(r).inverse(); }, name_ + "^-1");
}

Phase delta_beta(const Coboundary& beta, const Universe& u, const SiteFunctional& n,
                 const SiteFunctional& p, const SiteFunctional& q) {
  const SiteFunctional pn = p + n, qn = q + n, pqn = p + q + n;
  require_admissible(u, n, "N");
  require_admissible(u, pn, "P+N");
  require_admissible(u, qn, "Q+N");
  require_admissible(u, pqn, "P+Q+N");
  return beta(pn).inverse() * beta(n) * beta(qn).inverse() * beta(pqn);
}

PhaseOracle coboundary_oracle(std::shared_ptr<const CellGeometry> geo, const Coboundary& beta,
                              OracleDomain domain) {
  const Universe u = geo->universe();
  return PhaseOracle(
      geo, domain,
      [beta, u](const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) {
        return delta_beta(beta, u, n, p, q);
      },
      "delta(" + beta.name() + ")");
}

PhaseOracle corrupted(const PhaseOracle& base, const Triple& t, double angle) {
  const Phase kick = Phase::from_radians(angle);
  return PhaseOracle(
      base.geometry_ptr(), base.domain(),
      [base, t, kick](const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) {
        Phase v = base(n, p, q);
        if (n == t.n && p == t.p && q == t.q) v *= kick;
        return v;
      },
      base.name() + "+corrupted");
}

PhaseOracle with_overlap_term(const PhaseOracle& base, std::uint64_t weight) {
  return PhaseOracle(
      base.geometry_ptr(), base.domain(),
      [base, weight](const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < p.coefficients().size(); ++i)
          t += weight * static_cast<std::uint64_t>(p.coefficients()[i]) *
               static_cast<std::uint64_t>(q.coefficients()[i]);
        return base(n, p, q) * Phase{t, 0.0};
      },
      base.name() + "+overlap");
}

SiteFunctional random_functional(const Universe& u, const Region& cells, std::mt19937_64& rng,
                                 std::int64_t scale) {
  std::uniform_int_distribution<std::int64_t> dist(-scale, scale);
  SiteFunctional out(u);
  for (std::size_t cell = 0; cell < u.cells(); ++cell) {
    if (!cells.contains(u.node(cell))) continue;
    bool any = false;
    while (!any)
      for (int k = 0; k < u.components; ++k) {
        out.at(cell, k, u.components) = dist(rng);
        any |= out.at(cell, k, u.components) != 0;
      }
  }
  return out;
}

namespace {

Region random_cells(const Universe& u, std::mt19937_64& rng, int count, const Region* avoid) {
  Region r(u.cell_spec());
  std::uniform_int_distribution<std::size_t> pick(0, u.cells() - 1);
  for (int i = 0, tries = 0; i < count && tries < 1000; ++tries) {
    const std::size_t cell = pick(rng);
    if (avoid && avoid->contains(u.node(cell))) continue;
    if (r.contains(u.node(cell))) continue;
    r.insert(u.node(cell));
    ++i;
  }
  return r;
}

}  // namespace

std::vector<Triple> random_ordered_triples(const CellGeometry& geo, std::uint64_t seed, int count) {
  const auto& u = geo.universe();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 3), nsize(0, 3);
  const std::int64_t scale = u.bound / 4;
  std::vector<Triple> out;
  for (int tries = 0; static_cast<int>(out.size()) < count && tries < 100 * count; ++tries) {
    const Region qr = random_cells(u, rng, size(rng), nullptr);
    const Region past = geo.past(qr);
    const Region pr = random_cells(u, rng, size(rng), &past);
    if (pr.empty()) continue;
    const Region nr = random_cells(u, rng, nsize(rng), nullptr);
    out.push_back({random_functional(u, nr, rng, scale), random_functional(u, pr, rng, scale),
                   random_functional(u, qr, rng, scale)});
  }
  return out;
}

std::vector<Triple> random_disjoint_triples(const CellGeometry& geo, std::uint64_t seed, int count) {
  const auto& u = geo.universe();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 3), nsize(0, 3);
  const std::int64_t scale = u.bound / 4;
  std::vector<Triple> out;
  for (int tries = 0; static_cast<int>(out.size()) < count && tries < 100 * count; ++tries) {
    const Region qr = random_cells(u, rng, size(rng), nullptr);
    const Region pr = random_cells(u, rng, size(rng), &qr);
    if (pr.empty()) continue;
    Triple t{random_functional(u, random_cells(u, rng, nsize(rng), nullptr), rng, scale),
             random_functional(u, pr, rng, scale), random_functional(u, qr, rng, scale)};
    if (!geo.separable(t.p, t.q) || !geo.separable(t.q, t.p)) continue;
    out.push_back(std::move(t));
  }
  return out;
}

IdentityReport check_splitting(const PhaseOracle& oracle, const std::vector<Triple>& triples,
                             std::uint64_t seed, double tol) {
  const auto& u = oracle.geometry().universe();
  Check chk{{"split", 0, 0, 0, {}, false}, tol};
  std::mt19937_64 rng(seed);
  for (const auto& t : triples) {
    const auto [p1, p2] = t.p.split(u, random_weights(u, rng));
    chk.add(oracle(t.n, t.p, t.q), oracle(t.n, p1, t.q) * oracle(t.n + p1, p2, t.q),
            "P-split " + describe(u, t) + " P1=" + describe(u, p1));
    const auto [q1, q2] = t.q.split(u, random_weights(u, rng));
    chk.add(oracle(t.n, t.p, t.q), oracle(t.n, t.p, q1) * oracle(t.n + q1, t.p, q2),
            "Q-split " + describe(u, t) + " Q1=" + describe(u, q1));
  }
  return chk.report;
}

IdentityReport check_chain(const PhaseOracle& oracle, std::uint64_t seed, int count, double tol) {
  const auto& geo = oracle.geometry();
  const auto& u = geo.universe();
  Check chk{{"chain", 0, 0, 0, {}, false}, tol};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 2), nsize(0, 3);
  const std::int64_t scale = u.bound / 4;
  for (int tries = 0; static_cast<int>(chk.report.checked) < count && tries < 200 * count; ++tries) {
    const Region qr = random_cells(u, rng, size(rng), nullptr);
    const Region before = geo.past(qr), after = geo.future(qr);
    const Region p1r = random_cells(u, rng, size(rng), &before);
    const Region not_before = ~before;
    const Region p2r = random_cells(u, rng, size(rng), &not_before);
    if (p1r.empty() || p2r.empty()) continue;
    const auto q = random_functional(u, qr, rng, scale);
    const auto p1 = random_functional(u, p1r, rng, scale);
    const auto p2 = random_functional(u, p2r, rng, scale);
    if (!geo.succeeds(p1, q) || !geo.succeeds(q, p2) || !geo.succeeds(p1, p2)) continue;
    const auto n = random_functional(u, random_cells(u, rng, nsize(rng), nullptr), rng, scale);
    chk.add(oracle(n + p1, q, p2) * oracle(n, p1, q), oracle(n + p2, p1, q) * oracle(n, q, p2),
            describe(u, Triple{n, p1, q}) + " P2=" + describe(u, p2));
    (void)after;
  }
  return chk.report;
}

IdentityReport check_split_exchange(const PhaseOracle& extended, const std::vector<Triple>& triples,
                             std::uint64_t seed, double tol) {
  const auto& geo = extended.geometry();
  const auto& u = geo.universe();
  Check chk{{"extended split/exchange", 0, 0, 0, {}, false}, tol};
  std::mt19937_64 rng(seed);
  for (const auto& t : triples) {
    const auto [p1, p2] = t.p.split(u, random_weights(u, rng));
    chk.add(extended(t.n, t.p, t.q), extended(t.n, p1, t.q) * extended(t.n + p1, p2, t.q),
            "P-split " + describe(u, t) + " P1=" + describe(u, p1));
    const auto [q1, q2] = t.q.split(u, random_weights(u, rng));
    chk.add(extended(t.n, t.p, q1) * extended(t.n + q1, t.p, q2),
            extended(t.n, t.p, q2) * extended(t.n + q2, t.p, q1),
            "Q-exchange " + describe(u, t) + " Q1=" + describe(u, q1));
  }
  return chk.report;
}

IdentityReport check_symmetry(const PhaseOracle& extended, const std::vector<Triple>& triples,
                              double tol) {
  const auto& u = extended.geometry().universe();
  Check chk{{"symmetry", 0, 0, 0, {}, false}, tol};
  for (const auto& t : triples)
    chk.add(extended(t.n, t.p, t.q), extended(t.n, t.q, t.p), describe(u, t));
  return chk.report;
}

namespace {

struct Extender {
  PhaseOracle restricted;
  ExtendOptions opt;

  const CellGeometry& geo() const { return restricted.geometry(); }
  const Universe& u() const { return geo().universe(); }

  Region hull(const Region& r) const { return geo().past(r) & geo().future(r); }

  /// Groups the cells of Q into pieces whose causal hulls avoid supp P.
  std::vector<SiteFunctional> covering(const SiteFunctional& p, const SiteFunctional& q,
                                       std::mt19937_64* rng) const {
    const Region pr = p.support(u());
    auto cells = cells_of(u(), q);
    for (std::size_t cell : cells)
      if (hull(single_cell(u(), cell)).intersects(pr))
        throw Error(ErrorCode::DomainViolation,
                    "supports are not separable at cell resolution: " + describe(u(), Triple{{}, p, q}));
    std::vector<SiteFunctional> pieces;
    if (!rng) {
      if (!hull(q.support(u())).intersects(pr)) return {q};
      Region group(u().cell_spec());
      SiteFunctional piece(u());
      for (std::size_t cell : cells) {
        Region trial = group;
        trial.insert(u().node(cell));
        if (!piece.is_zero() && hull(trial).intersects(pr)) {
          pieces.push_back(piece);
          piece = SiteFunctional(u());
          trial = single_cell(u(), cell);
        }
        piece += cell_part(u(), q, cell);
        group = trial;
      }
      pieces.push_back(piece);
      return pieces;
    }
    std::shuffle(cells.begin(), cells.end(), *rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Region group(u().cell_spec());
    SiteFunctional piece(u());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      SiteFunctional part = cell_part(u(), q, cells[i]);
      if (i == 0) {
        std::vector<double> chi(u().cells(), 0.0);
        chi[cells[i]] = unit(*rng);
        auto [a, b] = part.split(u(), chi);
        if (!a.is_zero() && !b.is_zero()) {
          pieces.push_back(a);
          part = b;
        }
      }
      Region trial = group;
      trial.insert(u().node(cells[i]));
      if (!piece.is_zero() && (unit(*rng) < 0.5 || hull(trial).intersects(pr))) {
        pieces.push_back(piece);
        piece = SiteFunctional(u());
        trial = single_cell(u(), cells[i]);
      }
      piece += part;
      group = trial;
    }
    pieces.push_back(piece);
    std::shuffle(pieces.begin(), pieces.end(), *rng);
    return pieces;
  }

  /// alpha(N|P+,Q) alpha(N+P+|Q,P-) with spacelike cells of P assigned by weights.
  Phase step(const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q,
             std::mt19937_64* rng) const {
    const Region qr = q.support(u());
    const Region before = geo().past(qr), after = geo().future(qr);
    std::vector<double> chi(u().cells(), 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t cell : cells_of(u(), p)) {
      const auto node = u().node(cell);
      if (before.contains(node))
        chi[cell] = 0.0;
      else if (!after.contains(node) && rng) {
        const double r = unit(*rng);
        chi[cell] = r < 0.3 ? 0.0 : r < 0.6 ? 1.0 : unit(*rng);
      }
    }
    const auto [plus, minus] = p.split(u(), chi);
    Phase v;
    if (!plus.is_zero()) v *= restricted(n, plus, q);
    if (!minus.is_zero()) v *= restricted(n + plus, q, minus);
    return v;
  }

  Phase evaluate(const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q,
                 std::mt19937_64* rng) const {
    Phase v;
    if (p.is_zero() || q.is_zero()) return v;
    SiteFunctional base = n;
    for (const auto& piece : covering(p, q, rng)) {
      v *= step(base, p, piece, rng);
      base += piece;
    }
    return v;
  }

  Phase operator()(const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) const {
    const Phase v = evaluate(n, p, q, nullptr);
    for (int k = 0; k < opt.alternatives; ++k) {
      std::mt19937_64 rng(splitmix(opt.seed ^ hash_with(n, 7) ^ hash_with(p, 8) ^ hash_with(q, 9)) + k);
      const Phase w = evaluate(n, p, q, &rng);
      const double d = angular_distance(v, w);
      if (d > opt.tol + 3.0 * (v.error + w.error)) {
        std::ostringstream os;
        os << "alternative split/covering " << k << " differs by " << d << " rad at "
           << describe(u(), Triple{n, p, q});
        throw Error(ErrorCode::NotExtendable, os.str());
      }
    }
    return v;
  }
};

}  // namespace

PhaseOracle extend_phase(const PhaseOracle& restricted, const ExtendOptions& opt) {
  if (restricted.domain() != OracleDomain::Ordered)
    throw Error(ErrorCode::ConfigError, "extension expects an oracle on ordered triples");
  return PhaseOracle(restricted.geometry_ptr(), OracleDomain::Disjoint, Extender{restricted, opt},
                     "ext(" + restricted.name() + ")");
}

std::vector<Triple> pair_triples(const CellGeometry& geo, const RegionPair& pair, std::uint64_t seed,
                                 int count) {
  const auto& u = geo.universe();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nsize(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::int64_t scale = u.bound / 4;
  auto sub = [&](const Region& r) {
    Region out(u.cell_spec());
    for (std::size_t cell = 0; cell < u.cells(); ++cell)
      if (r.contains(u.node(cell)) && unit(rng) < 0.6) out.insert(u.node(cell));
    if (out.empty())
      for (std::size_t cell = 0; cell < u.cells(); ++cell)
        if (r.contains(u.node(cell))) {
          out.insert(u.node(cell));
          break;
        }
    return out;
  };
  std::vector<Triple> out;
  for (int i = 0; i < count; ++i) {
    Region nr = random_cells(u, rng, nsize(rng), nullptr);
    if (i % 2 == 1 || unit(rng) < 0.5) nr = nr | sub(pair.r1);
    if (i % 2 == 1 || unit(rng) < 0.5) nr = nr | sub(pair.r2);
    out.push_back({random_functional(u, nr, rng, scale), random_functional(u, sub(pair.r1), rng, scale),
                   random_functional(u, sub(pair.r2), rng, scale)});
  }
  return out;
}

IdentityReport gamma_check(const Coboundary& recovered, const Coboundary& reference,
                           const CellGeometry& geo, const std::vector<RegionPair>& pairs,
                           std::uint64_t seed, int count) {
  const auto& u = geo.universe();
  const Coboundary gamma = recovered * reference.inverse();
  Check chk{{"delta gamma", 0, 0, 0, {}, false}, 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  for (int i = 0; i < count; ++i) {
    const auto& pr = pairs[pick(rng)];
    const auto t = pair_triples(geo, pr, rng(), 1).front();
    chk.add(delta_beta(gamma, u, t.n, t.p, t.q), Phase{}, describe(u, t));
  }
  return chk.report;
}

Trivialization trivialize(const PhaseOracle& extended, const std::vector<RegionPair>& pairs,
                          const TrivializeOptions& opt) {
  const auto geo = extended.geometry_ptr();
  const Universe u = geo->universe();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    SiteFunctional a(u), b(u);
    for (std::size_t cell = 0; cell < u.cells(); ++cell) {
      if (pairs[k].r1.contains(u.node(cell))) a.at(cell, 0, u.components) = 1;
      if (pairs[k].r2.contains(u.node(cell))) b.at(cell, 0, u.components) = 1;
    }
    if (a.is_zero() || b.is_zero() || !geo->disjoint(a, b) || !geo->separable(a, b) ||
        !geo->separable(b, a))
      throw Error(ErrorCode::ConfigError,
                  "region pair " + std::to_string(k) + " is empty, overlapping or not separable");
  }

  Trivialization out{Coboundary::trivial(), extended, {}, {}};
  auto residual_on = [&](const PhaseOracle& oracle, std::size_t j) {
    PairResidual r{j, 0.0, 0.0};
    for (const auto& t : pair_triples(*geo, pairs[j], opt.seed * 7919 + j, opt.checks_per_pair)) {
      const Phase v = oracle(t.n, t.p, t.q);
      const double d = std::abs(v.radians());
      if (d >= r.max_angle) {
        r.max_angle = d;
        r.max_error = v.error;
      }
    }
    return r;
  };

  for (int sweep = 0; sweep < opt.sweeps; ++sweep)
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const PhaseOracle current = out.residual;
      const Region r1 = pairs[k].r1, r2 = pairs[k].r2;
      const Region rest = ~(r1 | r2);
      const Coboundary step(
          [current, u, r1, r2, rest](const SiteFunctional& r) {
            return current(r.restricted(u, rest), r.restricted(u, r1), r.restricted(u, r2));
          },
          "beta" + std::to_string(out.steps.size()));
      out.residual = PhaseOracle(
          geo, OracleDomain::Disjoint,
          [current, step, u](const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) {
            return current(n, p, q) * delta_beta(step, u, n, p, q).inverse();
          },
          "residual" + std::to_string(out.steps.size()));
      out.beta = out.beta * step;
      out.steps.push_back(k);

      const std::size_t done = sweep > 0 ? pairs.size() : k + 1;
      out.residuals.clear();
      for (std::size_t j = 0; j < done; ++j) {
        const auto r = residual_on(out.residual, j);
        out.residuals.push_back(r);
        if (r.max_angle > opt.tol + 3.0 * r.max_error) {
          std::ostringstream os;
          os << "pair " << j << " carries a residual of " << r.max_angle << " rad after step "
             << out.steps.size() - 1 << " (pair " << k << ")";
          throw Error(ErrorCode::PersistenceFailure, os.str());
        }
      }
    }
  return out;
}

KineticPerturbation CellEmbedding::perturbation(const Universe& u, const SiteFunctional& s) const {
  KineticPerturbation out(lattice);
  for (std::size_t cell : cells_of(u, s)) {
    const double v0 = static_cast<double>(s.at(cell, 0, u.components)) * scale;
    const double v1 = u.components > 1 ? static_cast<double>(s.at(cell, 1, u.components)) * scale : 0.0;
    SymbolCoefficients c = unit_kinetic * v1;
    c.q += unit_potential * v0;
    BumpTemplate b;
    b.center = {static_cast<double>(origin[0] + static_cast<int>(cell / u.nx) * cell_nodes[0]),
                static_cast<double>(origin[1] + static_cast<int>(cell % u.nx) * cell_nodes[1]), 0.0};
    b.radius = {radius[0], radius[1], 1.0};
    b.sharpness = 1.0;
    out.add_bump(c, b);
  }
  return out;
}

PhaseOracle measured_oracle(std::shared_ptr<const CellGeometry> geo, CellEmbedding emb,
                            std::shared_ptr<ImplementerCache> cache, AlphaOptions opt,
                            std::string log_path) {
  const Universe u = geo->universe();
  auto log_mu = std::make_shared<std::mutex>();
  auto replay = std::make_shared<std::map<std::string, Phase>>();
  if (!log_path.empty()) {
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto cutoffs = j.at("cutoffs").get<std::vector<int>>();
        if (cutoffs.empty() || cutoffs.front() != opt.n_max) continue;
        const double angle = std::atan2(j.at("alpha_im").get<double>(), j.at("alpha_re").get<double>());
        (*replay)[j.at("triple").get<std::string>()] =
            Phase::from_radians(angle, j.at("truncation_error").get<double>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, log_path + ": " + e.what());
      }
    }
  }
  return PhaseOracle(
      geo, OracleDomain::Ordered,
      [u, emb, cache, opt, log_path, log_mu, replay](const SiteFunctional& n, const SiteFunctional& p,
                                                     const SiteFunctional& q) {
        const std::string label = describe(u, Triple{n, p, q});
        {
          std::lock_guard lock(*log_mu);
          auto it = replay->find(label);
          if (it != replay->end()) return it->second;
        }
        const auto m = measure_alpha(emb.perturbation(u, p), emb.perturbation(u, q),
                                     emb.perturbation(u, n), *cache, opt, label);
        const Phase v = Phase::from_radians(m.angle(), m.truncation_error);
        std::lock_guard lock(*log_mu);
        (*replay)[label] = v;
        if (!log_path.empty()) append_phase_log(log_path, m);
        return v;
      },
      "measured");
}

}  // namespace causalfield
