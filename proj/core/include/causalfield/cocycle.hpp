#pragma once

#include <cstdint>
#include <functional>
#include <array>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "causalfield/geometry.hpp"
#include "causalfield/weyl.hpp"

namespace causalfield {

/// Unit complex number stored as a fraction of a full turn in units of 2^-64,
/// so products and inverses are exact; `error` carries a radian error bar.
struct Phase {
  std::uint64_t turns = 0;
  double error = 0.0;

  static Phase from_radians(double angle, double error = 0.0);
  /// Representative angle in [-pi, pi).
  double radians() const;
  bool is_one() const { return turns == 0; }

  Phase operator*(const Phase& o) const { return {turns + o.turns, error + o.error}; }
  Phase& operator*=(const Phase& o) { return *this = *this * o; }
  Phase inverse() const { return {0 - turns, error}; }
  bool operator==(const Phase& o) const { return turns == o.turns; }
};

/// |arg(a / b)| in radians.
double angular_distance(const Phase& a, const Phase& b);

/// Coarse spacetime cell grid (time x space) with integer coefficient vectors per cell.
/// The admissible set is the box |coefficient| <= bound, which is convex and contains 0.
struct Universe {
  int nt = 8;
  int nx = 8;
  int components = 2;
  std::int64_t bound = std::int64_t{1} << 20;
  double c = 1.0;  // cone speed in cells per cell
  bool periodic = false;

  std::size_t cells() const { return static_cast<std::size_t>(nt) * nx; }
  std::size_t size() const { return cells() * components; }
  std::size_t cell(int t, int x) const { return static_cast<std::size_t>(t) * nx + x; }
  /// Spatial padding of the cell lattice so that cones of a closed universe stay in the window.
  int pad() const;
  LatticeSpec cell_spec() const;
  /// Node of cell_spec() holding a cell.
  std::size_t node(std::size_t cell) const;
};

class SiteFunctional {
 public:
  SiteFunctional() = default;
  explicit SiteFunctional(const Universe& u) : coeff_(u.size(), 0) {}
  explicit SiteFunctional(std::vector<std::int64_t> coeff) : coeff_(std::move(coeff)) {}

  std::int64_t& at(std::size_t cell, int k, int components) { return coeff_[cell * components + k]; }
  std::int64_t at(std::size_t cell, int k, int components) const { return coeff_[cell * components + k]; }
  const std::vector<std::int64_t>& coefficients() const { return coeff_; }
  std::vector<std::string>& tags() { return tags_; }
  const std::vector<std::string>& tags() const { return tags_; }

  bool is_zero() const;
  bool admissible(const Universe& u) const;
  /// Cells carrying a nonzero coefficient.
  Region support(const Universe& u) const;
  /// Indicator restriction to a set of cells.
  SiteFunctional restricted(const Universe& u, const Region& cells) const;
  /// Pointwise split by per-cell weights chi in [0,1]: (floor(chi v), v - floor(chi v)).
  std::pair<SiteFunctional, SiteFunctional> split(const Universe& u, const std::vector<double>& chi) const;
  std::uint64_t hash() const;

  SiteFunctional& operator+=(const SiteFunctional& o);
  SiteFunctional& operator-=(const SiteFunctional& o);
  friend SiteFunctional operator+(SiteFunctional a, const SiteFunctional& b) { return a += b; }
  friend SiteFunctional operator-(SiteFunctional a, const SiteFunctional& b) { return a -= b; }
  bool operator==(const SiteFunctional& o) const { return coeff_ == o.coeff_; }

 private:
  std::vector<std::int64_t> coeff_;
  std::vector<std::string> tags_;
};

/// Cell-level causal structure: over-approximated cones of speed u.c from the geometry module.
class CellGeometry {
 public:
  explicit CellGeometry(const Universe& u);
  const Universe& universe() const { return u_; }
  Region past(const Region& r) const;
  Region future(const Region& r) const;
  /// P succeeds Q (P misses the past cone of Q).
  bool succeeds(const SiteFunctional& p, const SiteFunctional& q) const;
  bool spacelike(const SiteFunctional& p, const SiteFunctional& q) const;
  bool disjoint(const SiteFunctional& p, const SiteFunctional& q) const;
  /// Every cell of supp Q has a causal hull avoiding supp P.
  bool separable(const SiteFunctional& p, const SiteFunctional& q) const;

 private:
  Universe u_;
  ConeSpeeds speeds_;
};

struct Triple {
  SiteFunctional n;
  SiteFunctional p;
  SiteFunctional q;
};

enum class OracleDomain { Ordered, Disjoint };
const char* to_string(OracleDomain d);

/// Memoizing evaluator of phases on admissible triples; values outside the declared
/// domain raise DomainViolation. Triples with an empty P or Q have phase 1.
class PhaseOracle {
 public:
  using Fn = std::function<Phase(const SiteFunctional&, const SiteFunctional&, const SiteFunctional&)>;

  PhaseOracle(std::shared_ptr<const CellGeometry> geo, OracleDomain domain, Fn fn, std::string name);

  Phase operator()(const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) const;
  bool in_domain(const SiteFunctional& n, const SiteFunctional& p, const SiteFunctional& q) const;
  OracleDomain domain() const { return domain_; }
  const std::string& name() const { return name_; }
  const CellGeometry& geometry() const { return *geo_; }
  std::shared_ptr<const CellGeometry> geometry_ptr() const { return geo_; }
  std::size_t evaluations() const;

 private:
  struct Memo;
  std::shared_ptr<const CellGeometry> geo_;
  OracleDomain domain_;
  Fn fn_;
  std::string name_;
  std::shared_ptr<Memo> memo_;
};

/// Total phase function beta on site functionals.
class Coboundary {
 public:
  using Fn = std::function<Phase(const SiteFunctional&)>;

  Coboundary() : fn_([](const SiteFunctional&) { return Phase{}; }) {}
  explicit Coboundary(Fn fn, std::string name = "beta") : fn_(std::move(fn)), name_(std::move(name)) {}

  Phase operator()(const SiteFunctional& r) const { return fn_(r); }
  const std::string& name() const { return name_; }

  static Coboundary trivial() { return Coboundary(); }
  /// beta(R) = exp(i l(R)) with l linear in the coefficients.
  static Coboundary additive(const Universe& u, std::uint64_t seed);
  /// beta(R) = exp(i b(R,R)) with b a symmetric bilinear form on the coefficients.
  static Coboundary bilinear(const Universe& u, std::uint64_t seed);
  /// beta(R) from a keyed hash of the coefficients: no structure at all.
  static Coboundary generic(std::uint64_t seed);

  Coboundary operator*(const Coboundary& o) const;
  Coboundary inverse() const;

 private:
  Fn fn_;
  std::string name_ = "beta";
};

/// beta(P+N)^{-1} beta(N) beta(Q+N)^{-1} beta(P+Q+N); throws InadmissibleSum.
Phase delta_beta(const Coboundary& beta, const Universe& u, const SiteFunctional& n,
                 const SiteFunctional& p, const SiteFunctional& q);
/// exp(2i b(P,Q)) for the bilinear form behind Coboundary::bilinear(u, seed).
Phase bilinear_delta(const Universe& u, std::uint64_t seed, const SiteFunctional& p,
                     const SiteFunctional& q);

PhaseOracle coboundary_oracle(std::shared_ptr<const CellGeometry> geo, const Coboundary& beta,
                              OracleDomain domain);
/// Multiplies the value on one triple by exp(i angle).
PhaseOracle corrupted(const PhaseOracle& base, const Triple& t, double angle);
/// Multiplies every value by exp(i sum_cells P_c . Q_c): a term living on overlapping supports.
PhaseOracle with_overlap_term(const PhaseOracle& base, std::uint64_t weight);

struct IdentityReport {
  std::string identity;
  std::size_t checked = 0;
  double max_defect = 0.0;  // radians
  double max_error = 0.0;   // combined error bar of the configuration
  std::string worst;
  bool flagged = false;     // some defect exceeded tol + 3 * error
};

SiteFunctional random_functional(const Universe& u, const Region& cells, std::mt19937_64& rng,
                                 std::int64_t scale);
/// Triples with P succeeding Q; N random.
std::vector<Triple> random_ordered_triples(const CellGeometry& geo, std::uint64_t seed, int count);
/// Triples with disjoint, cell-separable supports of P and Q.
std::vector<Triple> random_disjoint_triples(const CellGeometry& geo, std::uint64_t seed, int count);

IdentityReport check_splitting(const PhaseOracle& oracle, const std::vector<Triple>& triples,
                             std::uint64_t seed, double tol = 0.0);
IdentityReport check_chain(const PhaseOracle& oracle, std::uint64_t seed, int count,
                             double tol = 0.0);
/// Splitting in the first argument and exchange of the second-argument pieces.
IdentityReport check_split_exchange(const PhaseOracle& extended, const std::vector<Triple>& triples,
                             std::uint64_t seed, double tol = 0.0);
IdentityReport check_symmetry(const PhaseOracle& extended, const std::vector<Triple>& triples,
                              double tol = 0.0);

struct ExtendOptions {
  int alternatives = 3;
  std::uint64_t seed = 7;
  double tol = 0.0;  // on top of 3x the combined error
};

/// Extension of a restricted (Ordered) oracle to disjoint supports by the symmetrizing
/// split P = P+ + P- and the covering product over pieces of Q. Every evaluation is
/// compared against `alternatives` random other splits/coverings (NotExtendable).
PhaseOracle extend_phase(const PhaseOracle& restricted, const ExtendOptions& opt = {});

struct RegionPair {
  Region r1;
  Region r2;
};

struct TrivializeOptions {
  int checks_per_pair = 12;
  int sweeps = 1;
  std::uint64_t seed = 11;
  double tol = 0.0;
};

struct PairResidual {
  std::size_t pair = 0;
  double max_angle = 0.0;
  double max_error = 0.0;
};

struct Trivialization {
  Coboundary beta;           // accumulated coboundary
  PhaseOracle residual;      // extended * delta(beta)^{-1}
  std::vector<PairResidual> residuals;  // after the last sweep
  std::vector<std::size_t> steps;       // pair index of every step, in order
};

/// Iterated construction beta(R) = alpha(chi0 R | chi1 R, chi2 R) over the listed pairs,
/// checking after each step that all pairs handled so far stay trivial (PersistenceFailure).
Trivialization trivialize(const PhaseOracle& extended, const std::vector<RegionPair>& pairs,
                          const TrivializeOptions& opt = {});

/// delta(gamma) for gamma = recovered / reference on random triples of random listed pairs.
IdentityReport gamma_check(const Coboundary& recovered, const Coboundary& reference,
                           const CellGeometry& geo, const std::vector<RegionPair>& pairs,
                           std::uint64_t seed, int count = 200);

/// Random triples with supp P in r1 and supp Q in r2; every other N reaches into both regions.
std::vector<Triple> pair_triples(const CellGeometry& geo, const RegionPair& pair, std::uint64_t seed,
                                 int count);

/// Maps site functionals onto lattice perturbations: one bump per cell, component 0 scales
/// the potential and component 1 the kinetic symbol.
struct CellEmbedding {
  LatticeSpec lattice;
  std::array<int, 2> cell_nodes{16, 4};  // (time, space) nodes per cell
  std::array<int, 2> origin{8, 2};       // node of the first cell center
  std::array<double, 2> radius{4.0, 2.0};
  SymbolCoefficients unit_kinetic;
  double unit_potential = 0.3;
  double scale = 1.0 / (1 << 20);

  KineticPerturbation perturbation(const Universe& u, const SiteFunctional& s) const;
};

/// Restricted oracle backed by measured implementer phases; the error bar of every value is
/// its truncation error. With a `log_path`, logged phases at the same cutoff are replayed
/// and new measurements are appended.
PhaseOracle measured_oracle(std::shared_ptr<const CellGeometry> geo, CellEmbedding emb,
                            std::shared_ptr<ImplementerCache> cache, AlphaOptions opt,
                            std::string log_path = {});

}  // namespace causalfield
