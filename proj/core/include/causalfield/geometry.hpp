#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causalfield/grid.hpp"

namespace causalfield {

/// Flat background: metric diag(1,-1,...), mass, dimension.
struct MinkowskiSpec {
  int d = 2;
  double mass = 1.0;
};

/// Coefficients of the principal-symbol perturbation at one point.
/// Spatial block is given as p^{ij} (the symbol block is -P with P = -p^{ij}).
struct SymbolCoefficients {
  double p00 = 0.0;
  std::array<double, 2> p0i{0.0, 0.0};
  std::array<double, 3> pij{0.0, 0.0, 0.0};  // (11, 12, 22)
  double q = 0.0;

  SymbolCoefficients operator*(double s) const;
  SymbolCoefficients operator+(const SymbolCoefficients& o) const;
};

/// Smooth compactly supported product of one-dimensional mollifiers
/// exp(-sharpness r^2/(1-r^2)) along each axis; centers and radii are in node units.
struct BumpTemplate {
  std::array<double, 3> center{0, 0, 0};  // (t, x, y)
  std::array<double, 3> radius{4, 4, 4};
  double sharpness = 8.0;

  double operator()(double t, double x, double y) const;
  Box node_box(const LatticeSpec& spec) const;
};

/// Compactly supported coefficient fields p^{mu nu}(x) and q(x) sampled on nodes.
/// Only the upper triangle of p is stored, so symmetry holds by construction.
class KineticPerturbation {
 public:
  KineticPerturbation() = default;
  explicit KineticPerturbation(const LatticeSpec& spec);

  const LatticeSpec& spec() const { return spec_; }
  int components() const { return static_cast<int>(p_.size()); }

  /// Upper-triangle slot for (mu, nu) in row-major order.
  static int slot(int d, int mu, int nu);

  double p(int mu, int nu, std::size_t node) const { return p_[slot(spec_.d, mu, nu)][node]; }
  double q(std::size_t node) const { return q_[node]; }
  SymbolCoefficients at(std::size_t node) const;
  void set(std::size_t node, const SymbolCoefficients& c);

  std::vector<double>& component(int mu, int nu) { return p_[slot(spec_.d, mu, nu)]; }
  const std::vector<double>& component(int mu, int nu) const { return p_[slot(spec_.d, mu, nu)]; }
  std::vector<double>& potential() { return q_; }
  const std::vector<double>& potential() const { return q_; }

  /// Adds coefficients * template(node) on the template's node box.
  KineticPerturbation& add_bump(const SymbolCoefficients& coeffs, const BumpTemplate& bump);

  bool is_zero() const;
  bool has_mixed_terms() const;
  /// Box of nodes carrying a nonzero coefficient.
  Box support() const;
  /// Nodes carrying a nonzero coefficient as a boolean mask.
  std::vector<std::uint8_t> support_mask() const;
  /// max |grad p| * dx over all components, using neighbor differences.
  double max_gradient_step() const;

  KineticPerturbation& operator+=(const KineticPerturbation& o);
  KineticPerturbation& operator*=(double s);
  friend KineticPerturbation operator+(KineticPerturbation a, const KineticPerturbation& b) {
    return a += b;
  }
  friend KineticPerturbation operator*(double s, KineticPerturbation a) { return a *= s; }
  /// Pointwise product with a weight field (partition-of-unity splitting).
  KineticPerturbation weighted(const std::vector<double>& chi) const;

  bool operator==(const KineticPerturbation&) const = default;

 private:
  LatticeSpec spec_{};
  std::vector<std::vector<double>> p_;
  std::vector<double> q_;
};

/// Quadratic-in-field functional c + <f, phi> + P[phi].
struct GeneralFunctional {
  double c = 0.0;
  LatticeField f;
  KineticPerturbation quad;
};

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

/// Time/space split of a metric g and of its inverse at one point:
///   g = [[g00, gvec^T], [gvec, -G]],  g^{-1} = [[g00inv, h^T], [h, -H]].
struct PointMetric {
  double g00 = 1.0;
  SmallVector gvec;
  SmallMatrix G;
  double g00inv = 1.0;
  SmallVector h;
  SmallMatrix H;

  /// Block inverse by the closed-form expressions; G must be positive definite.
  static PointMetric from_metric(const SmallMatrix& g);
  SmallMatrix metric() const;
  SmallMatrix inverse() const;
};

struct MetricBlocks {
  LatticeSpec spec;
  std::vector<PointMetric> points;
  /// True when d == 2 and only the conformal class (eta+p)^{-1} is represented.
  bool conformal_only = false;
};

struct AdmissibilityReport {
  bool pass = false;
  double epsilon = 0.0;  // tightest epsilon in (0,1] for which the class bounds hold
  std::size_t worst_node = 0;
};

/// Compact convex class of principal symbols with its dominating light speed.
struct AdmissibilityClass {
  double epsilon = 1.0;
  double c = 1.0 + 1.4142135623730951;

  static AdmissibilityClass from_epsilon(double epsilon);
  /// Light speed (sqrt(2)+1) / epsilon^2 of the dominating Minkowski-type cone.
  static double light_speed(double epsilon);
  bool contains(const SymbolCoefficients& c, int d) const;
};

/// Principal symbol eta + p at a point, as a d x d matrix.
SmallMatrix principal_symbol(const SymbolCoefficients& c, int d);
/// Pointwise admissibility bounds for one coefficient set.
double pointwise_epsilon(const SymbolCoefficients& c, int d);

AdmissibilityReport check_admissible(const KineticPerturbation& pert);
MetricBlocks metric_from_perturbation(const KineticPerturbation& pert);
/// Metric at one point (normalized for d > 2, conformal representative for d == 2).
PointMetric point_metric(const SymbolCoefficients& c, int d);
/// Light speed bound of one point metric.
double point_light_speed(const PointMetric& m);
/// Per-node light speed bound as a field.
LatticeField light_speed_bound(const MetricBlocks& blocks);
/// Smallest null speed over spatial directions (sampled on a fine circle when d == 3).
double point_min_null_speed(const PointMetric& m);
/// Largest root s of g(v,v)=0 along v=(1, s n) for a unit spatial direction n.
double null_speed_along(const PointMetric& m, const SmallVector& direction);

/// Boolean node mask over the lattice window.
class Region {
 public:
  Region() = default;
  explicit Region(const LatticeSpec& spec) : spec_(spec), mask_(spec.size(), 0) {}
  Region(const LatticeSpec& spec, std::vector<std::uint8_t> mask);
  static Region from_box(const LatticeSpec& spec, const Box& box);
  static Region support_of(const LatticeField& f);
  static Region support_of(const KineticPerturbation& p);
  /// Nodes on which the operator difference (K+P)-K can act: support dilated by one node.
  static Region operator_support_of(const KineticPerturbation& p);

  const LatticeSpec& spec() const { return spec_; }
  bool contains(std::size_t node) const { return mask_[node] != 0; }
  void insert(std::size_t node) { mask_[node] = 1; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  Box bounding_box() const;

  Region dilated(int r) const;
  Region operator|(const Region& o) const;
  Region operator&(const Region& o) const;
  Region operator~() const;
  bool intersects(const Region& o) const;
  bool subset_of(const Region& o) const;
  bool operator==(const Region&) const = default;

 private:
  LatticeSpec spec_{};
  std::vector<std::uint8_t> mask_;
};

enum class ConeDirection { Future, Past };
enum class ConeMode { Over, Under };

/// Per-node bounds on the coordinate speed of light: every null direction has
/// |v| <= upper, and the cone contains the ball of radius lower.
struct ConeSpeeds {
  LatticeField upper;
  LatticeField lower;
};

/// Flat cone of speed c on every node.
ConeSpeeds flat_speed(const LatticeSpec& spec, double c);
/// Speeds of the metric cones; upper is the light speed bound.
ConeSpeeds cone_speeds(const MetricBlocks& blocks);
/// Speeds induced by a perturbation N (flat speed 1 where N vanishes).
ConeSpeeds cone_speeds(const KineticPerturbation& n);

/// Lattice approximation of the causal future/past of a region.
/// Both modes propagate an accumulated speed budget along time steps.
/// Over: Chebyshev moves, one node of slack, neighborhood-maximal upper speed (superset).
/// Under: taxicab moves, no slack, neighborhood-minimal lower speed (subset).
/// Throws WindowOverflow when a non-periodic cone reaches a spatial edge.
Region causal_cone(const Region& region, const ConeSpeeds& speeds, ConeDirection dir,
                   ConeMode mode);
Region causal_cone(const Region& region, const MetricBlocks& blocks, ConeDirection dir,
                   ConeMode mode);

enum class Relation { Succeeds, Preceded, Spacelike, Entangled };
const char* to_string(Relation r);

/// Certified causal relation of P relative to Q for the given cones.
Relation relation(const Region& p, const Region& q, const ConeSpeeds& speeds);
Relation relation(const Region& p, const Region& q, const MetricBlocks& n_blocks);
/// True iff P succeeds Q: P does not meet the over-approximated past of Q.
bool succeeds(const Region& p, const Region& q, const ConeSpeeds& speeds);
/// True iff P meets neither the over-approximated past nor future of Q.
bool spacelike(const Region& p, const Region& q, const ConeSpeeds& speeds);

}  // namespace causalfield
