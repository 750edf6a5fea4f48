#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace causalfield {

/// Discretized spacetime window: time index 0..nt-1, up to two spatial axes.
/// Nodes are stored row-major with time slowest: ((t * ny) + y) * nx + x.
struct LatticeSpec {
  int d = 2;                   // spacetime dimension, 2 or 3
  int nt = 64;                 // time nodes
  std::array<int, 2> ns{64, 1};  // spatial nodes (ns[1] == 1 when d == 2)
  double dx = 0.1;
  double dt = 0.1;
  double mass = 1.0;
  double c_max = 1.0;  // largest admissible light speed; CFL is checked against it
  bool periodic = true;

  int nx() const { return ns[0]; }
  int ny() const { return d == 3 ? ns[1] : 1; }
  int spatial_dims() const { return d - 1; }
  std::size_t slice_size() const { return static_cast<std::size_t>(nx()) * ny(); }
  std::size_t size() const { return slice_size() * static_cast<std::size_t>(nt); }
  double cell_volume() const { return d == 3 ? dx * dx * dt : dx * dt; }
  double spatial_volume() const { return d == 3 ? dx * dx : dx; }

  std::size_t index(int t, int x, int y = 0) const {
    return (static_cast<std::size_t>(t) * ny() + y) * nx() + x;
  }
  std::array<int, 3> coords(std::size_t i) const {
    const auto s = slice_size();
    const int t = static_cast<int>(i / s);
    const auto r = i % s;
    return {t, static_cast<int>(r % nx()), static_cast<int>(r / nx())};
  }

  /// Wraps (periodic) or rejects (returns -1) a spatial coordinate.
  int wrap_x(int x) const { return wrap(x, nx()); }
  int wrap_y(int y) const { return wrap(y, ny()); }

  /// Throws MarginViolation / CFLViolation when the spec is unusable.
  void validate() const;

  /// Time step that saturates the CFL bound dt = cfl * dx / (c_max sqrt(d-1)).
  static double cfl_time_step(int d, double dx, double c_max, double cfl = 1.0);

  bool operator==(const LatticeSpec&) const = default;

 private:
  int wrap(int v, int n) const {
    if (v >= 0 && v < n) return v;
    if (!periodic) return -1;
    v %= n;
    return v < 0 ? v + n : v;
  }
};

/// Axis-aligned node box, inclusive lower and exclusive upper bounds (t, x, y).
struct Box {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};

  bool empty() const { return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]; }
  bool contains(int t, int x, int y) const {
    return t >= lo[0] && t < hi[0] && x >= lo[1] && x < hi[1] && y >= lo[2] && y < hi[2];
  }
  static Box hull(const Box& a, const Box& b);
  Box dilated(int r, const LatticeSpec& spec) const;
  bool operator==(const Box&) const = default;
};

/// Real scalar field sampled on every node of the window.
class LatticeField {
 public:
  LatticeField() = default;
  explicit LatticeField(const LatticeSpec& spec) : spec_(spec), data_(spec.size(), 0.0) {}
  LatticeField(const LatticeSpec& spec, std::vector<double> data);

  const LatticeSpec& spec() const { return spec_; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(int t, int x, int y = 0) { return data_[spec_.index(t, x, y)]; }
  double at(int t, int x, int y = 0) const { return data_[spec_.index(t, x, y)]; }

  /// Smallest box holding every nonzero node; empty box for the zero field.
  Box support() const;
  bool is_zero() const;
  std::span<double> slice(int t) {
    return std::span<double>(data_).subspan(spec_.slice_size() * t, spec_.slice_size());
  }
  std::span<const double> slice(int t) const {
    return std::span<const double>(data_).subspan(spec_.slice_size() * t, spec_.slice_size());
  }

  LatticeField& operator+=(const LatticeField& o);
  LatticeField& operator-=(const LatticeField& o);
  LatticeField& operator*=(double s);
  friend LatticeField operator+(LatticeField a, const LatticeField& b) { return a += b; }
  friend LatticeField operator-(LatticeField a, const LatticeField& b) { return a -= b; }
  friend LatticeField operator*(double s, LatticeField a) { return a *= s; }
  LatticeField operator-() const { return -1.0 * *this; }

 private:
  LatticeSpec spec_{};
  std::vector<double> data_;
};

/// Spacetime quadrature <f,g> = sum f g dx^{d-1} dt.
double inner(const LatticeField& f, const LatticeField& g);
/// L2 norm induced by inner().
double norm(const LatticeField& f);
/// Max relative deviation ||a-b|| / max(||b||, floor).
double relative_difference(const LatticeField& a, const LatticeField& b, double floor = 1e-300);

}  // namespace causalfield
