#include "causalfield/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "causalfield/error.hpp"

namespace causalfield {

void LatticeSpec::validate() const {
  if (d != 2 && d != 3) throw Error(ErrorCode::ConfigError, "dimension must be 2 or 3");
  if (nt < 8 || nx() < 8 || (d == 3 && ny() < 8))
    throw Error(ErrorCode::MarginViolation, "all extents must be at least 8");
  if (!(dx > 0) || !(dt > 0)) throw Error(ErrorCode::ConfigError, "spacings must be positive");
  if (!(c_max > 0)) throw Error(ErrorCode::ConfigError, "c_max must be positive");
  const double limit = dx / (c_max * std::sqrt(static_cast<double>(d - 1)));
  if (dt > limit * (1.0 + 1e-12))
    throw Error(ErrorCode::CFLViolation,
                "dt=" + std::to_string(dt) + " exceeds dx/(c_max sqrt(d-1))=" + std::to_string(limit));
}

double LatticeSpec::cfl_time_step(int d, double dx, double c_max, double cfl) {
  return cfl * dx / (c_max * std::sqrt(static_cast<double>(d - 1)));
}

Box Box::hull(const Box& a, const Box& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Box r;
  for (int k = 0; k < 3; ++k) {
    r.lo[k] = std::min(a.lo[k], b.lo[k]);
    r.hi[k] = std::max(a.hi[k], b.hi[k]);
  }
  return r;
}

Box Box::dilated(int r, const LatticeSpec& spec) const {
  if (empty()) return *this;
  const std::array<int, 3> ext{spec.nt, spec.nx(), spec.ny()};
  Box b;
  for (int k = 0; k < 3; ++k) {
    const int rr = (k == 2 && spec.d == 2) ? 0 : r;
    b.lo[k] = std::max(0, lo[k] - rr);
    b.hi[k] = std::min(ext[k], hi[k] + rr);
  }
  return b;
}

LatticeField::LatticeField(const LatticeSpec& spec, std::vector<double> data)
    : spec_(spec), data_(std::move(data)) {
  if (data_.size() != spec_.size())
    throw Error(ErrorCode::FormatError, "field size does not match lattice");
}

Box LatticeField::support() const {
  Box b{{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
         std::numeric_limits<int>::max()},
        {0, 0, 0}};
  bool any = false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] == 0.0) continue;
    any = true;
    const auto c = spec_.coords(i);
    for (int k = 0; k < 3; ++k) {
      b.lo[k] = std::min(b.lo[k], c[k]);
      b.hi[k] = std::max(b.hi[k], c[k] + 1);
    }
  }
  return any ? b : Box{};
}

bool LatticeField::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

LatticeField& LatticeField::operator+=(const LatticeField& o) {
  if (data_.empty()) return *this = o;
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

LatticeField& LatticeField::operator-=(const LatticeField& o) {
  if (data_.empty()) {
    *this = o;
    return *this *= -1.0;
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

LatticeField& LatticeField::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double inner(const LatticeField& f, const LatticeField& g) {
  double s = 0.0;
  const auto a = f.data();
  const auto b = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * f.spec().cell_volume();
}

double norm(const LatticeField& f) { return std::sqrt(inner(f, f)); }

double relative_difference(const LatticeField& a, const LatticeField& b, double floor) {
  return norm(a - b) / std::max(norm(b), floor);
}

}  // namespace causalfield
