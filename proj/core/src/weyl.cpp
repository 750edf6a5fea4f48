#include "causalfield/weyl.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "causalfield/error.hpp"

namespace causalfield {

namespace {

constexpr cplx kI{0.0, 1.0};

double vec_max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void require_same(const LatticeSpec& a, const LatticeSpec& b) {
  if (!(a == b)) throw Error(ErrorCode::ConfigError, "solution classes live on different lattices");
}

/// exp(c G) psi by Taylor series on `steps` substeps.
template <class Apply>
Eigen::VectorXcd taylor_exp(Apply&& apply, cplx c, double norm_estimate, const Eigen::VectorXcd& psi) {
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(c) * norm_estimate)));
  const cplx cs = c / static_cast<double>(steps);
  Eigen::VectorXcd out = psi;
  Eigen::VectorXcd term(psi.size());
  Eigen::VectorXcd next(psi.size());
  for (int s = 0; s < steps; ++s) {
    term = out;
    const double ref = std::max(out.norm(), 1e-300);
    for (int k = 1; k <= 80; ++k) {
      apply(term, next);
      term = next * (cs / static_cast<double>(k));
      out += term;
      if (term.norm() < 1e-17 * ref) break;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Solution classes

SolutionClass SolutionClass::zero(const LatticeSpec& spec) {
  return {spec, std::vector<double>(spec.slice_size(), 0.0), std::vector<double>(spec.slice_size(), 0.0)};
}

SolutionClass SolutionClass::of(const GreenSolver& free, const LatticeField& f) {
  return from_solution(free.apply(GreenKind::Commutator, f));
}

SolutionClass SolutionClass::from_solution(const LatticeField& u) {
  const auto s0 = u.slice(0);
  const auto s1 = u.slice(1);
  return {u.spec(), {s0.begin(), s0.end()}, {s1.begin(), s1.end()}};
}

LatticeField SolutionClass::evolve() const {
  const WaveOperator op(spec);
  LatticeField u(spec);
  std::copy(u0.begin(), u0.end(), u.slice(0).begin());
  std::copy(u1.begin(), u1.end(), u.slice(1).begin());
  std::vector<double> r(spec.slice_size());
  for (int t = 1; t + 1 < spec.nt; ++t) {
    op.apply_row(u, t, r);
    const auto diag = op.forward_diagonal(t);
    auto next = u.slice(t + 1);
    for (std::size_t i = 0; i < r.size(); ++i) next[i] = -r[i] / diag[i];
  }
  return u;
}

double SolutionClass::max_abs() const { return std::max(vec_max_abs(u0), vec_max_abs(u1)); }

SolutionClass& SolutionClass::operator+=(const SolutionClass& o) {
  if (u0.empty()) return *this = o;
  if (o.u0.empty()) return *this;
  require_same(spec, o.spec);
  for (std::size_t i = 0; i < u0.size(); ++i) {
    u0[i] += o.u0[i];
    u1[i] += o.u1[i];
  }
  return *this;
}

SolutionClass& SolutionClass::operator*=(double s) {
  for (auto& v : u0) v *= s;
  for (auto& v : u1) v *= s;
  return *this;
}

double symplectic_form(const SolutionClass& a, const SolutionClass& b) {
  if (a.u0.empty() || b.u0.empty()) return 0.0;
  require_same(a.spec, b.spec);
  double s = 0.0;
  for (std::size_t i = 0; i < a.u0.size(); ++i) s += a.u0[i] * b.u1[i] - a.u1[i] * b.u0[i];
  return s * a.spec.spatial_volume() / a.spec.dt;
}

// ---------------------------------------------------------------------------
// One-particle space

OneParticleSpace::OneParticleSpace(const LatticeSpec& spec) : spec_(spec), free_(spec) {
  if (!spec.periodic) throw Error(ErrorCode::ConfigError, "mode basis needs a periodic slice");
  const int nx = spec.nx();
  const int ny = spec.ny();
  const std::size_t L = spec.slice_size();
  theta_.resize(L);
  scale_.resize(L);
  partner_.resize(L);
  dft_.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
  const double two_pi = 2.0 * std::numbers::pi;
  for (int jy = 0; jy < ny; ++jy)
    for (int jx = 0; jx < nx; ++jx) {
      const std::size_t k = static_cast<std::size_t>(jy) * nx + jx;
      const double kx = two_pi * jx / (nx * spec.dx);
      const double ky = spec.d == 3 ? two_pi * jy / (ny * spec.dx) : 0.0;
      double omega2 = spec.mass * spec.mass;
      omega2 += std::pow(2.0 / spec.dx * std::sin(0.5 * kx * spec.dx), 2);
      if (spec.d == 3) omega2 += std::pow(2.0 / spec.dx * std::sin(0.5 * ky * spec.dx), 2);
      const double arg = 0.5 * spec.dt * std::sqrt(omega2);
      if (arg >= 1.0 || omega2 <= 0.0)
        throw Error(ErrorCode::CFLViolation, "mode frequency outside the leapfrog stability range");
      theta_[k] = 2.0 * std::asin(arg);
      scale_[k] = std::sqrt(4.0 * spec.spatial_volume() * std::sin(theta_[k]) / (spec.dt * L));
      partner_[k] = static_cast<int>(((ny - jy) % ny) * nx + (nx - jx) % nx);
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
          const double ph = kx * x * spec.dx + ky * y * spec.dx;
          dft_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(static_cast<std::size_t>(y) * nx + x)) =
              std::polar(1.0, -ph);
        }
    }
}

Eigen::VectorXcd OneParticleSpace::amplitudes(const SolutionClass& u) const {
  require_same(spec_, u.spec);
  const auto n = static_cast<Eigen::Index>(u.u0.size());
  const Eigen::VectorXcd f0 = dft_ * Eigen::Map<const Eigen::VectorXd>(u.u0.data(), n).cast<cplx>();
  const Eigen::VectorXcd f1 = dft_ * Eigen::Map<const Eigen::VectorXd>(u.u1.data(), n).cast<cplx>();
  Eigen::VectorXcd a(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double th = theta_[static_cast<std::size_t>(k)];
    a[k] = scale_[static_cast<std::size_t>(k)] * (f0[k] * std::polar(1.0, th) - f1[k]) /
           (2.0 * kI * std::sin(th));
  }
  return a;
}

SolutionClass OneParticleSpace::from_amplitudes(const Eigen::VectorXcd& a) const {
  const auto n = static_cast<Eigen::Index>(theta_.size());
  if (a.size() != n) throw Error(ErrorCode::ConfigError, "amplitude vector has the wrong length");
  Eigen::VectorXcd f0(n);
  Eigen::VectorXcd f1(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double th = theta_[ku];
    const cplx A = a[k] / scale_[ku];
    const cplx Bc = std::conj(a[partner_[ku]] / scale_[static_cast<std::size_t>(partner_[ku])]);
    f0[k] = A + Bc;
    f1[k] = A * std::polar(1.0, -th) + Bc * std::polar(1.0, th);
  }
  const Eigen::VectorXcd u0 = dft_.adjoint() * f0 / static_cast<double>(n);
  const Eigen::VectorXcd u1 = dft_.adjoint() * f1 / static_cast<double>(n);
  SolutionClass out = SolutionClass::zero(spec_);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.u0[static_cast<std::size_t>(i)] = u0[i].real();
    out.u1[static_cast<std::size_t>(i)] = u1[i].real();
  }
  return out;
}

cplx OneParticleSpace::scalar_product(const SolutionClass& a, const SolutionClass& b) const {
  return amplitudes(a).dot(amplitudes(b));
}

LatticeField OneParticleSpace::source_for(const SolutionClass& u, int t0) const {
  if (t0 < 1 || t0 + 2 >= spec_.nt) throw Error(ErrorCode::MarginViolation, "cutoff rows outside the window");
  LatticeField v = u.evolve();
  for (int t = 0; t <= t0; ++t)
    for (auto& x : v.slice(t)) x = 0.0;
  LatticeField f(spec_);
  for (int t : {t0, t0 + 1}) free_.apply_row(v, t, f.slice(t));
  return f;
}

// ---------------------------------------------------------------------------
// Weyl elements and phases

WeylElement weyl_element(const GreenSolver& free, const LatticeField& f) {
  return {0.0, SolutionClass::of(free, f)};
}

WeylElement weyl_product(const WeylElement& a, const WeylElement& b) {
  return {a.angle + b.angle - 0.5 * symplectic_form(a.cls, b.cls), a.cls + b.cls};
}

WeylElement weyl_inverse(const WeylElement& a) { return {-a.angle, -1.0 * a.cls}; }

WeylElement perturbed_weyl(const KineticPerturbation& p, const LatticeField& f) {
  const GreenSolver free(p.spec());
  if (p.is_zero()) return weyl_element(free, f);
  const GreenSolver gp(p);
  const WaveOperator pp(p, WaveOperator::Part::Perturbation);
  // K Delta_A^P f = f - P Delta_A^P f on every enforced row
  const LatticeField h = f - pp.apply(gp.advanced(f));
  return weyl_element(free, h);
}

ExtendedPhase extended_S_phase(double c, const LatticeField& f, const KineticPerturbation& p,
                               const LatticeField& g) {
  const GreenSolver gp = p.is_zero() ? GreenSolver(p.spec()) : GreenSolver(p);
  ExtendedPhase out;
  out.prefactor_angle = c - 0.5 * inner(f, gp.apply(GreenKind::Dirac, f));
  out.causal_angle = g.is_zero() ? 0.0 : inner(f, gp.advanced(g));
  return out;
}

// ---------------------------------------------------------------------------
// Bogoliubov blocks

Bogoliubov Bogoliubov::from_real(const Eigen::MatrixXd& r) {
  const Eigen::Index m = r.rows() / 2;
  const auto r11 = r.topLeftCorner(m, m);
  const auto r12 = r.topRightCorner(m, m);
  const auto r21 = r.bottomLeftCorner(m, m);
  const auto r22 = r.bottomRightCorner(m, m);
  Bogoliubov b;
  b.real = r;
  b.A = 0.5 * ((r11 + r22).cast<cplx>() + kI * (r21 - r12).cast<cplx>());
  b.B = 0.5 * ((r11 - r22).cast<cplx>() + kI * (r21 + r12).cast<cplx>());
  return b;
}

Bogoliubov Bogoliubov::identity(int modes) {
  return from_real(Eigen::MatrixXd::Identity(2 * modes, 2 * modes));
}

double Bogoliubov::symplectic_defect() const {
  const auto m = A.rows();
  return (A.adjoint() * A - B.transpose() * B.conjugate() - Eigen::MatrixXcd::Identity(m, m)).norm();
}

double Bogoliubov::symmetry_defect() const {
  const Eigen::MatrixXcd s = A.adjoint() * B;
  return (s - s.transpose()).norm();
}

Bogoliubov mode_matrix(const ScatteringMap& map, const OneParticleSpace& space) {
  const int m = space.modes();
  if (map.trivial()) return Bogoliubov::identity(m);
  Eigen::MatrixXd r(2 * m, 2 * m);
  for (int k = 0; k < m; ++k)
    for (int part = 0; part < 2; ++part) {
      Eigen::VectorXcd a = Eigen::VectorXcd::Zero(m);
      a[k] = part == 0 ? cplx{1.0, 0.0} : kI;
      const LatticeField f = space.source_for(space.from_amplitudes(a));
      const Eigen::VectorXcd b = space.amplitudes(SolutionClass::of(map.free_solver(), map.apply(f)));
      const int col = k + part * m;
      r.col(col).head(m) = b.real();
      r.col(col).tail(m) = b.imag();
    }
  return Bogoliubov::from_real(r);
}

// ---------------------------------------------------------------------------
// Fock space

FockSpace::FockSpace(int modes, int n_max) : modes_(modes), n_max_(n_max) {
  if (modes < 1 || n_max < 0) throw Error(ErrorCode::ConfigError, "empty Fock space");
  count_.assign(static_cast<std::size_t>(modes) + 1, std::vector<std::size_t>(static_cast<std::size_t>(n_max) + 1, 1));
  for (int m = 1; m <= modes; ++m)
    for (int n = 1; n <= n_max; ++n) count_[m][n] = count_[m - 1][n] + count_[m][n - 1];
  dim_ = count_[modes][n_max];
  if (dim_ > static_cast<std::size_t>(INT32_MAX))
    throw Error(ErrorCode::ConfigError, "Fock space too large");
  const auto M = static_cast<std::size_t>(modes);
  occ_.assign(dim_ * M, 0);
  total_.assign(dim_, 0);
  // lexicographic enumeration with the first mode most significant
  std::vector<int> occ(M, 0);
  std::size_t idx = 0;
  int used = 0;
  while (true) {
    for (std::size_t i = 0; i < M; ++i) occ_[idx * M + i] = static_cast<std::uint8_t>(occ[i]);
    total_[idx] = used;
    ++idx;
    if (used < n_max) {
      ++occ[M - 1];
      ++used;
      continue;
    }
    // full: clear the last nonzero mode and carry into its predecessor
    std::size_t j = M - 1;
    while (occ[j] == 0) --j;
    if (j == 0) break;
    used -= occ[j] - 1;
    occ[j] = 0;
    ++occ[j - 1];
  }
  up_.assign(dim_ * M, -1);
  down_.assign(dim_ * M, -1);
  for (std::size_t s = 0; s < dim_; ++s) {
    std::vector<int> o = occupations(s);
    for (std::size_t i = 0; i < M; ++i) {
      if (total_[s] < n_max) {
        ++o[i];
        up_[s * M + i] = static_cast<std::int32_t>(rank(o));
        --o[i];
      }
      if (o[i] > 0) {
        --o[i];
        down_[s * M + i] = static_cast<std::int32_t>(rank(o));
        ++o[i];
      }
    }
  }
}

std::size_t FockSpace::rank(const std::vector<int>& occ) const {
  std::size_t r = 0;
  int rem = n_max_;
  for (int i = 0; i < modes_; ++i) {
    const int o = occ[static_cast<std::size_t>(i)];
    for (int v = 0; v < o; ++v) r += count_[static_cast<std::size_t>(modes_ - i - 1)][static_cast<std::size_t>(rem - v)];
    rem -= o;
  }
  return r;
}

std::vector<int> FockSpace::occupations(std::size_t state) const {
  const auto M = static_cast<std::size_t>(modes_);
  std::vector<int> o(M);
  for (std::size_t i = 0; i < M; ++i) o[i] = occ_[state * M + i];
  return o;
}

Eigen::VectorXcd FockSpace::vacuum() const {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim_));
  v[0] = 1.0;
  return v;
}

double FockSpace::top_shell_weight(const Eigen::VectorXcd& psi) const {
  double w = 0.0;
  for (std::size_t s = 0; s < dim_; ++s)
    if (total_[s] == n_max_) w += std::norm(psi[static_cast<Eigen::Index>(s)]);
  return w;
}

void FockSpace::apply_quadratic(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& g,
                                const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
  const auto M = static_cast<std::size_t>(modes_);
  out.setZero(static_cast<Eigen::Index>(dim_));
  std::vector<double> sq(static_cast<std::size_t>(n_max_) + 3);
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::sqrt(static_cast<double>(i));
  for (std::size_t s = 0; s < dim_; ++s) {
    const cplx x = in[static_cast<Eigen::Index>(s)];
    if (x == 0.0) continue;
    const std::uint8_t* o = &occ_[s * M];
    for (std::size_t j = 0; j < M; ++j) {
      if (o[j] == 0) continue;
      const std::size_t d = static_cast<std::size_t>(down_[s * M + j]);
      const cplx xj = x * sq[o[j]];
      for (std::size_t i = 0; i < M; ++i) {
        const int ni = o[i] - (i == j ? 1 : 0);
        const auto t = static_cast<Eigen::Index>(up_[d * M + i]);
        out[t] += h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * xj * sq[static_cast<std::size_t>(ni + 1)];
      }
      // pair annihilation a_i a_j, i <= j
      for (std::size_t i = 0; i <= j; ++i) {
        const int ni = o[i] - (i == j ? 1 : 0);
        if (ni <= 0) continue;
        const auto t = static_cast<Eigen::Index>(down_[d * M + i]);
        const double w = i == j ? 0.5 : 1.0;
        out[t] += w * std::conj(g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) * xj *
                  sq[static_cast<std::size_t>(ni)];
      }
    }
    if (total_[s] + 2 <= n_max_) {
      for (std::size_t j = 0; j < M; ++j) {
        const std::size_t u1 = static_cast<std::size_t>(up_[s * M + j]);
        const cplx xj = x * sq[static_cast<std::size_t>(o[j] + 1)];
        for (std::size_t i = 0; i <= j; ++i) {
          const int ni = o[i] + (i == j ? 1 : 0);
          const auto t = static_cast<Eigen::Index>(up_[u1 * M + i]);
          const double w = i == j ? 0.5 : 1.0;
          out[t] += w * g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * xj *
                    sq[static_cast<std::size_t>(ni + 1)];
        }
      }
    }
  }
}

void FockSpace::apply_field(const Eigen::VectorXcd& a, const Eigen::VectorXcd& in,
                            Eigen::VectorXcd& out) const {
  const auto M = static_cast<std::size_t>(modes_);
  out.setZero(static_cast<Eigen::Index>(dim_));
  const double r2 = 1.0 / std::sqrt(2.0);
  for (std::size_t s = 0; s < dim_; ++s) {
    const cplx x = in[static_cast<Eigen::Index>(s)];
    if (x == 0.0) continue;
    const std::uint8_t* o = &occ_[s * M];
    for (std::size_t k = 0; k < M; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (o[k] > 0)
        out[down_[s * M + k]] += std::conj(a[kk]) * std::sqrt(static_cast<double>(o[k])) * x * r2;
      if (total_[s] < n_max_)
        out[up_[s * M + k]] += a[kk] * std::sqrt(static_cast<double>(o[k] + 1)) * x * r2;
    }
  }
}

Eigen::MatrixXcd FockSpace::dense_quadratic(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& g) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXcd out(n, n);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd col(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    e.setZero();
    e[s] = 1.0;
    apply_quadratic(h, g, e, col);
    out.col(s) = col;
  }
  return out;
}

Eigen::VectorXcd apply_weyl(const FockSpace& fock, const Eigen::VectorXcd& a, const Eigen::VectorXcd& psi) {
  const double est = a.norm() * std::sqrt(2.0 * (fock.n_max() + 1));
  return taylor_exp([&](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { fock.apply_field(a, in, out); },
                    kI, est, psi);
}

// ---------------------------------------------------------------------------
// Gaussian implementers

GaussianImplementer::GaussianImplementer(Bogoliubov t, std::shared_ptr<const FockSpace> fock)
    : t_(std::move(t)), fock_(std::move(fock)) {
  const int m = fock_->modes();
  if (t_.A.rows() != m) throw Error(ErrorCode::ConfigError, "mode count differs from the Fock space");
  h_ = Eigen::MatrixXcd::Zero(m, m);
  g_ = Eigen::MatrixXcd::Zero(m, m);
  if (!t_.real.isIdentity(0.0)) {
    // generator X with exp(X) = T; a -> C a + D conj(a) gives h = iC, g = -iD
    const Eigen::MatrixXd x = t_.real.log();
    const Bogoliubov gen = Bogoliubov::from_real(x);
    h_ = kI * gen.A;
    g_ = -kI * gen.B;
    h_ = 0.5 * (h_ + h_.adjoint()).eval();
    g_ = 0.5 * (g_ + g_.transpose()).eval();
  }
  const Eigen::VectorXcd s0 = evolve(fock_->vacuum(), -1.0);
  overlap_ = std::abs(s0[0]);
  tail_ = fock_->top_shell_weight(s0);
  if (overlap_ > 1e-12) {
    gauge_ = std::arg(s0[0]);
  } else {
    fallback_ = true;
    for (Eigen::Index i = 0; i < s0.size(); ++i)
      if (std::abs(s0[i]) > 1e-12) {
        gauge_ = std::arg(s0[i]);
        break;
      }
  }
}

Eigen::VectorXcd GaussianImplementer::evolve(const Eigen::VectorXcd& psi, double sign) const {
  if (h_.isZero(0.0) && g_.isZero(0.0)) return psi;
  const double n = fock_->n_max();
  const double est = h_.norm() * n + g_.norm() * (n + 1.0);
  return taylor_exp(
      [&](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { fock_->apply_quadratic(h_, g_, in, out); },
      sign * kI, est, psi);
}

Eigen::VectorXcd GaussianImplementer::apply(const Eigen::VectorXcd& psi) const {
  return evolve(psi, -1.0) * std::polar(1.0, -gauge_);
}

Eigen::VectorXcd GaussianImplementer::apply_inverse(const Eigen::VectorXcd& psi) const {
  return evolve(psi, 1.0) * std::polar(1.0, gauge_);
}

double GaussianImplementer::unitarity_defect(const std::vector<Eigen::VectorXcd>& probes) const {
  double d = 0.0;
  for (const auto& p : probes) {
    const Eigen::VectorXcd s = apply(p);
    d = std::max(d, (apply_inverse(s) - p).norm());
    d = std::max(d, std::abs(s.norm() - p.norm()));
  }
  return d;
}

Eigen::MatrixXcd GaussianImplementer::dense() const {
  const Eigen::MatrixXcd H = fock_->dense_quadratic(h_, g_);
  const Eigen::MatrixXcd U = (-kI * H).exp();
  return U * std::polar(1.0, -gauge_);
}

GaussianImplementer build_implementer(const ScatteringMap& map, const ImplementerOptions& opt,
                                      std::shared_ptr<const FockSpace> fock) {
  const OneParticleSpace space(map.spec());
  if (space.modes() > 24 || opt.n_max > 8)
    throw Error(ErrorCode::ConfigError, "implementer exceeds the resource budget (modes <= 24, n_max <= 8)");
  Bogoliubov t = mode_matrix(map, space);
  const double sd = t.symplectic_defect();
  const double sy = t.symmetry_defect();
  if (sd > opt.bogoliubov_tol || sy > opt.bogoliubov_tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "symplectic defect %.3e, symmetry defect %.3e", sd, sy);
    throw Error(ErrorCode::BogoliubovViolation, buf);
  }
  if (!fock) fock = std::make_shared<const FockSpace>(space.modes(), opt.n_max);
  GaussianImplementer impl(std::move(t), std::move(fock));
  if (impl.vacuum_tail() > opt.tail_tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "vacuum image keeps weight %.3e in the top shell", impl.vacuum_tail());
    throw Error(ErrorCode::CutoffUnstable, buf);
  }
  return impl;
}

GaussianImplementer build_implementer(const KineticPerturbation& p, const ImplementerOptions& opt,
                                      SolverCache* cache) {
  return build_implementer(ScatteringMap(p, cache), opt);
}

std::vector<Eigen::VectorXcd> probe_states(const FockSpace& fock, std::uint64_t seed, int count) {
  std::vector<Eigen::VectorXcd> out;
  out.push_back(fock.vacuum());
  const int m = fock.modes();
  for (int k = 0; k < std::min(2, m) && static_cast<int>(out.size()) < count && fock.n_max() > 0; ++k) {
    std::vector<int> occ(static_cast<std::size_t>(m), 0);
    occ[static_cast<std::size_t>(k)] = 1;
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(fock.dim()));
    v[static_cast<Eigen::Index>(fock.rank(occ))] = 1.0;
    out.push_back(v);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXcd a(m);
    for (int k = 0; k < m; ++k) a[k] = cplx{nd(rng), nd(rng)};
    a *= 0.3 / a.norm();
    out.push_back(apply_weyl(fock, a, fock.vacuum()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache

ImplementerCache::ImplementerCache(std::string dir) : dir_(std::move(dir)) {}

std::string ImplementerCache::default_dir() {
  const char* v = std::getenv("CAUSALFIELD_CACHE");
  return v ? std::string(v) : std::string();
}

std::shared_ptr<const FockSpace> ImplementerCache::fock(int modes, int n_max) {
  auto& slot = spaces_[{modes, n_max}];
  if (!slot) slot = std::make_shared<const FockSpace>(modes, n_max);
  return slot;
}

std::shared_ptr<const GaussianImplementer> ImplementerCache::get(const KineticPerturbation& p,
                                                                 const ImplementerOptions& opt) {
  const std::uint64_t h = content_hash(p);
  std::lock_guard lock(mu_);
  auto it = items_.find({h, opt.n_max});
  if (it != items_.end()) return it->second;
  const OneParticleSpace space(p.spec());
  const int m = space.modes();
  if (m > 24 || opt.n_max > 8)
    throw Error(ErrorCode::ConfigError, "implementer exceeds the resource budget (modes <= 24, n_max <= 8)");
  std::string path;
  if (!dir_.empty()) {
    char name[96];
    std::snprintf(name, sizeof name, "impl-%016llx-m%d-n%d.bin", static_cast<unsigned long long>(h), m, opt.n_max);
    path = (std::filesystem::path(dir_) / name).string();
  }
  Eigen::MatrixXd r;
  Bogoliubov t;
  if (!path.empty() && load_mode_matrix(path, h, r)) {
    t = Bogoliubov::from_real(r);
    ++disk_hits_;
  } else {
    t = mode_matrix(ScatteringMap(p, &solvers_), space);
    if (!path.empty()) {
      std::filesystem::create_directories(dir_);
      save_mode_matrix(path, h, t.real);
    }
  }
  const double sd = t.symplectic_defect();
  const double sy = t.symmetry_defect();
  if (sd > opt.bogoliubov_tol || sy > opt.bogoliubov_tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "symplectic defect %.3e, symmetry defect %.3e", sd, sy);
    throw Error(ErrorCode::BogoliubovViolation, buf);
  }
  auto impl = std::make_shared<const GaussianImplementer>(std::move(t), fock(m, opt.n_max));
  if (impl->vacuum_tail() > opt.tail_tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "vacuum image keeps weight %.3e in the top shell", impl->vacuum_tail());
    throw Error(ErrorCode::CutoffUnstable, buf);
  }
  items_.emplace(std::make_pair(h, opt.n_max), impl);
  return impl;
}

namespace {
constexpr char kMagic[8] = {'C', 'F', 'I', 'M', 'P', 'L', '0', '1'};
}

void save_mode_matrix(const std::string& path, std::uint64_t hash, const Eigen::MatrixXd& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path);
  const std::int64_t n = r.rows();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&hash), sizeof hash);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
}

bool load_mode_matrix(const std::string& path, std::uint64_t hash, Eigen::MatrixXd& r) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t h = 0;
  std::int64_t n = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || !std::equal(magic, magic + 8, kMagic) || h != hash || n <= 0 || n > 4096) return false;
  r.resize(n, n);
  in.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
  return static_cast<bool>(in);
}

// ---------------------------------------------------------------------------
// Measured phases

namespace {

struct Product {
  cplx raw;
  double defect = 0.0;
};

Product factorization_product(const KineticPerturbation& p, const KineticPerturbation& q,
                              const KineticPerturbation& n, ImplementerCache& cache, int n_max,
                              const std::vector<Eigen::VectorXcd>* probes) {
  ImplementerOptions io;
  io.n_max = n_max;
  const auto s1 = cache.get(p + n, io);
  const auto s2 = cache.get(n, io);
  const auto s3 = cache.get(q + n, io);
  const auto s4 = cache.get(p + q + n, io);
  auto chain = [&](const Eigen::VectorXcd& v) {
    return s1->apply(s2->apply_inverse(s3->apply(s4->apply_inverse(v))));
  };
  Product out;
  out.raw = chain(s1->fock().vacuum())[0];
  if (probes) {
    const cplx alpha = out.raw / std::abs(out.raw);
    for (const auto& v : *probes) out.defect = std::max(out.defect, (chain(v) - alpha * v).norm());
  }
  return out;
}

}  // namespace

MeasuredPhase measure_alpha(const KineticPerturbation& p, const KineticPerturbation& q,
                            const KineticPerturbation& n, ImplementerCache& cache,
                            const AlphaOptions& opt, const std::string& label) {
  if (opt.require_order && !certified_order(p, q, &n))
    throw Error(ErrorCode::NotCausallyOrdered, "no certificate that P succeeds Q with regard to N for " + label);
  MeasuredPhase out;
  out.triple = label;
  const OneParticleSpace space(p.spec());
  out.modes = space.modes();
  ImplementerOptions io;
  io.n_max = opt.n_max;
  const auto fock = cache.get(n, io)->fock_ptr();
  const auto probes = probe_states(*fock, opt.seed, opt.probes);
  const Product hi = factorization_product(p, q, n, cache, opt.n_max, &probes);
  out.raw_modulus = std::abs(hi.raw);
  if (out.raw_modulus < 1e-12) throw Error(ErrorCode::CutoffUnstable, "vanishing vacuum overlap for " + label);
  out.alpha = hi.raw / out.raw_modulus;
  out.operator_defect = hi.defect;
  out.cutoffs = {opt.n_max};
  if (opt.n_max >= 4) {
    const Product lo = factorization_product(p, q, n, cache, opt.n_max - 2, nullptr);
    out.cutoffs.push_back(opt.n_max - 2);
    out.truncation_error = std::abs(std::arg(out.alpha * std::conj(lo.raw)));
  }
  return out;
}

void append_phase_log(const std::string& path, const MeasuredPhase& m) {
  nlohmann::json j;
  j["triple"] = m.triple;
  j["alpha_re"] = m.alpha.real();
  j["alpha_im"] = m.alpha.imag();
  j["defect"] = m.operator_defect;
  j["truncation_error"] = m.truncation_error;
  j["cutoffs"] = m.cutoffs;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::FormatError, "cannot append to " + path);
  out << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Dynamical identity and adjoint action

DynamicalReport dynamical_check(const KineticPerturbation& p, const LatticeField& f, std::uint64_t seed,
                                int samples, bool implementers, int n_max) {
  DynamicalReport rep;
  const auto& spec = p.spec();
  const GreenSolver free(spec);
  const WaveOperator pp(p, WaveOperator::Part::Perturbation);
  const LatticeField a = free.advanced(f);

  GeneralFunctional P;
  P.c = 0.0;
  P.f = LatticeField(spec);
  P.quad = p;
  const GeneralFunctional lhs = weyl_functional(free, f) + functional_shift(P, a);
  GeneralFunctional rhs;
  rhs.f = f + pp.apply(a);
  rhs.c = 0.5 * inner(a, rhs.f);
  rhs.quad = p;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    LatticeField phi(spec);
    for (auto& v : phi.data()) v = nd(rng);
    const double l = evaluate(lhs, phi);
    const double r = evaluate(rhs, phi);
    rep.functional_defect = std::max(rep.functional_defect, std::abs(l - r) / std::max({1.0, std::abs(l), std::abs(r)}));
  }

  if (!implementers) return rep;
  const ScatteringMap map(p);
  const OneParticleSpace space(spec);
  const Eigen::VectorXcd af = space.amplitudes(SolutionClass::of(free, f));
  const Eigen::VectorXcd atf = space.amplitudes(SolutionClass::of(free, map.apply(f)));
  auto defect_at = [&](int cutoff) {
    ImplementerOptions io;
    io.n_max = cutoff;
    io.tail_tol = 1.0;
    const GaussianImplementer s = build_implementer(map, io);
    double d = 0.0;
    for (const auto& psi : probe_states(s.fock(), seed, 3)) {
      const Eigen::VectorXcd l = s.apply(apply_weyl(s.fock(), af, s.apply_inverse(psi)));
      const Eigen::VectorXcd r = apply_weyl(s.fock(), atf, psi);
      d = std::max(d, (l - r).norm());
    }
    return d;
  };
  rep.adjoint_defect = defect_at(n_max);
  rep.adjoint_defect_lower = n_max >= 2 ? defect_at(n_max - 2) : rep.adjoint_defect;
  rep.truncation_unstable = rep.adjoint_defect > 1e-4 ||
                            (rep.adjoint_defect > 1e-12 && rep.adjoint_defect > rep.adjoint_defect_lower);
  return rep;
}

}  // namespace causalfield
