#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "causalfield/geometry.hpp"
#include "causalfield/lattice.hpp"
#include "causalfield/scattering.hpp"

namespace causalfield {

using cplx = std::complex<double>;

/// Free solution u = Delta f stored as its values on the time rows 0 and 1.
struct SolutionClass {
  LatticeSpec spec;
  std::vector<double> u0;
  std::vector<double> u1;

  static SolutionClass zero(const LatticeSpec& spec);
  /// Class of a test function, through u = Delta f of the free solver.
  static SolutionClass of(const GreenSolver& free, const LatticeField& f);
  /// Reads rows 0 and 1 of a free solution.
  static SolutionClass from_solution(const LatticeField& u);

  /// Leapfrog evolution of the Cauchy data over the whole window.
  LatticeField evolve() const;
  double max_abs() const;

  SolutionClass& operator+=(const SolutionClass& o);
  SolutionClass& operator*=(double s);
  friend SolutionClass operator+(SolutionClass a, const SolutionClass& b) { return a += b; }
  friend SolutionClass operator*(double s, SolutionClass a) { return a *= s; }
};

/// Lattice Wronskian sum (u_0 v_1 - u_1 v_0) dx^{d-1} / dt, equal to <f, Delta g>.
double symplectic_form(const SolutionClass& a, const SolutionClass& b);

/// Fourier modes of the periodic slice with the leapfrog dispersion
///   (2/dt)^2 sin^2(w dt/2) = sum_i (2/dx)^2 sin^2(k_i dx/2) + m^2.
/// Amplitudes are scaled so that Im(u, v) = symplectic_form(u, v).
class OneParticleSpace {
 public:
  explicit OneParticleSpace(const LatticeSpec& spec);

  const LatticeSpec& spec() const { return spec_; }
  int modes() const { return static_cast<int>(theta_.size()); }
  /// Continuum-normalized frequency w_k of mode k.
  double frequency(int k) const { return theta_[k] / spec_.dt; }
  /// Index of the mode with opposite momentum.
  int partner(int k) const { return partner_[k]; }

  Eigen::VectorXcd amplitudes(const SolutionClass& u) const;
  SolutionClass from_amplitudes(const Eigen::VectorXcd& a) const;
  cplx scalar_product(const SolutionClass& a, const SolutionClass& b) const;

  /// Test function K(chi u) supported on rows t0 and t0+1 whose class is u.
  LatticeField source_for(const SolutionClass& u, int t0 = 1) const;

 private:
  LatticeSpec spec_;
  WaveOperator free_;
  std::vector<double> theta_;  // w_k dt
  std::vector<double> scale_;
  std::vector<int> partner_;
  Eigen::MatrixXcd dft_;  // slice -> Fourier coefficients
};

/// Phase angle times the class of a Weyl operator W(f).
struct WeylElement {
  double angle = 0.0;
  SolutionClass cls;

  cplx phase() const { return std::polar(1.0, angle); }
};

WeylElement weyl_element(const GreenSolver& free, const LatticeField& f);
/// W(f) W(g) = exp(-(i/2) <f, Delta g>) W(f+g).
WeylElement weyl_product(const WeylElement& a, const WeylElement& b);
WeylElement weyl_inverse(const WeylElement& a);
/// W_P(f) = W(K Delta_A^P f).
WeylElement perturbed_weyl(const KineticPerturbation& p, const LatticeField& f);

/// Explicit phases of the extended operators S(c + L_f + P).
struct ExtendedPhase {
  double prefactor_angle = 0.0;  // c - (1/2) <f, Delta_D^P f>
  double causal_angle = 0.0;     // <f, Delta_A^P g>

  cplx causal_phase() const { return std::polar(1.0, causal_angle); }
};
ExtendedPhase extended_S_phase(double c, const LatticeField& f, const KineticPerturbation& p,
                               const LatticeField& g);

/// Bogoliubov blocks of a real-linear map on mode amplitudes, a -> A a + B conj(a).
/// Symplectic conditions in this convention: A^dag A - B^T conj(B) = 1, A^dag B symmetric.
struct Bogoliubov {
  Eigen::MatrixXd real;  // acting on (Re a, Im a)
  Eigen::MatrixXcd A;
  Eigen::MatrixXcd B;

  static Bogoliubov from_real(const Eigen::MatrixXd& r);
  static Bogoliubov identity(int modes);
  double hs_norm() const { return B.norm(); }
  double symplectic_defect() const;
  double symmetry_defect() const;
};

/// T_P on the one-particle space, assembled mode by mode through apply_T.
Bogoliubov mode_matrix(const ScatteringMap& map, const OneParticleSpace& space);

/// Bosonic Fock space over `modes` modes truncated to total occupation <= n_max.
/// States are ranked lexicographically in the occupation tuple; the vacuum has rank 0.
class FockSpace {
 public:
  FockSpace(int modes, int n_max);

  int modes() const { return modes_; }
  int n_max() const { return n_max_; }
  std::size_t dim() const { return dim_; }
  std::size_t rank(const std::vector<int>& occ) const;
  std::vector<int> occupations(std::size_t state) const;
  int total(std::size_t state) const { return total_[state]; }

  Eigen::VectorXcd vacuum() const;
  /// Weight of the states with total occupation n_max.
  double top_shell_weight(const Eigen::VectorXcd& psi) const;

  /// H psi for H = sum h_ij a_i^+ a_j + 1/2 sum (g_ij a_i^+ a_j^+ + conj(g_ij) a_i a_j).
  void apply_quadratic(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& g,
                       const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const;
  /// Phi(a) psi for Phi(a) = (a(a) + a^+(a)) / sqrt 2.
  void apply_field(const Eigen::VectorXcd& a, const Eigen::VectorXcd& in,
                   Eigen::VectorXcd& out) const;
  /// Dense matrix of the quadratic operator (small spaces only).
  Eigen::MatrixXcd dense_quadratic(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& g) const;

 private:
  int modes_;
  int n_max_;
  std::size_t dim_;
  std::vector<std::vector<std::size_t>> count_;  // count_[m][n] = C(m+n, n)
  std::vector<std::uint8_t> occ_;                // dim x modes
  std::vector<int> total_;
  std::vector<std::int32_t> up_;    // rank of a_i^+ state, -1 beyond cutoff
  std::vector<std::int32_t> down_;  // rank of a_i state, -1 when empty
};

/// Weyl operator W(a) = exp(i Phi(a)) applied by Taylor series.
Eigen::VectorXcd apply_weyl(const FockSpace& fock, const Eigen::VectorXcd& a,
                            const Eigen::VectorXcd& psi);

/// Gaussian unitary S = exp(-i H) with S Phi(a) S^{-1} = Phi(T a), in the vacuum-overlap
/// gauge <Omega, S Omega> > 0.
class GaussianImplementer {
 public:
  GaussianImplementer(Bogoliubov t, std::shared_ptr<const FockSpace> fock);

  const Bogoliubov& bogoliubov() const { return t_; }
  const FockSpace& fock() const { return *fock_; }
  std::shared_ptr<const FockSpace> fock_ptr() const { return fock_; }
  int modes() const { return fock_->modes(); }
  int n_max() const { return fock_->n_max(); }

  /// Phase removed to reach the vacuum-overlap gauge.
  double gauge_angle() const { return gauge_; }
  /// |<Omega, S Omega>| before gauge fixing.
  double vacuum_overlap() const { return overlap_; }
  /// Top-shell weight of S Omega.
  double vacuum_tail() const { return tail_; }
  /// true when the gauge fell back to the first nonzero vacuum-column entry.
  bool fallback_gauge() const { return fallback_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi) const;
  Eigen::VectorXcd apply_inverse(const Eigen::VectorXcd& psi) const;
  /// max over probes of ||S^{-1} S psi - psi||.
  double unitarity_defect(const std::vector<Eigen::VectorXcd>& probes) const;
  /// Dense matrix of S (small spaces only).
  Eigen::MatrixXcd dense() const;

 private:
  Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi, double sign) const;

  Bogoliubov t_;
  std::shared_ptr<const FockSpace> fock_;
  Eigen::MatrixXcd h_;
  Eigen::MatrixXcd g_;
  double gauge_ = 0.0;
  double overlap_ = 1.0;
  double tail_ = 0.0;
  bool fallback_ = false;
};

struct ImplementerOptions {
  int n_max = 6;
  double bogoliubov_tol = 1e-5;
  double tail_tol = 1e-4;
};

/// T_P on all slice modes of the (periodic) lattice, split and implemented on Fock space.
GaussianImplementer build_implementer(const KineticPerturbation& p,
                                      const ImplementerOptions& opt = {},
                                      SolverCache* cache = nullptr);
GaussianImplementer build_implementer(const ScatteringMap& map, const ImplementerOptions& opt,
                                      std::shared_ptr<const FockSpace> fock = nullptr);

/// Probe states: vacuum, one-particle states and small coherent states.
std::vector<Eigen::VectorXcd> probe_states(const FockSpace& fock, std::uint64_t seed,
                                           int count = 4);

/// Single-flight store of implementers keyed by (perturbation, n_max); optional disk cache
/// of the mode matrices under `dir`.
class ImplementerCache {
 public:
  explicit ImplementerCache(std::string dir = {});
  /// Directory taken from CAUSALFIELD_CACHE when set.
  static std::string default_dir();

  std::shared_ptr<const GaussianImplementer> get(const KineticPerturbation& p,
                                                 const ImplementerOptions& opt);
  SolverCache& solvers() { return solvers_; }
  std::size_t disk_hits() const { return disk_hits_; }

 private:
  std::shared_ptr<const FockSpace> fock(int modes, int n_max);

  std::string dir_;
  std::mutex mu_;
  std::map<std::pair<std::uint64_t, int>, std::shared_ptr<const GaussianImplementer>> items_;
  std::map<std::pair<int, int>, std::shared_ptr<const FockSpace>> spaces_;
  SolverCache solvers_;
  std::size_t disk_hits_ = 0;
};

/// Binary mode-matrix file: magic, hash, modes, then the real 2M x 2M matrix.
void save_mode_matrix(const std::string& path, std::uint64_t hash, const Eigen::MatrixXd& r);
bool load_mode_matrix(const std::string& path, std::uint64_t hash, Eigen::MatrixXd& r);

struct MeasuredPhase {
  std::string triple;
  cplx alpha{1.0, 0.0};
  double raw_modulus = 1.0;      // |<Omega, product Omega>| before normalization
  double operator_defect = 0.0;  // max over probes ||product psi - alpha psi||
  double truncation_error = 0.0; // angle change against the lower cutoff
  int modes = 0;
  std::vector<int> cutoffs;

  double angle() const { return std::arg(alpha); }
};

struct AlphaOptions {
  int n_max = 6;
  bool require_order = true;
  int probes = 4;
  std::uint64_t seed = 1;
};

/// alpha(N|P,Q) from <Omega, S(P+N) S(N)^{-1} S(Q+N) S(P+Q+N)^{-1} Omega>.
MeasuredPhase measure_alpha(const KineticPerturbation& p, const KineticPerturbation& q,
                            const KineticPerturbation& n, ImplementerCache& cache,
                            const AlphaOptions& opt = {}, const std::string& label = "N|P,Q");

/// Appends {triple, alpha_re, alpha_im, defect, cutoffs} as one JSON line.
void append_phase_log(const std::string& path, const MeasuredPhase& m);

struct DynamicalReport {
  double functional_defect = 0.0;  // F_f + P^{Delta_A f} vs L_{(K+P) Delta_A f} + ... + P
  double adjoint_defect = 0.0;     // ||S W(f) S^{-1} psi - W(T f) psi|| over probes
  double adjoint_defect_lower = 0.0;  // same at n_max - 2
  bool truncation_unstable = false;
};

/// Functional identity on `samples` random fields and, when `implementers` is set,
/// the adjoint action on Fock space.
DynamicalReport dynamical_check(const KineticPerturbation& p, const LatticeField& f,
                                std::uint64_t seed, int samples = 100, bool implementers = true,
                                int n_max = 6);

}  // namespace causalfield
