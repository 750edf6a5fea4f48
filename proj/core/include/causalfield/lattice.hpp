#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "causalfield/geometry.hpp"
#include "causalfield/grid.hpp"

namespace causalfield {

/// Lattice operator obtained as the gradient of the discrete action
///   B(u,v) = sum_elements vol * [ (eta+p)^{mu nu} D_mu u D_nu v - (m^2+q) u v ],
/// so that <u, K v> = B(u, v) and K = -(d (eta+p) d + m^2 + q).
/// Diagonal kinetic terms live on links, mixed terms on plaquettes with
/// plaquette-averaged differences.
class WaveOperator {
 public:
  enum class Part { Full, Perturbation };

  WaveOperator() = default;
  /// Free operator K on the lattice.
  explicit WaveOperator(const LatticeSpec& spec);
  /// K + P (Part::Full) or the perturbation P = (K+P) - K alone (Part::Perturbation).
  explicit WaveOperator(const KineticPerturbation& pert, Part part = Part::Full);

  const LatticeSpec& spec() const { return spec_; }
  bool has_mixed_time() const { return mixed_time_; }

  /// Matrix-free application on every node, including the window's time edges.
  LatticeField apply(const LatticeField& v) const;
  /// (K v) on one time row; rows of v outside [t-1, t+1] are not read.
  void apply_row(const LatticeField& v, int t, std::span<double> out) const;
  /// Action 1/2 B(v,v) summed element by element (local Lagrangian quadrature).
  double action(const LatticeField& v) const;
  /// Sum over elements touching supp(phi0) of L[phi+phi0] - L[phi].
  double action_difference(const LatticeField& phi, const LatticeField& phi0) const;

  /// Coupling of row t to row t+1 (the block K[t, t+1]) as sparse triplets.
  std::vector<Eigen::Triplet<double>> forward_block(int t) const;
  /// True when K[t, t+1] is diagonal.
  bool block_is_diagonal(int t) const;
  /// Diagonal of K[t, t+1].
  std::vector<double> forward_diagonal(int t) const;

  /// Dense matrix assembled from element matrices (independent of apply()).
  Eigen::MatrixXd dense() const;

 private:
  struct Family {
    int a = 0;
    int b = 1;
    std::vector<double> c;  // coefficient per lower-left node
    bool active = false;
  };

  void build(const KineticPerturbation* pert, Part part);
  std::ptrdiff_t step(std::size_t n, int axis, int delta) const;
  template <class Visit>
  void for_each_element(Visit&& visit) const;

  LatticeSpec spec_{};
  std::vector<double> a_;   // time links (t, t+1)
  std::vector<double> bx_;  // x links
  std::vector<double> by_;  // y links
  std::vector<double> mq_;  // -(m^2 + q) on nodes
  std::vector<Family> families_;
  std::vector<std::uint8_t> strip_mixed_;  // per time strip: mixed plaquettes present
  bool mixed_time_ = false;
};

enum class GreenKind { Retarded, Advanced, Commutator, Dirac };
const char* to_string(GreenKind k);

/// Leapfrog solver for (K+P) u = f with vanishing past (retarded) or future (advanced) data.
/// Strips with mixed time-space coefficients are solved implicitly with cached sparse LU.
class GreenSolver {
 public:
  explicit GreenSolver(const LatticeSpec& spec);
  explicit GreenSolver(const KineticPerturbation& pert);

  const WaveOperator& op() const { return op_; }
  const LatticeSpec& spec() const { return op_.spec(); }

  LatticeField retarded(const LatticeField& f) const;
  LatticeField advanced(const LatticeField& f) const;
  LatticeField apply(GreenKind kind, const LatticeField& f) const;

  /// Relative residual of (K+P) u = f on the rows the solve enforces.
  double residual(GreenKind kind, const LatticeField& u, const LatticeField& f) const;

 private:
  struct Strip;
  void init();
  void check_source(const LatticeField& f) const;
  void check_window(const LatticeField& u) const;

  WaveOperator op_;
  std::vector<std::shared_ptr<const Strip>> strips_;
};

/// Handle realizing one of the four Green operators.
struct GreenOperator {
  GreenKind kind = GreenKind::Retarded;
  std::shared_ptr<const GreenSolver> solver;

  LatticeField operator()(const LatticeField& f) const { return solver->apply(kind, f); }
};

LatticeField apply_wave_operator(const WaveOperator& op, const LatticeField& f);
LatticeField green_apply(const GreenOperator& g, const LatticeField& f);

/// Dense oracle: retarded/advanced solves of the square block systems by LU.
class DenseGreenOracle {
 public:
  explicit DenseGreenOracle(const WaveOperator& op);
  LatticeField apply(GreenKind kind, const LatticeField& f) const;

 private:
  LatticeSpec spec_;
  Eigen::MatrixXd k_;
  Eigen::PartialPivLU<Eigen::MatrixXd> ret_;
  Eigen::PartialPivLU<Eigen::MatrixXd> adv_;
};

/// max of the two relative resolvent defects for the given kind.
double resolvent_defect(const KineticPerturbation& p, GreenKind kind, const LatticeField& f);
double resolvent_defect(const GreenSolver& perturbed, const GreenSolver& free,
                        const WaveOperator& p_part, GreenKind kind, const LatticeField& f);

/// Value of the functional c + <f, phi> + (1/2) <phi, P phi>.
double evaluate(const GeneralFunctional& F, const LatticeField& phi);
GeneralFunctional operator+(const GeneralFunctional& a, const GeneralFunctional& b);

/// Closed-form decomposition of the free action variation:
///   dL0(phi0)[phi] = <K phi0, phi> + (1/2) <phi0, K phi0>.
GeneralFunctional free_action_variation(const LatticeField& phi0);
/// Numerical action variation by local quadrature of the Lagrangian.
double action_variation(const WaveOperator& op, const LatticeField& phi, const LatticeField& phi0);
/// F^{phi0}[phi] = F[phi + phi0] as a new (c', f', quad) triple.
GeneralFunctional functional_shift(const GeneralFunctional& F, const LatticeField& phi0);
/// Linear functional L_f plus the constant (1/2) <f, Delta_D^P f> (F^P_f).
GeneralFunctional weyl_functional(const GreenSolver& g, const LatticeField& f);

struct SolverConfig {
  double dx = 0.1;
  double dt = 0.05;
  double tol = 1e-8;
  std::array<int, 3> window{64, 64, 1};  // (nt, nx, ny)
  int refinement_levels = 3;
};
SolverConfig load_solver_config(const std::string& path);
void save_solver_config(const SolverConfig& c, const std::string& path);

}  // namespace causalfield
