#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "causalfield/geometry.hpp"
#include "causalfield/lattice.hpp"

namespace causalfield {

/// FNV-1a digest of a perturbation's lattice and coefficient arrays.
std::uint64_t content_hash(const KineticPerturbation& p);

/// Shares Green solvers between maps built from equal perturbations; thread-safe.
class SolverCache {
 public:
  std::shared_ptr<const GreenSolver> get(const KineticPerturbation& p);
  std::shared_ptr<const GreenSolver> free(const LatticeSpec& spec);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<std::uint64_t, std::shared_ptr<const GreenSolver>>> solvers_;
};

/// Classical scattering map T_P = (1 - P Delta_R^P)(1 + P Delta_A), or the relative map
/// T_P^N = T_N^{-1} T_{P+N} evaluated in the conjugated form
///   T_P^N = (K Delta_A^N) (1 - P Delta_R^{N+P}) (1 + P Delta_A^N) (1 + N Delta_A).
class ScatteringMap {
 public:
  explicit ScatteringMap(const KineticPerturbation& p, SolverCache* cache = nullptr);
  ScatteringMap(const KineticPerturbation& p, const KineticPerturbation& n,
                SolverCache* cache = nullptr);

  const KineticPerturbation& perturbation() const { return p_; }
  bool relative() const { return relative_; }
  bool trivial() const { return trivial_; }
  const LatticeSpec& spec() const { return p_.spec(); }
  /// Solver of the free operator K.
  const GreenSolver& free_solver() const { return *free_; }

  LatticeField apply(const LatticeField& f) const;
  LatticeField apply_inverse(const LatticeField& f) const;

 private:
  LatticeField core(const LatticeField& h, bool inverse) const;

  KineticPerturbation p_;
  KineticPerturbation n_;
  bool relative_ = false;
  bool trivial_ = false;
  WaveOperator p_part_;
  WaveOperator n_part_;
  std::shared_ptr<const GreenSolver> free_;
  std::shared_ptr<const GreenSolver> base_;  // Delta^N (free when N = 0)
  std::shared_ptr<const GreenSolver> full_;  // Delta^{N+P}
};

LatticeField apply_T(const ScatteringMap& map, const LatticeField& f);

/// |<Tf, Delta Tg> - <f, Delta g>| / max(|<f, Delta g>|, scale) with the free commutator.
double symplectic_defect(const ScatteringMap& map, const LatticeField& f, const LatticeField& g,
                         double scale = 1e-12);

/// Relative deviation of <K Delta_A^P f, Delta K Delta_A^P g> from <f, Delta^P g>.
double perturbed_pairing_defect(const KineticPerturbation& p, const LatticeField& f,
                                const LatticeField& g);

struct CausalSplit {
  LatticeField g;
  LatticeField g_q;
  LatticeField h_q;
  LatticeField chi;
  double reconstruction_residual = 0.0;  // ||(K+Q)(chi Delta_R^Q g) - g_Q|| / ||g||
  bool certified = false;                // supp g_Q misses the over-approximated past of Q
};

/// Cutoff chi: 0 on the past cone of supp Q dilated by `inner`, 1 beyond `inner + width`.
LatticeField causal_cutoff(const KineticPerturbation& q, int inner = 1, int width = 3);
CausalSplit causal_split(const LatticeField& g, const KineticPerturbation& q, int inner = 1,
                         int width = 3);

/// Deterministic smooth probe bumps: half centered on the time slab `slab_t`, half anywhere.
std::vector<LatticeField> probe_basis(const LatticeSpec& spec, int count, std::uint64_t seed,
                                      int slab_t, double radius_nodes = 4.0, int margin = 4);

/// Certified order P succeeds Q with regard to N, using operator supports.
bool certified_order(const KineticPerturbation& p, const KineticPerturbation& q,
                     const KineticPerturbation* n);

struct FactorizationResult {
  double defect = 0.0;
  std::size_t worst_probe = 0;
};

/// sup_k ||T_{P+N} T_N^{-1} T_{Q+N} f_k - T_{P+Q+N} f_k|| / ||f_k||.
/// Throws NotCausallyOrdered without a certificate unless `require_order` is false.
FactorizationResult factorization_defect(const KineticPerturbation& p, const KineticPerturbation& q,
                                         const KineticPerturbation* n,
                                         const std::vector<LatticeField>& probes,
                                         bool require_order = true, SolverCache* cache = nullptr);

/// Fraction of the squared mass of (T - 1) f lying outside `envelope`.
double locality_leak(const ScatteringMap& map, const LatticeField& f, const Region& envelope);

/// ||T_P T_Q f - T_Q T_P f|| / ||f||.
double commutation_defect(const ScatteringMap& tp, const ScatteringMap& tq, const LatticeField& f);

}  // namespace causalfield
